#include "qvelab/cli.hpp"

int main(int argc, char** argv) { return qvelab::run_cli(argc, argv); }
