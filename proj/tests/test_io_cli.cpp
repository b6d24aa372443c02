#include "qvelab/cli.hpp"
#include "qvelab/io.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace qvelab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("qvelab_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run(std::vector<std::string> args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_SUITE("io_cli") {
  TEST_CASE("model json round trip") {
    const ModelSpec m = two_block(3.0, 0.25, 4);
    const ModelSpec back = model_from_json(nlohmann::json::parse(model_to_json(m).dump()));
    CHECK(back.S() == m.S());
    CHECK(back.a() == m.a());
    CHECK(back.weights() == m.weights());
    CHECK(model_hash(back) == model_hash(m));
    CHECK(model_hash(m) != model_hash(two_block(3.0, 0.25, 8)));
    CHECK(model_hash(m).size() == 16);

    const ModelSpec plain = model_from_json(nlohmann::json::parse(R"({"S": [[1, 0.5], [0.5, 2]]})"));
    CHECK(plain.a().isZero());
    CHECK(plain.weights()[0] == 0.5);
    CHECK_THROWS_AS(model_from_json(nlohmann::json::parse(R"({"S": [[1, -0.5], [-0.5, 2]]})")), Error);
    CHECK_THROWS_AS(model_from_json(nlohmann::json::parse(R"({"a": [0]})")), Error);
    CHECK(format_double(0.1) == "0.10000000000000001");
  }

  TEST_CASE("density of the semicircle") {
    TempDir dir;
    const std::string out = dir.file("out.csv");
    REQUIRE(run({"density", "--semicircle", "4", "--grid", "-3:3:0.01", "--eta", "1e-6", "-o", out, "--format", "csv"}) == 0);
    const auto rows = read_csv(out);
    REQUIRE(rows.size() == 602);
    CHECK(rows[0][0] == "tau");
    CHECK(rows[0][2] == "avg_density");
    for (std::size_t k = 1; k < rows.size(); ++k) {
      const double tau = std::stod(rows[k][0]);
      CHECK(std::abs(std::stod(rows[k][2]) - oracle::rho_sc(tau)) < 1e-3);
      CHECK(rows[k].back().size() == 16);
    }
    const auto manifest = nlohmann::json::parse(slurp(out + ".manifest.json"));
    CHECK(manifest["command"] == "density");
    CHECK(manifest["model_hash"] == rows[1].back());
    CHECK(manifest["version"] == kVersion);
    CHECK(manifest["outputs"][0] == out);
  }

  TEST_CASE("cusp classification from the command line") {
    TempDir dir;
    const std::string out = dir.file("shape.json");
    REQUIRE(run({"shape", "--two-block", "3", "0.0153846", "2", "--grid", "-2.6:2.6:0.002", "-o", out}) == 0);
    const auto j = nlohmann::json::parse(slurp(out));
    int cusps = 0;
    for (const auto& p : j["singular_points"]) {
      if (p["kind"] != "cusp") continue;
      ++cusps;
      const double tau = std::abs(p["tau"].get<double>());
      CHECK(tau > 1.9);
      CHECK(tau < 1.97);
    }
    CHECK(cusps == 2);
  }

  TEST_CASE("reruns are byte identical") {
    TempDir dir;
    for (const std::string& fmt : {"csv", "json"}) {
      const std::string a = dir.file("a." + fmt), b = dir.file("b." + fmt);
      const std::vector<std::string> base{"solve", "--two-block", "3", "0.25", "4", "--grid", "-1:1:0.25", "--format", fmt};
      auto args_a = base, args_b = base;
      args_a.insert(args_a.end(), {"-o", a});
      args_b.insert(args_b.end(), {"-o", b, "--threads", "3"});
      REQUIRE(run(args_a) == 0);
      REQUIRE(run(args_b) == 0);
      CHECK(slurp(a) == slurp(b));
      CHECK(!slurp(a).empty());
    }
    const std::string r1 = dir.file("r1.json"), r2 = dir.file("r2.json");
    REQUIRE(run({"rmt", "--semicircle", "1", "--N", "200", "--seed", "5", "-o", r1}) == 0);
    REQUIRE(run({"rmt", "--semicircle", "1", "--N", "200", "--seed", "5", "-o", r2}) == 0);
    CHECK(slurp(r1) == slurp(r2));
    const auto manifest = nlohmann::json::parse(slurp(r1 + ".manifest.json"));
    CHECK(manifest["seed"] == 5);
  }

  TEST_CASE("validation errors") {
    TempDir dir;
    std::string err;
    CHECK(run({"density", "--model", dir.file("missing.json"), "--grid", "-1:1:0.1", "-o", dir.file("x.csv")}, &err) == 2);
    CHECK(!err.empty());
    CHECK(run({"density", "--semicircle", "2", "--grid", "3:1:0.1", "-o", dir.file("x.csv")}) == 2);
    CHECK(run({"density", "--semicircle", "2", "--grid", "nonsense", "-o", dir.file("x.csv")}) == 2);
    CHECK(run({"frobnicate"}) == 2);
    CHECK(run({"scale", "--two-block", "3", "0.6", "2", "-o", dir.file("s.json")}) == 2);

    std::ofstream(dir.file("bad.json")) << R"({"S": [[1, 2], [3, 1]]})";
    CHECK(run({"solve", "--model", dir.file("bad.json"), "--tau", "0", "-o", dir.file("y.json")}) == 2);
    std::ofstream(dir.file("good.json")) << R"({"S": [[1, 0.5], [0.5, 1]], "a": [0.1, -0.1]})";
    CHECK(run({"solve", "--model", dir.file("good.json"), "--tau", "0", "-o", dir.file("y.json")}) == 0);
  }

  TEST_CASE("scaling from the command line") {
    TempDir dir;
    const std::string out = dir.file("s.json");
    REQUIRE(run({"scale", "--two-block", "3", "0.6", "5", "-o", out}) == 0);
    CHECK(nlohmann::json::parse(slurp(out))["status"] == "not_scalable");
    REQUIRE(run({"scale", "--semicircle", "3", "-o", out}) == 0);
    CHECK(nlohmann::json::parse(slurp(out))["status"] == "unique");
  }
}
