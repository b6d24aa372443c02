#pragma once

#include "qvelab/model.hpp"
#include "qvelab/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace qvelab {

inline constexpr const char* kVersion = "qvelab 1.0.0";

// {"a": [...], "S": [[...], ...], "weights": [...]}; a and weights optional
// (a defaults to 0). Throws Io for unreadable files, InvalidArgument for
// malformed content, plus the ModelSpec::build validation errors.
ModelSpec load_model(const std::string& path);
ModelSpec model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const ModelSpec& model);

// FNV-1a over n and the raw bytes of a, S and the weights, as 16 hex digits.
std::string model_hash(const ModelSpec& model);

// %.17g
std::string format_double(double x);

// tau, eta, avg_density, v_0 .. v_{n-1}, residual, converged, model_hash
void write_density_csv(std::ostream& out, const GridSolution& grid, const std::string& hash);
// tau, eta, re_m_0, im_m_0, ..., residual, converged, model_hash
void write_solution_csv(std::ostream& out, const GridSolution& grid, const std::string& hash);
nlohmann::json grid_to_json(const GridSolution& grid, bool with_m);

nlohmann::json complex_to_json(Complex c);
nlohmann::json vec_to_json(const RVec& v);
nlohmann::json vec_to_json(const CVec& v);

// Writes to path + ".tmp" and renames over path. Throws Io.
void write_atomic(const std::string& path, const std::string& content);

struct RunManifest {
  std::string command;
  std::string model_hash;
  nlohmann::json config;
  std::optional<std::uint64_t> seed;
  std::string version = kVersion;
  std::vector<std::string> outputs;

  nlohmann::json to_json() const;
};

}  // namespace qvelab
