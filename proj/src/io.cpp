#include "qvelab/io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace qvelab {

using nlohmann::json;

namespace {

RVec read_vector(const json& j, const char* name) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be an array");
  RVec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::InvalidArgument, std::string(name) + " must hold numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

}  // namespace

ModelSpec model_from_json(const json& j) {
  if (!j.is_object() || !j.contains("S")) throw Error(ErrorCode::InvalidArgument, "model needs a kernel \"S\"");
  const json& rows = j.at("S");
  if (!rows.is_array() || rows.empty()) throw Error(ErrorCode::InvalidArgument, "S must be a non-empty array of rows");
  const auto n = static_cast<Eigen::Index>(rows.size());
  RMat S(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const RVec row = read_vector(rows[i], "S row");
    if (row.size() != n) throw Error(ErrorCode::InvalidArgument, "S must be square");
    S.row(i) = row.transpose();
  }
  RVec a = j.contains("a") ? read_vector(j.at("a"), "a") : RVec::Zero(n);
  std::optional<RVec> weights;
  if (j.contains("weights")) weights = read_vector(j.at("weights"), "weights");
  return ModelSpec::build(std::move(a), std::move(S), std::move(weights));
}

ModelSpec load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open model file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "model file " + path + " is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

json vec_to_json(const RVec& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json complex_to_json(Complex c) { return json::array({c.real(), c.imag()}); }

json vec_to_json(const CVec& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(complex_to_json(v[i]));
  return out;
}

json model_to_json(const ModelSpec& model) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < model.n(); ++i) rows.push_back(vec_to_json(RVec(model.S().row(i).transpose())));
  return json{{"a", vec_to_json(model.a())}, {"S", rows}, {"weights", vec_to_json(model.weights())}};
}

std::string model_hash(const ModelSpec& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::int64_t n = model.n();
  feed(&n, sizeof n);
  feed(model.a().data(), sizeof(double) * model.a().size());
  feed(model.S().data(), sizeof(double) * model.S().size());
  feed(model.weights().data(), sizeof(double) * model.weights().size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_density_csv(std::ostream& out, const GridSolution& grid, const std::string& hash) {
  const Eigen::Index n = grid.solutions.empty() ? 0 : grid.solutions.front().m.size();
  out << "tau,eta,avg_density";
  for (Eigen::Index i = 0; i < n; ++i) out << ",v_" << i;
  out << ",residual,converged,model_hash\n";
  for (std::size_t k = 0; k < grid.tau_grid.size(); ++k) {
    const Solution& s = grid.solutions[k];
    out << format_double(grid.tau_grid[k]) << ',' << format_double(grid.eta) << ','
        << format_double(grid.avg_density[k]);
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_double(s.m[i].imag());
    out << ',' << format_double(s.residual) << ',' << (grid.converged[k] ? 1 : 0) << ',' << hash << '\n';
  }
}

void write_solution_csv(std::ostream& out, const GridSolution& grid, const std::string& hash) {
  const Eigen::Index n = grid.solutions.empty() ? 0 : grid.solutions.front().m.size();
  out << "tau,eta";
  for (Eigen::Index i = 0; i < n; ++i) out << ",re_m_" << i << ",im_m_" << i;
  out << ",residual,converged,model_hash\n";
  for (std::size_t k = 0; k < grid.tau_grid.size(); ++k) {
    const Solution& s = grid.solutions[k];
    out << format_double(grid.tau_grid[k]) << ',' << format_double(grid.eta);
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_double(s.m[i].real()) << ',' << format_double(s.m[i].imag());
    out << ',' << format_double(s.residual) << ',' << (grid.converged[k] ? 1 : 0) << ',' << hash << '\n';
  }
}

json grid_to_json(const GridSolution& grid, bool with_m) {
  json points = json::array();
  for (std::size_t k = 0; k < grid.tau_grid.size(); ++k) {
    const Solution& s = grid.solutions[k];
    json p{{"tau", grid.tau_grid[k]},
           {"eta", grid.eta},
           {"avg_density", grid.avg_density[k]},
           {"residual", s.residual},
           {"converged", static_cast<bool>(grid.converged[k])}};
    if (with_m) p["m"] = vec_to_json(s.m);
    else p["v"] = vec_to_json(RVec(s.m.imag()));
    points.push_back(std::move(p));
  }
  return json{{"eta", grid.eta}, {"points", points}};
}

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp);
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot rename " + tmp + " to " + path + ": " + ec.message());
}

json RunManifest::to_json() const {
  json j{{"command", command}, {"model_hash", model_hash}, {"config", config}, {"version", version},
         {"outputs", outputs}};
  j["seed"] = seed ? json(*seed) : json(nullptr);
  return j;
}

}  // namespace qvelab
