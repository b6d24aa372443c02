#include "qvelab/cli.hpp"

#include "qvelab/io.hpp"
#include "qvelab/rmt.hpp"
#include "qvelab/scaling.hpp"
#include "qvelab/shape.hpp"
#include "qvelab/spectral.hpp"
#include "qvelab/stability.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>

namespace qvelab {

using nlohmann::json;

namespace {

struct Options {
  std::string model_file;
  int semicircle = 0;
  std::vector<double> two_block_args;
  std::string grid;
  double eta = 1e-6;
  double tol = 1e-12;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out;
  std::string format = "json";
  double tau = 0.0;
  // shape
  double threshold = -1.0;
  bool fit = false;
  // stability
  int count = 10;
  double scale = 0.5;
  // rmt
  int N = 1000;
  std::string symmetry = "real";
  std::string eigs_out;
};

struct Failure {
  int code;
  std::string message;
};

int threads_of(const Options& o) {
  if (o.threads > 0) return o.threads;
  if (const char* env = std::getenv("QVELAB_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  return 1;
}

ModelSpec model_of(const Options& o, json& echo) {
  const int sources = (!o.model_file.empty()) + (o.semicircle > 0) + (!o.two_block_args.empty());
  if (sources != 1)
    throw Error(ErrorCode::InvalidArgument, "give exactly one of --model, --semicircle, --two-block");
  if (!o.model_file.empty()) {
    echo["model"] = o.model_file;
    return load_model(o.model_file);
  }
  if (o.semicircle > 0) {
    echo["semicircle"] = o.semicircle;
    return semicircle_model(o.semicircle);
  }
  const double n = o.two_block_args[2];
  if (n != std::floor(n) || n < 2) throw Error(ErrorCode::InvalidArgument, "--two-block needs an integer n >= 2");
  echo["two_block"] = o.two_block_args;
  return two_block(o.two_block_args[0], o.two_block_args[1], static_cast<int>(n));
}

std::vector<double> grid_of(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad grid '" + spec + "', expected a:b:step");
    }
  }
  if (parts.size() != 3) throw Error(ErrorCode::InvalidArgument, "bad grid '" + spec + "', expected a:b:step");
  return make_grid(parts[0], parts[1], parts[2]);
}

SolverConfig config_of(const Options& o, double eta) {
  SolverConfig c;
  c.tol = o.tol;
  c.threads = threads_of(o);
  c.eta_floor = std::min(c.eta_floor, eta);
  return c;
}

json spectral_json(const SpectralData& s) {
  json j{{"z", complex_to_json(s.z)},      {"lambda", s.lambda},   {"gap", s.gap},
         {"alpha", s.alpha},                {"f_abs_m", s.f_abs_m}, {"avg_v", s.avg_v},
         {"sigma", s.sigma},                {"psi", s.psi},         {"f", vec_to_json(s.f)},
         {"has_bad_direction", s.has_bad_direction},
         {"binv_norm_bb", s.binv_norm_bb}, {"binv_norm_l2", s.binv_norm_l2},
         {"small_alpha", s.small_alpha}};
  if (s.has_bad_direction) {
    j["beta"] = complex_to_json(s.beta);
    j["b"] = vec_to_json(s.b);
    json mu = json::array(), mue = json::array();
    for (int k = 0; k < 3; ++k) {
      mu.push_back(complex_to_json(s.mu[k]));
      mue.push_back(complex_to_json(s.mu_expanded[k]));
    }
    j["mu"] = mu;
    j["mu_expanded"] = mue;
  }
  return j;
}

json profile_json(const SupportProfile& p, const std::vector<SingularPoint>& points) {
  json iv = json::array(), gaps = json::array(), mins = json::array(), sp = json::array();
  for (const auto& i : p.intervals) iv.push_back({i.lo, i.hi});
  for (const auto& g : p.gaps) gaps.push_back(json{{"left", g.left}, {"right", g.right}, {"delta", g.delta()}});
  for (const auto& m : p.minima) mins.push_back(json{{"tau", m.tau}, {"avg_v", m.value}});
  for (const auto& s : points) sp.push_back(json{{"kind", std::string(to_string(s.kind))}, {"tau", s.tau}, {"avg_v", s.value}});
  return json{{"intervals", iv}, {"gaps", gaps}, {"minima", mins}, {"singular_points", sp},
              {"threshold", p.threshold}, {"eta", p.eta}};
}

struct Output {
  std::string text;
  int code = 0;
  std::optional<std::uint64_t> seed;
  std::vector<std::pair<std::string, std::string>> extra_files;
};

Output cmd_density(const Options& o, const ModelSpec& model, bool with_m) {
  Output r;
  const std::string hash = model_hash(model);
  if (o.grid.empty()) {
    if (with_m) {
      const Solution s = solve_continuation(model, Complex(o.tau, o.eta), config_of(o, o.eta));
      r.text = json{{"z", complex_to_json(s.z)}, {"m", vec_to_json(s.m)}, {"residual", s.residual},
                    {"iterations", s.iterations}, {"model_hash", hash}}.dump(2) + "\n";
      return r;
    }
    throw Error(ErrorCode::InvalidArgument, "density needs --grid");
  }
  const GridSolution grid = solve_grid(model, grid_of(o.grid), o.eta, config_of(o, o.eta));
  if (o.format == "csv") {
    std::ostringstream ss;
    if (with_m) write_solution_csv(ss, grid, hash);
    else write_density_csv(ss, grid, hash);
    r.text = ss.str();
  } else {
    json j = grid_to_json(grid, with_m);
    j["model_hash"] = hash;
    j["mass"] = grid_mass(grid);
    r.text = j.dump(2) + "\n";
  }
  if (!grid.all_converged()) r.code = 3;
  return r;
}

Output cmd_shape(const Options& o, const ModelSpec& model) {
  if (o.grid.empty()) throw Error(ErrorCode::InvalidArgument, "shape needs --grid");
  const SolverConfig cfg = config_of(o, o.eta);
  const GridSolution grid = solve_grid(model, grid_of(o.grid), o.eta, cfg);
  SupportOptions so;
  if (o.threshold > 0.0) so.threshold = o.threshold;
  const SupportProfile coarse = detect_support(grid, so);
  RefineOptions ro;
  ro.solver = cfg;
  const SupportProfile profile = refine_support(model, grid, coarse, ro);
  const auto points = classify(profile);
  json j = profile_json(profile, points);
  j["model_hash"] = model_hash(model);
  j["unconverged_points"] = static_cast<long>(std::count(grid.converged.begin(), grid.converged.end(), false));
  if (o.fit) {
    json fits = json::array();
    for (const auto& p : points) {
      json f{{"kind", std::string(to_string(p.kind))}, {"tau", p.tau}};
      try {
        FitOptions fo;
        fo.eta = o.eta;
        fo.solver = cfg;
        for (std::size_t k = 0; k < profile.intervals.size(); ++k) {
          const Interval& iv = profile.intervals[k];
          if (p.tau < iv.lo - 1e-12 || p.tau > iv.hi + 1e-12) continue;
          fo.interval_length = iv.length();
          if (p.kind == ShapeKind::Edge) {
            const bool left = std::abs(p.tau - iv.lo) <= std::abs(p.tau - iv.hi);
            fo.side = left ? 1 : -1;
            if (left && k > 0) fo.scale_hint = iv.lo - profile.intervals[k - 1].hi;
            if (!left && k + 1 < profile.intervals.size()) fo.scale_hint = profile.intervals[k + 1].lo - iv.hi;
          }
        }
        if (p.kind == ShapeKind::NonzeroMin) fo.scale_hint = p.value;
        const ShapeFit fit = fit_shape(model, p.tau, p.kind, fo);
        f["h"] = vec_to_json(fit.h);
        f["scale"] = fit.scale;
        f["residual"] = fit.residual;
        f["exponent"] = fit.exponent;
        f["omega_min"] = fit.omega_min;
        f["omega_max"] = fit.omega_max;
      } catch (const Error& e) {
        f["error"] = e.what();
      }
      fits.push_back(std::move(f));
    }
    j["fits"] = fits;
  }
  Output r;
  r.text = j.dump(2) + "\n";
  if (!grid.all_converged()) r.code = 3;
  return r;
}

CVec random_perturbation(const CounterRng& rng, std::uint64_t index, Eigen::Index n, double size) {
  CVec d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::uint64_t k = index * static_cast<std::uint64_t>(n) + i;
    d[i] = Complex(rng.normal(2 * k), rng.normal(2 * k + 1));
  }
  return d * (size / d.cwiseAbs().maxCoeff());
}

Output cmd_stability(const Options& o, const ModelSpec& model) {
  const SolverConfig cfg = config_of(o, o.eta);
  const Solution base = solve_continuation(model, Complex(o.tau, o.eta), cfg);
  const SpectralData spectral = analyze(model, base);
  const double gate = perturbation_gate(model, base, spectral);
  const CounterRng rng(o.seed, 7);
  json runs = json::array();
  Output r;
  r.seed = o.seed;
  for (int k = 0; k < o.count; ++k) {
    const CVec d = random_perturbation(rng, k, model.n(), o.scale * gate);
    json run{{"index", k}, {"d_norm", d.cwiseAbs().maxCoeff()}};
    try {
      PerturbationOptions po;
      po.solver = cfg;
      const PerturbationResult p = solve_perturbed(model, base, spectral, d, po);
      run["distance"] = p.distance;
      run["residual"] = p.residual;
      run["bound_ratios"] = p.bound_ratios;
      if (spectral.has_bad_direction) {
        run["theta"] = complex_to_json(p.theta);
        run["r_norm"] = p.r_norm;
        if (spectral.small_alpha) {
          const CubicCheck c = cubic_check(p, spectral, model);
          run["cubic"] = json{{"residual", c.residual}, {"scale", c.scale}, {"pass", c.pass}};
        }
      }
    } catch (const Error& e) {
      run["error"] = e.what();
      r.code = 3;
    }
    runs.push_back(std::move(run));
  }
  json j{{"z", complex_to_json(base.z)}, {"gate", gate}, {"avg_v", spectral.avg_v},
         {"seed", o.seed},              {"runs", runs}, {"model_hash", model_hash(model)}};
  r.text = j.dump(2) + "\n";
  return r;
}

Output cmd_scale(const Options& o, const ModelSpec& model, double eta) {
  ScalingOptions so;
  so.tol = std::max(o.tol, 1e-14);
  json j{{"eta", eta}, {"model_hash", model_hash(model)}};
  Output r;
  try {
    const ScalingResult s = scale_symmetric(model, eta, so);
    j["status"] = std::string(to_string(s.status));
    j["residual"] = s.residual;
    j["iterations"] = s.iterations;
    j["max_norm"] = s.max_norm;
    j["v"] = s.v ? vec_to_json(*s.v) : json(nullptr);
    j["j_value"] = s.j_value ? json(*s.j_value) : json(nullptr);
  } catch (const Error& e) {
    if (e.is_validation()) throw;
    j["status"] = "diverged";
    j["error"] = e.what();
    r.code = 3;
  }
  if (model.n() <= 12) j["pattern_diagnosis"] = std::string(to_string(diagnose_scalability(pattern_of(model.S()))));
  r.text = j.dump(2) + "\n";
  return r;
}

Output cmd_rmt(const Options& o, const ModelSpec& model, bool eta_given) {
  if (o.N < 1) throw Error(ErrorCode::InvalidArgument, "--N must be positive");
  if (o.symmetry != "real" && o.symmetry != "complex")
    throw Error(ErrorCode::InvalidArgument, "--symmetry is real or complex");
  const EnsembleSpec spec{o.N, o.symmetry == "real" ? Symmetry::RealSymmetric : Symmetry::ComplexHermitian, o.seed};
  const Ensemble ens = Ensemble::build(model, spec);
  const CMat H = sample(ens);
  const std::vector<double> eigs = eigenvalues(H);

  const double sigma = sigma_bound(model);
  const std::vector<double> tau = o.grid.empty() ? make_grid(-sigma - 0.5, sigma + 0.5, 0.01) : grid_of(o.grid);
  const double grid_eta = 1e-6;
  SolverConfig cfg = config_of(o, grid_eta);
  const GridSolution grid = solve_grid(model, tau, grid_eta, cfg);
  const KolmogorovResult ks = kolmogorov_distance(eigs, grid);

  const double eta = eta_given ? o.eta : std::pow(static_cast<double>(o.N), -0.4);
  const Complex z(o.tau, eta);
  const Solution sol = solve_continuation(model, z, config_of(o, eta));
  const LocalLawReport ll = locallaw_residuals(H, ens, sol.m, z);

  json j{{"N", o.N},
         {"symmetry", std::string(to_string(spec.symmetry))},
         {"seed", o.seed},
         {"model_hash", model_hash(model)},
         {"kolmogorov", json{{"distance", ks.distance}, {"at", ks.at}, {"mass", ks.mass}}},
         {"local_law", json{{"z", complex_to_json(z)},
                            {"max_diag_dev", ll.max_diag_dev},
                            {"max_offdiag", ll.max_offdiag},
                            {"avg_dev", ll.avg_dev},
                            {"predicted_scale", ll.predicted_scale},
                            {"d_norm", ll.d_norm},
                            {"d_avg", ll.d_avg},
                            {"resolvent_error", ll.resolvent_error}}}};
  Output r;
  r.seed = o.seed;
  r.text = j.dump(2) + "\n";
  if (!o.eigs_out.empty()) {
    std::ostringstream ss;
    ss << "index,eigenvalue,seed\n";
    for (std::size_t k = 0; k < eigs.size(); ++k) ss << k << ',' << format_double(eigs[k]) << ',' << o.seed << '\n';
    r.extra_files.emplace_back(o.eigs_out, ss.str());
  }
  if (!grid.all_converged()) r.code = 3;
  return r;
}

Output cmd_report(const Options& o, const ModelSpec& model) {
  const StructuralReport s = structural_report(model);
  json j{{"model_hash", model_hash(model)},
         {"n", model.n()},
         {"sigma_bound", s.sigma_bound},
         {"norm_S_BB", s.norm_S_BB},
         {"norm_S_L2_to_B", s.norm_S_L2_to_B},
         {"fully_indecomposable", s.fid.fully_indecomposable}};
  j["primitivity"] = s.primitivity ? json{{"L", s.primitivity->L}, {"rho", s.primitivity->rho}} : json(nullptr);
  Output r;
  const SolverConfig cfg = config_of(o, o.eta);
  try {
    const Solution sol = solve_continuation(model, Complex(o.tau, o.eta), cfg);
    j["solution"] = json{{"z", complex_to_json(sol.z)}, {"m", vec_to_json(sol.m)}, {"residual", sol.residual}};
    const SpectralData sd = analyze(model, sol);
    j["spectral"] = spectral_json(sd);
    j["f_identity_residual"] = verify_F_identity(sd, sol);
  } catch (const Error& e) {
    if (e.is_validation()) throw;
    j["error"] = e.what();
    r.code = 3;
  }
  r.text = j.dump(2) + "\n";
  return r;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quadratic vector equation toolkit"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--model", o.model_file, "Model JSON file");
    sub->add_option("--semicircle", o.semicircle, "Builtin a = 0, S = ones on N points")->check(CLI::PositiveNumber);
    sub->add_option("--two-block", o.two_block_args, "Builtin two-block model: lambda delta n")->expected(3);
    sub->add_option("--grid", o.grid, "Grid a:b:step, endpoints inclusive");
    sub->add_option("--eta", o.eta, "Imaginary part of the spectral parameter");
    sub->add_option("--tol", o.tol, "Solver tolerance");
    sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("--threads", o.threads, "Worker threads (env QVELAB_THREADS)");
    sub->add_option("-o,--out", o.out, "Output file (stdout when absent)");
    sub->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--tau", o.tau, "Real part of the spectral parameter");
  };
  auto* solve = app.add_subcommand("solve", "m(z) at --tau + i --eta, or on --grid");
  auto* density = app.add_subcommand("density", "Density of states on a grid");
  auto* shape = app.add_subcommand("shape", "Support, gaps, minima and singularity classification");
  auto* stability = app.add_subcommand("stability", "Random perturbations of the QVE at one point");
  auto* scale = app.add_subcommand("scale", "Symmetric scaling v (eta + S v) = 1");
  auto* rmt = app.add_subcommand("rmt", "Wigner-type sampling, Kolmogorov distance and local law");
  auto* report = app.add_subcommand("report", "Structural constants and spectral data");
  for (auto* sub : {solve, density, shape, stability, scale, rmt, report}) add_common(sub);
  shape->add_option("--threshold", o.threshold, "Support threshold on the density");
  shape->add_flag("--fit", o.fit, "Fit the universal shapes at every singular point");
  stability->add_option("--count", o.count, "Number of perturbations")->check(CLI::PositiveNumber);
  stability->add_option("--scale", o.scale, "Perturbation size as a fraction of the gate");
  rmt->add_option("--N", o.N, "Matrix size");
  rmt->add_option("--symmetry", o.symmetry, "real or complex");
  rmt->add_option("--eigs", o.eigs_out, "CSV eigenvalue dump");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  CLI::App* active = app.get_subcommands().front();
  const std::string command = active->get_name();
  try {
    json echo{{"eta", o.eta}, {"tol", o.tol}, {"threads", threads_of(o)}, {"format", o.format}, {"tau", o.tau}};
    if (!o.grid.empty()) echo["grid"] = o.grid;
    const ModelSpec model = model_of(o, echo);
    const bool eta_given = active->count("--eta") > 0;
    Output result;
    if (command == "solve") result = cmd_density(o, model, true);
    else if (command == "density") result = cmd_density(o, model, false);
    else if (command == "shape") result = cmd_shape(o, model);
    else if (command == "stability") result = cmd_stability(o, model);
    else if (command == "scale") result = cmd_scale(o, model, eta_given ? o.eta : 0.0);
    else if (command == "rmt") result = cmd_rmt(o, model, eta_given);
    else result = cmd_report(o, model);

    if (o.out.empty()) {
      out << result.text;
    } else {
      write_atomic(o.out, result.text);
      RunManifest manifest;
      manifest.command = command;
      manifest.model_hash = model_hash(model);
      echo["args"] = args;
      manifest.config = echo;
      manifest.seed = result.seed;
      manifest.outputs.push_back(o.out);
      for (const auto& [path, content] : result.extra_files) {
        write_atomic(path, content);
        manifest.outputs.push_back(path);
      }
      write_atomic(o.out + ".manifest.json", manifest.to_json().dump(2) + "\n");
    }
    if (o.out.empty())
      for (const auto& [path, content] : result.extra_files) write_atomic(path, content);
    if (result.code != 0) err << "warning: numeric failure at some points, see the output mask\n";
    return result.code;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.is_validation() ? 2 : 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace qvelab
