#include "qvelab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

namespace qvelab {

namespace {

CVec phi_map(const ModelSpec& model, Complex z, const CVec& m) {
  CVec denom = model.apply(m);
  for (Eigen::Index i = 0; i < denom.size(); ++i) denom[i] += z + model.a()[i];
  return (-denom.array().inverse()).matrix();
}

double hyperbolic_distance(Complex a, Complex b) {
  return std::norm(a - b) / (a.imag() * b.imag());
}

bool upper_half_plane(const CVec& m, double slack = 0.0) {
  return (m.imag().array() > -slack).all();
}

}  // namespace

double qve_residual(const ModelSpec& model, Complex z, const CVec& m) {
  return (m - phi_map(model, z, m)).cwiseAbs().maxCoeff();
}

Solution solve_fixed_point(const ModelSpec& model, Complex z, const std::optional<CVec>& init,
                           const SolverConfig& config, ContractionTrace* trace) {
  if (!(z.imag() > 0.0)) throw Error(ErrorCode::InvalidArgument, "fixed-point iteration needs Im z > 0");
  CVec m = init ? *init : CVec::Constant(model.n(), Complex(0.0, 1.0));
  if (m.size() != model.n()) throw Error(ErrorCode::InvalidArgument, "initial guess has wrong length");
  if (!(m.imag().array() > 0.0).all())
    throw Error(ErrorCode::InvalidArgument, "initial guess must lie in the upper half-plane");

  if (trace) {
    const double eta0 = std::min(z.imag(), 1.0 / std::abs(z));
    const double s = norm_S_BB(model);
    trace->guaranteed_rate = s > 0.0 ? std::pow(1.0 + eta0 * eta0 / s, -2.0) : 0.0;
    trace->hyperbolic_steps.clear();
    trace->sup_steps.clear();
  }

  for (long it = 0; it < config.max_iter; ++it) {
    CVec next = phi_map(model, z, m);
    const double step = (next - m).cwiseAbs().maxCoeff();
    if (trace) {
      double hyp = 0.0;
      for (Eigen::Index i = 0; i < m.size(); ++i) hyp = std::max(hyp, hyperbolic_distance(next[i], m[i]));
      trace->hyperbolic_steps.push_back(hyp);
      trace->sup_steps.push_back(step);
    }
    m = std::move(next);
    if (step <= config.tol) {
      Solution sol{z, m, qve_residual(model, z, m), static_cast<int>(it + 1)};
      if (sol.residual <= config.tol) return sol;
    }
  }
  throw Error(ErrorCode::MaxIterExceeded,
              "fixed-point iteration did not converge at z = (" + std::to_string(z.real()) + ", " +
                  std::to_string(z.imag()) + ")");
}

Solution solve_newton(const ModelSpec& model, Complex z, const CVec& init, const SolverConfig& config) {
  if (z.imag() < 0.0) throw Error(ErrorCode::InvalidArgument, "Newton solve needs Im z >= 0");
  if (init.size() != model.n()) throw Error(ErrorCode::InvalidArgument, "initial guess has wrong length");
  if (!upper_half_plane(init))
    throw Error(ErrorCode::Diverged, "initial guess has a component with negative imaginary part");

  const Eigen::Index n = model.n();
  const bool open_half_plane = z.imag() > 0.0;
  CVec m = init;

  auto evaluate = [&](const CVec& x, CVec& inv_w) {
    CVec w = model.apply(x);
    for (Eigen::Index i = 0; i < n; ++i) w[i] += z + model.a()[i];
    inv_w = w.array().inverse().matrix();
    return CVec(x + inv_w);
  };

  CVec inv_w;
  CVec r = evaluate(m, inv_w);
  double res = r.cwiseAbs().maxCoeff();
  const CMat kernel = model.kernel().cast<Complex>();

  for (int it = 0; it < 200; ++it) {
    if (!std::isfinite(res)) break;
    if (res <= config.tol) {
      if (!open_half_plane && !upper_half_plane(m, 1e3 * config.tol))
        throw Error(ErrorCode::Diverged, "real-axis iterate left the closed upper half-plane");
      if (!open_half_plane) m.imag() = m.imag().cwiseMax(0.0);
      return Solution{z, m, res, it};
    }
    const CVec inv_w2 = inv_w.array().square().matrix();
    CMat jac = -(inv_w2.asDiagonal() * kernel);
    jac.diagonal().array() += 1.0;
    Eigen::PartialPivLU<CMat> lu(jac);
    if (!(lu.rcond() > 1e-15))
      throw Error(ErrorCode::SingularJacobian, "Newton Jacobian is numerically singular");
    const CVec dm = lu.solve(-r);

    double t = 1.0;
    bool accepted = false;
    for (int half = 0; half < 40; ++half, t *= 0.5) {
      CVec trial = m + t * dm;
      if (open_half_plane && !(trial.imag().array() > 0.0).all()) continue;
      CVec trial_inv;
      CVec trial_r = evaluate(trial, trial_inv);
      const double trial_res = trial_r.cwiseAbs().maxCoeff();
      if (std::isfinite(trial_res) && trial_res < res) {
        m = std::move(trial);
        r = std::move(trial_r);
        inv_w = std::move(trial_inv);
        res = trial_res;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (res <= 1e3 * config.tol) {
        // Rounding floor slightly above tol: accept what double precision allows.
        return Solution{z, m, res, it};
      }
      throw Error(ErrorCode::Diverged, "Newton line search failed, residual " + std::to_string(res));
    }
  }
  throw Error(ErrorCode::Diverged, "Newton did not converge, residual " + std::to_string(res));
}

namespace {

// Newton from m at height `from` to height `to`, bisecting the eta step
// geometrically when the warm start is outside the basin.
CVec continue_to(const ModelSpec& model, double tau, double from, double to, const CVec& m,
                 const SolverConfig& config, int depth, int& iterations) {
  try {
    Solution s = config.newton ? solve_newton(model, Complex(tau, to), m, config)
                               : solve_fixed_point(model, Complex(tau, to), m, config);
    iterations += s.iterations;
    return s.m;
  } catch (const Error& e) {
    if (depth >= 30 || e.code() == ErrorCode::InvalidArgument) throw;
  }
  const double mid = std::sqrt(from * to);
  CVec half = continue_to(model, tau, from, mid, m, config, depth + 1, iterations);
  return continue_to(model, tau, mid, to, half, config, depth + 1, iterations);
}

}  // namespace

Solution solve_continuation(const ModelSpec& model, Complex z, const SolverConfig& config) {
  const double target = z.imag();
  if (!(target > 0.0)) throw Error(ErrorCode::InvalidArgument, "continuation needs Im z > 0");
  const double tau = z.real();
  double eta = std::max(1.0, target);
  Solution start = solve_fixed_point(model, Complex(tau, eta), std::nullopt, config);
  CVec m = start.m;
  int iterations = start.iterations;
  const double factor = config.continuation_factor;
  if (!(factor > 0.0 && factor < 1.0))
    throw Error(ErrorCode::InvalidArgument, "continuation factor must lie in (0, 1)");
  while (eta > target) {
    const double next = std::max(eta * factor, target);
    m = continue_to(model, tau, eta, next, m, config, 0, iterations);
    eta = next;
  }
  return Solution{z, m, qve_residual(model, z, m), iterations};
}

bool GridSolution::all_converged() const {
  return std::all_of(converged.begin(), converged.end(), [](bool c) { return c; });
}

GridSolution solve_grid(const ModelSpec& model, const std::vector<double>& tau_grid, double eta_target,
                        const SolverConfig& config) {
  if (!(eta_target >= config.eta_floor))
    throw Error(ErrorCode::InvalidArgument, "eta below the configured floor");
  GridSolution grid;
  grid.tau_grid = tau_grid;
  grid.eta = eta_target;
  const std::size_t count = tau_grid.size();
  grid.solutions.resize(count);
  grid.avg_density.assign(count, 0.0);
  grid.converged.assign(count, false);

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const Complex z(tau_grid[k], eta_target);
      try {
        Solution s = solve_continuation(model, z, config);
        grid.avg_density[k] = model.average(RVec(s.m.imag())) / kPi;
        grid.converged[k] = s.residual <= 1e3 * config.tol;
        grid.solutions[k] = std::move(s);
      } catch (const Error&) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        grid.solutions[k] = Solution{z, CVec::Constant(model.n(), Complex(nan, nan)),
                                     std::numeric_limits<double>::infinity(), 0};
        grid.avg_density[k] = nan;
        grid.converged[k] = false;
      }
    }
  };

  const int threads = std::max(1, config.threads);
  if (threads == 1 || count < 2) {
    work(0, count);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (count + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(count, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  return grid;
}

std::vector<double> make_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw Error(ErrorCode::InvalidArgument, "grid needs lo <= hi and step > 0");
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 0.5));
  std::vector<double> grid;
  grid.reserve(count + 1);
  for (long k = 0; k <= count; ++k) grid.push_back(lo + static_cast<double>(k) * step);
  return grid;
}

double grid_mass(const GridSolution& grid) {
  double mass = 0.0;
  for (std::size_t k = 1; k < grid.tau_grid.size(); ++k) {
    const double h = grid.tau_grid[k] - grid.tau_grid[k - 1];
    mass += 0.5 * h * (grid.avg_density[k] + grid.avg_density[k - 1]);
  }
  return mass;
}

StructuralBoundsReport check_structural_bounds(const Solution& solution, const ModelSpec& model,
                                               const SolverConfig& config) {
  StructuralBoundsReport report;
  const Complex z = solution.z;
  const double eta = z.imag();
  if (eta > 0.0) report.trivial_bound = solution.m.cwiseAbs().maxCoeff() <= (1.0 + 1e-12) / eta;
  report.l2_norm = model.norm2(solution.m);
  if (model.is_zero_a()) report.l2_bound = report.l2_norm <= 2.0 / std::abs(z) * (1.0 + 1e-12);

  const double sigma = sigma_bound(model);
  const double dist = std::abs(z.real()) - sigma;
  if (dist > 0.0 && eta > 0.0) {
    // <v> is the Poisson smoothing of a measure of mass pi supported in [-Sigma, Sigma].
    const double avg_v = model.average(RVec(solution.m.imag()));
    report.support_bound = avg_v <= kPi * eta / (dist * dist) * (1.0 + 1e-6) + 1e3 * config.tol;
  }

  if (model.is_zero_a() && eta > 0.0) {
    const Solution mirror = solve_continuation(model, Complex(-z.real(), eta), config);
    report.symmetry_error = (mirror.m + solution.m.conjugate()).cwiseAbs().maxCoeff();
    report.symmetry = report.symmetry_error <= 1e-9;
  }
  return report;
}

}  // namespace qvelab
