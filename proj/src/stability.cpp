#include "qvelab/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qvelab {

namespace {

CVec perturbed_residual(const ModelSpec& model, Complex z, const CVec& d, const CVec& g, CVec& inv_w) {
  CVec w = model.apply(g) + d;
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] += z + model.a()[i];
  inv_w = w.array().inverse().matrix();
  return g + inv_w;
}

double sup(const CVec& w) { return w.size() ? w.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

double perturbation_gate(const ModelSpec& model, const Solution& base, const SpectralData& spectral) {
  const double phi = sup(base.m);
  const double psi = std::max(1.0, spectral.binv_norm_bb);
  const double eps = 1.0 / (3.0 * sigma_bound(model) + 9.0 * norm_S_BB(model) * phi * psi);
  return eps / (8.0 * phi * phi * psi);
}

PerturbationResult solve_perturbed(const ModelSpec& model, const Solution& base, const SpectralData& spectral,
                                   const CVec& d, const PerturbationOptions& options) {
  const Eigen::Index n = model.n();
  if (d.size() != n) throw Error(ErrorCode::InvalidArgument, "perturbation has wrong length");
  if (!d.allFinite()) throw Error(ErrorCode::InvalidArgument, "perturbation has non-finite entries");
  PerturbationResult out;
  out.z = base.z;
  out.d = d;
  out.m = base.m;
  out.gate = perturbation_gate(model, base, spectral);
  if (options.enforce_gate && sup(d) > out.gate)
    throw Error(ErrorCode::PerturbationTooLarge,
                "||d|| = " + std::to_string(sup(d)) + " exceeds the gate " + std::to_string(out.gate));

  const CMat kernel = model.kernel().cast<Complex>();
  CVec g = base.m;
  CVec inv_w;
  CVec r = perturbed_residual(model, base.z, d, g, inv_w);
  double res = sup(r);
  // m itself is only accurate to its own residual; do not move it when d = 0
  const double target = std::max(options.tol, base.residual);
  int it = 0;
  for (; it < options.max_iter && res > target; ++it) {
    const CVec inv_w2 = inv_w.array().square().matrix();
    CMat jac = -(inv_w2.asDiagonal() * kernel);
    jac.diagonal().array() += 1.0;
    Eigen::PartialPivLU<CMat> lu(jac);
    if (!(lu.rcond() > 1e-15)) throw Error(ErrorCode::Diverged, "perturbed Jacobian is singular");
    const CVec step = lu.solve(-r);
    double t = 1.0;
    bool accepted = false;
    for (int half = 0; half < 40; ++half, t *= 0.5) {
      CVec trial = g + t * step;
      CVec trial_inv;
      CVec trial_r = perturbed_residual(model, base.z, d, trial, trial_inv);
      const double trial_res = sup(trial_r);
      if (std::isfinite(trial_res) && trial_res < res) {
        g = std::move(trial);
        r = std::move(trial_r);
        inv_w = std::move(trial_inv);
        res = trial_res;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (!(res <= std::max(options.tol, 1e3 * std::numeric_limits<double>::epsilon() * (1.0 + sup(g)))))
    throw Error(ErrorCode::Diverged, "perturbed QVE did not converge, residual " + std::to_string(res));
  out.g = g;
  out.residual = res;
  out.distance = sup(g - base.m);

  const RVec& abs_m = spectral.abs_m;
  out.u = (g - base.m).cwiseQuotient(abs_m.cast<Complex>());
  const RVec& pi = model.weights();
  if (spectral.has_bad_direction) {
    const CVec& b = spectral.b;
    Complex bu = 0.0, bb = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      bu += b[i] * out.u[i] * pi[i];
      bb += b[i] * b[i] * pi[i];
    }
    out.theta = bu / bb;
    out.r = out.u - out.theta * b;
    out.r_norm = sup(out.r);
    out.reconstruction_error = sup(out.u - out.theta * b - out.r);
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.theta = Complex(nan, nan);
  }

  const double dn = sup(d);
  if (dn > 0.0) {
    const double phi = sup(base.m);
    const double psi = std::max(1.0, spectral.binv_norm_bb);
    out.bound_ratios["lipschitz"] = out.distance / (8.0 * psi * phi * phi / norm_S_BB(model) * dn);
    const double avg_v = spectral.avg_v;
    if (avg_v > 0.0) out.bound_ratios["rough"] = out.distance * avg_v * avg_v / dn;
  }
  return out;
}

PerturbationResult solve_perturbed(const ModelSpec& model, Complex z, const CVec& d,
                                   const PerturbationOptions& options) {
  const Solution base = solve_continuation(model, z, options.solver);
  const SpectralData spectral = analyze(model, base);
  return solve_perturbed(model, base, spectral, d, options);
}

CubicCheck cubic_check(const PerturbationResult& result, const SpectralData& spectral, const ModelSpec& model,
                       double constant, double eps_star) {
  if (spectral.avg_v > eps_star)
    throw Error(ErrorCode::NotSmallAlpha, "<v> = " + std::to_string(spectral.avg_v) + " exceeds eps_star");
  if (!spectral.has_bad_direction) throw Error(ErrorCode::NotIsolated, "cubic check needs the bad direction");
  const Complex th = result.theta;
  const auto& mu = spectral.mu;
  Complex source = 0.0;
  for (Eigen::Index i = 0; i < model.n(); ++i)
    source += spectral.abs_m[i] * spectral.b[i] * result.d[i] * model.weights()[i];
  CubicCheck out;
  out.constant = constant;
  out.residual = std::abs(mu[2] * th * th * th + mu[1] * th * th + mu[0] * th + source);
  const double dn = sup(result.d);
  const double at = std::abs(th);
  out.scale = at * at * at * at + dn * dn + at * dn;
  out.pass = out.residual <= constant * out.scale;
  return out;
}

StabilityParams stability_params(const ModelSpec& model, const SupportProfile& profile, const Solution& base,
                                 const SpectralData& spectral, const CVec& d, double eta_real,
                                 const SolverConfig& config) {
  StabilityParams out;
  const Complex z = base.z;
  const double tau = z.real();
  const double eta = z.imag();
  double dist = std::numeric_limits<double>::infinity();
  for (const Interval& iv : profile.intervals) {
    const double dx = tau < iv.lo ? iv.lo - tau : (tau > iv.hi ? tau - iv.hi : 0.0);
    dist = std::min(dist, std::hypot(dx, eta));
  }
  out.varpi = dist;
  const Solution real_axis = solve_continuation(model, Complex(tau, eta_real), config);
  out.rho = model.average(RVec(real_axis.m.imag()));

  const Eigen::Index n = model.n();
  const RVec& pi = model.weights();
  if (d.size() != n) throw Error(ErrorCode::InvalidArgument, "perturbation has wrong length");
  const double dn = sup(d);
  out.delta = dn * dn;
  if (spectral.has_bad_direction && dn > 0.0) {
    const StabilityOperator op(model, base, spectral);
    const CVec& b = spectral.b;
    Complex t1 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) t1 += spectral.abs_m[i] * b[i] * d[i] * pi[i];
    const CVec rd = op.apply_R(d);
    const CVec a_brd = op.bilinear(b, rd);
    Complex t2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      t2 += (2.0 * b[i] * a_brd[i] + b[i] * b[i] * spectral.abs_m[i] * std::conj(spectral.phase[i]) * d[i]) * pi[i];
    out.t1_d = t1;
    out.t2_d = t2;
    out.delta += std::abs(t1) + std::abs(t2);
  }

  double ups = std::cbrt(out.delta);
  if (out.rho > 0.0) ups = std::min(ups, out.delta / (out.rho * out.rho));
  if (out.varpi > 0.0 && std::isfinite(out.varpi)) ups = std::min(ups, out.delta / std::pow(out.varpi, 2.0 / 3.0));
  out.upsilon = ups;
  return out;
}

HolderReport holder_check(const GridSolution& grid) {
  HolderReport out;
  const std::size_t count = grid.tau_grid.size();
  for (std::size_t k = 1; k < count; ++k) {
    if (!grid.converged[k] || !grid.converged[k - 1]) {
      out.ratios.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double step = std::abs(grid.solutions[k].z - grid.solutions[k - 1].z);
    const double ratio = sup(grid.solutions[k].m - grid.solutions[k - 1].m) / std::cbrt(step);
    out.ratios.push_back(ratio);
    if (ratio > out.worst_ratio) {
      out.worst_ratio = ratio;
      out.argmax_tau = 0.5 * (grid.tau_grid[k] + grid.tau_grid[k - 1]);
    }
  }
  return out;
}

}  // namespace qvelab
