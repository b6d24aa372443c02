#include "qvelab/shape.hpp"

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

namespace qvelab {

namespace {

const double kSqrt3 = std::sqrt(3.0);

// Principal complex cube root.
Complex cbrt_principal(Complex w) {
  if (w == Complex(0.0, 0.0)) return w;
  return std::polar(std::cbrt(std::abs(w)), std::arg(w) / 3.0);
}

}  // namespace

double psi_edge(double lambda) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "psi_edge needs lambda >= 0");
  const double root = std::sqrt((1.0 + lambda) * lambda);
  const double big = 1.0 + 2.0 * lambda + 2.0 * root;
  // 1 + 2 lambda - 2 root = 1 / big, written without cancellation.
  const double denom = std::pow(big, 2.0 / 3.0) + std::pow(big, -2.0 / 3.0) + 1.0;
  return root / denom;
}

double psi_min(double lambda) {
  const double l = std::abs(lambda);
  const double r = std::sqrt(1.0 + l * l);
  const double big = r + l;
  const double denom = std::pow(big, 2.0 / 3.0) + std::pow(big, -2.0 / 3.0) - 1.0;
  return r / denom - 1.0;
}

CardanoRoots cardano_pos(Complex zeta) {
  auto phi = [](Complex w) { return cbrt_principal(std::sqrt(1.0 + w * w) + w); };
  const Complex p = phi(zeta);
  const Complex q = phi(-zeta);
  const Complex odd = 0.5 * (p - q);
  const Complex even = 0.5 * (p + q);
  const Complex I(0.0, 1.0);
  CardanoRoots out;
  out.roots = {-2.0 * odd, odd + I * kSqrt3 * even, odd - I * kSqrt3 * even};
  out.on_branch_cut = std::abs(zeta.real()) <= 1e-15 * std::max(1.0, std::abs(zeta)) && std::abs(zeta.imag()) > 1.0;
  return out;
}

CardanoRoots cardano_neg(Complex zeta) {
  const Complex I(0.0, 1.0);
  Complex plus, minus;
  const double re = zeta.real();
  if (re >= 1.0) {
    const Complex s = std::sqrt(zeta * zeta - 1.0);
    plus = cbrt_principal(zeta + s);
    minus = cbrt_principal(zeta - s);
  } else if (re > -1.0) {
    const Complex s = std::sqrt(1.0 - zeta * zeta);
    plus = cbrt_principal(zeta + I * s);
    minus = cbrt_principal(zeta - I * s);
  } else {
    const Complex s = std::sqrt(zeta * zeta - 1.0);
    plus = -cbrt_principal(-zeta - s);
    minus = -cbrt_principal(-zeta + s);
  }
  const Complex sum = plus + minus;
  const Complex diff = plus - minus;
  CardanoRoots out;
  out.roots = {-sum, 0.5 * sum + I * (kSqrt3 / 2.0) * diff, 0.5 * sum - I * (kSqrt3 / 2.0) * diff};
  out.on_branch_cut = std::abs(std::abs(re) - 1.0) <= 1e-15;
  return out;
}

double cardano_residual(const CardanoRoots& r, Complex zeta, int sign) {
  double worst = 0.0;
  for (const Complex& w : r.roots)
    worst = std::max(worst, std::abs(w * w * w + static_cast<double>(sign) * 3.0 * w + 2.0 * zeta));
  return worst;
}

double default_support_threshold(double eta, double max_density) { return std::sqrt(eta) * max_density; }

namespace {

double crossing(double t0, double d0, double t1, double d1, double thr) {
  if (d1 == d0) return 0.5 * (t0 + t1);
  return t0 + (thr - d0) * (t1 - t0) / (d1 - d0);
}

void rebuild_gaps(SupportProfile& profile) {
  profile.gaps.clear();
  for (std::size_t i = 1; i < profile.intervals.size(); ++i)
    profile.gaps.push_back(GapInfo{profile.intervals[i - 1].hi, profile.intervals[i].lo});
}

}  // namespace

SupportProfile detect_support(const GridSolution& grid, const SupportOptions& options) {
  const auto& tau = grid.tau_grid;
  const std::size_t count = tau.size();
  std::vector<double> dens(count);
  double max_density = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    // Failed points count as empty.
    dens[k] = std::isfinite(grid.avg_density[k]) ? grid.avg_density[k] : 0.0;
    max_density = std::max(max_density, dens[k]);
  }
  SupportProfile profile;
  profile.eta = grid.eta;
  profile.threshold = options.threshold ? *options.threshold : default_support_threshold(grid.eta, max_density);
  const double thr = profile.threshold;
  if (count == 0 || !(max_density > thr)) throw Error(ErrorCode::NoSupport, "density never exceeds the threshold");

  std::size_t k = 0;
  while (k < count) {
    if (dens[k] <= thr) {
      ++k;
      continue;
    }
    const std::size_t start = k;
    while (k < count && dens[k] > thr) ++k;
    const std::size_t stop = k - 1;
    Interval iv;
    iv.lo = start == 0 ? tau[0] : crossing(tau[start - 1], dens[start - 1], tau[start], dens[start], thr);
    iv.hi = stop + 1 == count ? tau[stop] : crossing(tau[stop], dens[stop], tau[stop + 1], dens[stop + 1], thr);
    profile.intervals.push_back(iv);
    for (std::size_t j = start + 1; j < stop; ++j) {
      if (dens[j] < dens[j - 1] && dens[j] < dens[j + 1] && kPi * dens[j] < options.min_eps)
        profile.minima.push_back(Minimum{tau[j], kPi * dens[j]});
    }
  }
  rebuild_gaps(profile);
  return profile;
}

SupportProfile refine_support(const ModelSpec& model, const GridSolution& grid, const SupportProfile& profile,
                              const RefineOptions& options) {
  const auto& tau = grid.tau_grid;
  const double eta = profile.eta;
  const double thr = profile.threshold;
  auto density = [&](double t) {
    const Solution s = solve_continuation(model, Complex(t, eta), options.solver);
    return model.average(RVec(s.m.imag())) / kPi;
  };
  auto bracket_index = [&](double t) {
    // First grid index with tau >= t.
    return static_cast<std::size_t>(std::lower_bound(tau.begin(), tau.end(), t) - tau.begin());
  };
  const auto max_iter = static_cast<std::uintmax_t>(options.max_iter);
  auto bisect_edge = [&](double a, double b) {
    std::uintmax_t it = max_iter;
    auto f = [&](double t) { return density(t) - thr; };
    auto tol = [&](double x, double y) { return std::abs(y - x) <= options.edge_tol; };
    const auto r = boost::math::tools::bisect(f, a, b, tol, it);
    return 0.5 * (r.first + r.second);
  };

  SupportProfile out;
  out.eta = eta;
  out.threshold = thr;
  for (Interval iv : profile.intervals) {
    const std::size_t klo = bracket_index(iv.lo);
    if (klo > 0 && klo < tau.size()) iv.lo = bisect_edge(tau[klo - 1], tau[klo]);
    const std::size_t khi = bracket_index(iv.hi);
    if (khi > 0 && khi < tau.size() && tau[khi] != iv.hi) iv.hi = bisect_edge(tau[khi - 1], tau[khi]);
    out.intervals.push_back(iv);
  }

  const int bits = std::numeric_limits<double>::digits / 2;
  for (const Minimum& coarse : profile.minima) {
    const std::size_t k = bracket_index(coarse.tau);
    if (k == 0 || k + 1 >= tau.size()) continue;
    const double a = tau[k - 1];
    const double b = tau[k + 1];
    std::uintmax_t it = max_iter;
    const auto best = boost::math::tools::brent_find_minima(density, a, b, bits, it);
    const double gamma = best.first;
    const double value = best.second;
    if (value <= thr) {
      // Hidden gap: split the enclosing interval at the two crossings.
      const double left = bisect_edge(a, gamma);
      const double right = bisect_edge(gamma, b);
      for (std::size_t i = 0; i < out.intervals.size(); ++i) {
        if (out.intervals[i].lo < gamma && gamma < out.intervals[i].hi) {
          const Interval upper{right, out.intervals[i].hi};
          out.intervals[i].hi = left;
          out.intervals.insert(out.intervals.begin() + static_cast<long>(i) + 1, upper);
          break;
        }
      }
    } else {
      out.minima.push_back(Minimum{gamma, kPi * value});
    }
  }
  rebuild_gaps(out);
  return out;
}

std::string_view to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Edge: return "edge";
    case ShapeKind::Cusp: return "cusp";
    case ShapeKind::NonzeroMin: return "nonzero_min";
  }
  return "unknown";
}

std::vector<SingularPoint> classify(const SupportProfile& profile, double cusp_factor) {
  std::vector<SingularPoint> points;
  const double cusp_level = cusp_factor * std::cbrt(profile.eta);
  for (const Interval& iv : profile.intervals) {
    points.push_back(SingularPoint{ShapeKind::Edge, iv.lo, 0.0});
    points.push_back(SingularPoint{ShapeKind::Edge, iv.hi, 0.0});
  }
  for (const Minimum& m : profile.minima)
    points.push_back(SingularPoint{m.value < cusp_level ? ShapeKind::Cusp : ShapeKind::NonzeroMin, m.tau, m.value});
  std::sort(points.begin(), points.end(), [](const SingularPoint& x, const SingularPoint& y) { return x.tau < y.tau; });
  return points;
}

double gap_estimate(const SpectralData& spectral) {
  const double psi = spectral.psi;
  if (!(psi > 1e-14)) throw Error(ErrorCode::ZeroPsi, "psi vanishes, the gap estimate is undefined");
  const double s = std::abs(spectral.sigma);
  return 4.0 * s * s * s / (27.0 * spectral.f_abs_m * psi * psi);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::WindowTooSmall, "need two points for a slope");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (!(std::abs(den) > 0.0)) throw Error(ErrorCode::FitDiverged, "degenerate abscissae in log-log fit");
  return (n * sxy - sx * sy) / den;
}

namespace {

struct Samples {
  std::vector<double> omega;  // signed
  RMat values;                // n x k, v_x(tau0 + omega_j)
  RVec base;                  // v_x(tau0)
  RVec weights;
};

double profile_value(ShapeKind kind, double omega, double scale) {
  const double w = std::abs(omega);
  switch (kind) {
    case ShapeKind::Edge: return std::cbrt(scale) * psi_edge(w / scale);
    case ShapeKind::Cusp: return std::pow(2.0, -2.0 / 3.0) * std::cbrt(w);
    case ShapeKind::NonzeroMin: return scale * psi_min(omega / (scale * scale * scale));
  }
  return 0.0;
}

struct LinearFit {
  RVec h;
  double residual = 0.0;
};

LinearFit fit_amplitudes(const Samples& s, ShapeKind kind, double scale) {
  const Eigen::Index n = s.values.rows();
  const auto k = static_cast<Eigen::Index>(s.omega.size());
  RVec psi(k);
  for (Eigen::Index j = 0; j < k; ++j) psi[j] = profile_value(kind, s.omega[static_cast<std::size_t>(j)], scale);
  const double pp = psi.squaredNorm();
  LinearFit fit;
  fit.h = RVec::Zero(n);
  double misfit = 0.0, total = 0.0;
  for (Eigen::Index x = 0; x < n; ++x) {
    const RVec y = s.values.row(x).transpose().array() - s.base[x];
    fit.h[x] = pp > 0.0 ? y.dot(psi) / pp : 0.0;
    misfit += (y - fit.h[x] * psi).squaredNorm();
    total += y.squaredNorm();
  }
  fit.residual = total > 0.0 ? std::sqrt(misfit / total) : std::numeric_limits<double>::infinity();
  return fit;
}

struct Window {
  double lo = 0.0;
  double hi = 0.0;
};

Window default_window(ShapeKind kind, const FitOptions& o) {
  const double length = o.interval_length.value_or(1.0);
  Window w;
  switch (kind) {
    case ShapeKind::Edge:
      if (o.scale_hint) {
        w.lo = *o.scale_hint / 10.0;
        w.hi = std::min(3.0 * *o.scale_hint, length / 4.0);
      } else {
        w.lo = length / 400.0;
        w.hi = length / 40.0;
      }
      break;
    case ShapeKind::Cusp:
      w.lo = length * 2.5e-5;
      w.hi = length * 2.5e-3;
      break;
    case ShapeKind::NonzeroMin: {
      const double rho = o.scale_hint.value_or(0.1);
      w.lo = rho * rho * rho / 10.0;
      w.hi = 30.0 * rho * rho * rho;
      break;
    }
  }
  if (o.omega_min) w.lo = *o.omega_min;
  if (o.omega_max) w.hi = *o.omega_max;
  return w;
}

ShapeFit fit_samples(const Samples& s, double tau0, ShapeKind kind, const FitOptions& o, Window w) {
  if (s.omega.size() < 3) throw Error(ErrorCode::WindowTooSmall, "fewer than three samples in the fit window");
  if (!s.values.allFinite() || !s.base.allFinite())
    throw Error(ErrorCode::FitDiverged, "non-finite density samples in the fit window");

  ShapeFit out;
  out.kind = kind;
  out.tau0 = tau0;
  out.omega_min = w.lo;
  out.omega_max = w.hi;
  out.omega = s.omega;

  if (kind == ShapeKind::Cusp) {
    const LinearFit fit = fit_amplitudes(s, kind, 0.0);
    out.h = fit.h;
    out.residual = fit.residual;
  } else {
    double hint = o.scale_hint.value_or(kind == ShapeKind::Edge ? o.interval_length.value_or(1.0) : 0.1);
    if (!(hint > 0.0)) throw Error(ErrorCode::InvalidArgument, "scale hint must be positive");
    auto cost = [&](double log_scale) { return fit_amplitudes(s, kind, std::exp(log_scale)).residual; };
    std::uintmax_t it = 200;
    const auto best = boost::math::tools::brent_find_minima(cost, std::log(hint / 10.0), std::log(hint * 10.0),
                                                            std::numeric_limits<double>::digits / 2, it);
    out.scale = std::exp(best.first);
    const LinearFit fit = fit_amplitudes(s, kind, out.scale);
    out.h = fit.h;
    out.residual = fit.residual;
  }
  if (!out.h.allFinite() || !std::isfinite(out.residual)) throw Error(ErrorCode::FitDiverged, "fit produced NaN");

  std::vector<double> xs, ys;
  const double base = s.weights.dot(s.base);
  for (std::size_t j = 0; j < s.omega.size(); ++j) {
    const double dv = s.weights.dot(s.values.col(static_cast<Eigen::Index>(j))) - base;
    if (dv > 0.0) {
      xs.push_back(std::abs(s.omega[j]));
      ys.push_back(dv);
    }
  }
  out.exponent = xs.size() >= 2 ? loglog_slope(xs, ys) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

std::vector<int> sides_of(ShapeKind kind, int side) {
  if (kind == ShapeKind::Edge && side == 0)
    throw Error(ErrorCode::InvalidArgument, "edge fits need side = +1 or -1 (direction of the support)");
  if (side > 0) return {1};
  if (side < 0) return {-1};
  return {-1, 1};
}

}  // namespace

ShapeFit fit_shape(const ModelSpec& model, double tau0, ShapeKind kind, const FitOptions& options) {
  const Window w = default_window(kind, options);
  if (!(w.lo > 0.0 && w.hi > w.lo) || options.samples < 2)
    throw Error(ErrorCode::WindowTooSmall, "fit window is empty");
  Samples s;
  s.weights = model.weights();
  auto solve_v = [&](double t) { return RVec(solve_continuation(model, Complex(t, options.eta), options.solver).m.imag()); };
  // At edges and cusps the real-axis value v_x(tau0) vanishes; the eta-smoothed
  // value there is an artefact of order eta^{1/3} and is not subtracted.
  s.base = kind == ShapeKind::NonzeroMin ? solve_v(tau0) : RVec::Zero(model.n());
  std::vector<RVec> cols;
  for (int sd : sides_of(kind, options.side)) {
    for (int j = 0; j < options.samples; ++j) {
      const double frac = static_cast<double>(j) / (options.samples - 1);
      const double omega = sd * w.lo * std::pow(w.hi / w.lo, frac);
      s.omega.push_back(omega);
      cols.push_back(solve_v(tau0 + omega));
    }
  }
  s.values.resize(model.n(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) s.values.col(static_cast<Eigen::Index>(j)) = cols[j];
  return fit_samples(s, tau0, kind, options, w);
}

ShapeFit fit_shape(const ModelSpec& model, const GridSolution& grid, double tau0, ShapeKind kind,
                   const FitOptions& options) {
  const Window w = default_window(kind, options);
  if (!(w.lo > 0.0 && w.hi > w.lo)) throw Error(ErrorCode::WindowTooSmall, "fit window is empty");
  if (grid.solutions.empty()) throw Error(ErrorCode::WindowTooSmall, "empty grid");
  const auto sides = sides_of(kind, options.side);
  // The base point is the grid point nearest to tau0.
  std::size_t base = 0;
  for (std::size_t k = 1; k < grid.tau_grid.size(); ++k)
    if (std::abs(grid.tau_grid[k] - tau0) < std::abs(grid.tau_grid[base] - tau0)) base = k;
  Samples s;
  const Eigen::Index n = grid.solutions[base].m.size();
  if (n != model.n()) throw Error(ErrorCode::InvalidArgument, "grid was solved for a different model");
  s.weights = model.weights();
  s.base = kind == ShapeKind::NonzeroMin ? RVec(grid.solutions[base].m.imag()) : RVec::Zero(n);
  std::vector<RVec> cols;
  for (std::size_t k = 0; k < grid.tau_grid.size(); ++k) {
    const double omega = grid.tau_grid[k] - grid.tau_grid[base];
    const double a = std::abs(omega);
    if (a < w.lo || a > w.hi || !grid.converged[k]) continue;
    const int sd = omega > 0.0 ? 1 : -1;
    if (std::find(sides.begin(), sides.end(), sd) == sides.end()) continue;
    s.omega.push_back(omega);
    cols.push_back(grid.solutions[k].m.imag());
  }
  s.values.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) s.values.col(static_cast<Eigen::Index>(j)) = cols[j];
  return fit_samples(s, grid.tau_grid[base], kind, options, w);
}

}  // namespace qvelab
