#include "qvelab/scaling.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <vector>

namespace qvelab {

std::string_view to_string(ScalingStatus status) {
  switch (status) {
    case ScalingStatus::Unique: return "unique";
    case ScalingStatus::NonUnique: return "non_unique";
    case ScalingStatus::NotScalable: return "not_scalable";
    case ScalingStatus::Undetermined: return "undetermined";
  }
  return "undetermined";
}

namespace {

double scaling_residual(const ModelSpec& model, const RVec& v, double eta) {
  const RVec sv = model.apply(v);
  return (v.array() * (eta + sv.array()) - 1.0).abs().maxCoeff();
}

// d/dv of v (eta + S v) - 1.
RMat scaling_jacobian(const ModelSpec& model, const RVec& v, double eta) {
  RMat jac = v.asDiagonal() * model.kernel();
  jac.diagonal().array() += eta + model.apply(v).array();
  return jac;
}

// A few Newton steps on the converged iterate; the damped map stalls at a
// residual that can still mean a sizeable error in v when the Jacobian is
// nearly singular.
void polish(const ModelSpec& model, RVec& v, double eta, double& res) {
  for (int k = 0; k < 5; ++k) {
    const RVec f = (v.array() * (eta + model.apply(v).array()) - 1.0).matrix();
    const RVec step = scaling_jacobian(model, v, eta).partialPivLu().solve(-f);
    const RVec next = v + step;
    if (!(next.array() > 0.0).all()) return;
    const double next_res = scaling_residual(model, next, eta);
    if (!(next_res < res)) return;
    v = next;
    res = next_res;
  }
}

bool locally_unique(const ModelSpec& model, const RVec& v) {
  const Eigen::JacobiSVD<RMat> svd(scaling_jacobian(model, v, 0.0));
  const RVec& s = svd.singularValues();
  return s[s.size() - 1] > 1e-10 * s[0];
}

}  // namespace

ScalingResult scale_symmetric(const ModelSpec& model, double eta, const ScalingOptions& options) {
  if (!model.is_zero_a()) throw Error(ErrorCode::InvalidArgument, "scaling needs a = 0");
  if (!(eta >= 0.0)) throw Error(ErrorCode::InvalidArgument, "scaling needs eta >= 0");
  const Eigen::Index n = model.n();
  ScalingResult out;
  RVec v = RVec::Ones(n);
  double theta = options.theta0;
  double res = scaling_residual(model, v, eta);
  out.max_norm = 1.0;

  // Norm trend over windows of iterations separates blow-up from slow convergence.
  double window_start_norm = 1.0;
  int growing_windows = 0;
  const long window = 10'000;

  long it = 0;
  for (; it < options.max_iter && res > options.tol; ++it) {
    const RVec sv = model.apply(v);
    if ((eta + sv.array() <= 0.0).any()) break;
    RVec next = (1.0 - theta) * v.array() + theta / (eta + sv.array());
    const double next_res = scaling_residual(model, next, eta);
    if (!std::isfinite(next_res)) break;
    if (next_res > res && theta > 1e-3) {
      theta *= 0.5;
      continue;
    }
    v = std::move(next);
    res = next_res;
    const double norm = v.maxCoeff();
    out.max_norm = std::max(out.max_norm, norm);
    if (norm > options.blowup_norm) break;
    if ((it + 1) % window == 0) {
      growing_windows = norm > window_start_norm * (1.0 + 1e-9) ? growing_windows + 1 : 0;
      window_start_norm = norm;
    }
  }
  if (res <= options.tol && (v.array() > 0.0).all()) polish(model, v, eta, res);
  out.iterations = it;
  out.final_theta = theta;
  out.residual = res;

  const bool converged = res <= options.tol && (v.array() > 0.0).all();
  if (converged) {
    out.v = v;
    out.j_value = j_functional(model, v, eta);
    if (eta > 0.0) {
      out.status = ScalingStatus::Unique;
    } else {
      // the brute-force FID check is capped; larger models use the Jacobian rank
      const bool unique = n <= 20
                              ? is_fully_indecomposable_weighted(pattern_of(model.S()), model.weights()).fully_indecomposable
                              : locally_unique(model, v);
      out.status = unique ? ScalingStatus::Unique : ScalingStatus::NonUnique;
    }
  } else if (eta == 0.0 && (out.max_norm > options.blowup_norm || growing_windows >= 3)) {
    out.status = ScalingStatus::NotScalable;
  } else if (eta > 0.0) {
    throw Error(ErrorCode::Diverged, "damped iteration failed at eta > 0, residual " + std::to_string(res));
  } else {
    out.status = ScalingStatus::Undetermined;
  }
  return out;
}

double j_functional(const ModelSpec& model, const RVec& w, double eta) {
  if (w.size() != model.n()) throw Error(ErrorCode::InvalidArgument, "test vector has wrong length");
  if (!(w.array() > 0.0).all()) throw Error(ErrorCode::NonPositiveInput, "J needs a positive vector");
  const RVec sw = model.apply(w);
  const RVec& pi = model.weights();
  return pi.dot(w.cwiseProduct(sw)) - 2.0 * pi.dot(RVec(w.array().log())) + 2.0 * eta * pi.dot(w);
}

namespace {

// Number of perfect matchings avoiding row `skip_row` and column `skip_col`
// (both -1 for the full pattern), capped at 1 since only existence matters.
bool has_perfect_matching(const Pattern& p, int skip_row, int skip_col) {
  const int n = static_cast<int>(p.rows());
  std::vector<int> rows;
  for (int i = 0; i < n; ++i)
    if (i != skip_row) rows.push_back(i);
  const int m = static_cast<int>(rows.size());
  unsigned full = 0;
  for (int j = 0; j < n; ++j)
    if (j != skip_col) full |= 1u << j;
  // reach[mask]: the first popcount(mask) rows can be matched onto exactly mask.
  std::vector<char> reach(1u << n, 0);
  reach[0] = 1;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (!reach[mask] || (mask & ~full)) continue;
    const int k = __builtin_popcount(mask);
    if (k >= m) continue;
    for (int j = 0; j < n; ++j)
      if ((full >> j & 1u) && !(mask >> j & 1u) && p(rows[k], j)) reach[mask | (1u << j)] = 1;
  }
  return reach[full] != 0;
}

}  // namespace

bool has_total_support(const Pattern& pattern) {
  const Eigen::Index n = pattern.rows();
  if (pattern.cols() != n) throw Error(ErrorCode::InvalidArgument, "pattern must be square");
  if (n > 12) throw Error(ErrorCode::DimensionTooLarge, "total support check is limited to n <= 12");
  if (n == 0 || !has_perfect_matching(pattern, -1, -1)) return false;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (pattern(i, j) && !has_perfect_matching(pattern, i, j)) return false;
  return true;
}

ScalingStatus diagnose_scalability(const Pattern& pattern) {
  if (!has_total_support(pattern)) return ScalingStatus::NotScalable;
  return is_fully_indecomposable(pattern).fully_indecomposable ? ScalingStatus::Unique : ScalingStatus::NonUnique;
}

}  // namespace qvelab
