#include "qvelab/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

namespace qvelab {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kWeightSumTol = 1e-10;

}  // namespace

ModelSpec::ModelSpec(RVec a, RMat S, RVec weights)
    : a_(std::move(a)), S_(std::move(S)), weights_(std::move(weights)) {
  kernel_ = S_ * weights_.asDiagonal();
}

ModelSpec ModelSpec::build(RVec a, RMat S, std::optional<RVec> weights) {
  const Eigen::Index n = a.size();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "model dimension must be positive");
  if (S.rows() != n || S.cols() != n)
    throw Error(ErrorCode::InvalidArgument,
                "kernel is " + std::to_string(S.rows()) + "x" + std::to_string(S.cols()) +
                    " but a has length " + std::to_string(n));
  if (!a.allFinite() || !S.allFinite())
    throw Error(ErrorCode::InvalidArgument, "non-finite entry in a or S");

  const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  const double asym = (S - S.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol * scale)
    throw Error(ErrorCode::AsymmetricKernel, "max |S_ij - S_ji| = " + std::to_string(asym));
  if (S.minCoeff() < 0.0) throw Error(ErrorCode::NegativeEntry, "kernel has a negative entry");
  RMat sym = 0.5 * (S + S.transpose());

  RVec w;
  if (weights) {
    w = *weights;
    if (w.size() != n) throw Error(ErrorCode::BadWeights, "weights length differs from n");
    if (!w.allFinite() || w.minCoeff() <= 0.0)
      throw Error(ErrorCode::BadWeights, "weights must be positive");
    const double total = w.sum();
    if (std::abs(total - 1.0) > kWeightSumTol)
      throw Error(ErrorCode::BadWeights, "weights sum to " + std::to_string(total));
    w /= total;
  } else {
    w = RVec::Constant(n, 1.0 / static_cast<double>(n));
  }
  return ModelSpec(std::move(a), std::move(sym), std::move(w));
}

Complex ModelSpec::inner(const CVec& u, const CVec& w) const {
  Complex acc = 0.0;
  for (Eigen::Index i = 0; i < n(); ++i) acc += std::conj(u[i]) * w[i] * weights_[i];
  return acc;
}

Complex ModelSpec::average(const CVec& w) const {
  Complex acc = 0.0;
  for (Eigen::Index i = 0; i < n(); ++i) acc += w[i] * weights_[i];
  return acc;
}

double ModelSpec::norm2(const CVec& w) const {
  return std::sqrt(weights_.dot(w.cwiseAbs2()));
}

double norm_S_BB(const ModelSpec& model) { return model.kernel().rowwise().sum().maxCoeff(); }

double norm_S_L2_to_B(const ModelSpec& model) {
  return std::sqrt((model.S().cwiseAbs2() * model.weights()).maxCoeff());
}

double sigma_bound(const ModelSpec& model) {
  return model.a().cwiseAbs().maxCoeff() + 2.0 * std::sqrt(norm_S_BB(model));
}

double gamma_function(const ModelSpec& model, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma_function needs tau > 0");
  const Eigen::Index n = model.n();
  const RVec& pi = model.weights();
  // Row distances ||S_y - S_x||_2 in L2(pi).
  RMat row_dist(n, n);
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = x; y < n; ++y) {
      const double d =
          std::sqrt(((model.S().row(y) - model.S().row(x)).array().square() * pi.transpose().array()).sum());
      row_dist(x, y) = row_dist(y, x) = d;
    }
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index x = 0; x < n; ++x) {
    double acc = 0.0;
    for (Eigen::Index y = 0; y < n; ++y) {
      const double denom = 1.0 / tau + std::abs(model.a()[y] - model.a()[x]) + row_dist(x, y);
      acc += pi[y] / (denom * denom);
    }
    best = std::min(best, std::sqrt(acc));
  }
  return best;
}

Pattern pattern_of(const RMat& S, double zero_tol) {
  return (S.array().abs() > zero_tol).matrix();
}

namespace {

// Enumerates nonempty row subsets I (as bitmasks, increasing) together with
// the maximal column set J on which all rows of I vanish, and returns the
// first pair accepted by `bad`.
template <class Bad>
FidResult find_zero_block(const Pattern& pattern, Bad bad) {
  const auto n = static_cast<int>(pattern.rows());
  if (pattern.cols() != n) throw Error(ErrorCode::InvalidArgument, "pattern must be square");
  if (n > 20) throw Error(ErrorCode::DimensionTooLarge, "brute-force FID check is capped at n = 20");
  FidResult result;
  if (n == 0) return result;

  std::vector<std::uint32_t> row_zero(n, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (!pattern(i, j)) row_zero[i] |= (1u << j);

  const std::uint32_t full = (n == 32) ? ~0u : ((1u << n) - 1u);
  std::vector<std::uint32_t> zero_cols(std::size_t{1} << n);
  zero_cols[0] = full;
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    const int low = std::countr_zero(mask);
    zero_cols[mask] = zero_cols[mask & (mask - 1)] & row_zero[low];
    const std::uint32_t cols = zero_cols[mask];
    if (cols == 0) continue;
    if (bad(mask, cols)) {
      result.fully_indecomposable = false;
      for (int i = 0; i < n; ++i) {
        if (mask & (1u << i)) result.rows.push_back(i);
        if (cols & (1u << i)) result.cols.push_back(i);
      }
      return result;
    }
  }
  return result;
}

}  // namespace

FidResult is_fully_indecomposable(const Pattern& pattern) {
  const auto n = static_cast<int>(pattern.rows());
  return find_zero_block(pattern, [n](std::uint32_t rows, std::uint32_t cols) {
    return std::popcount(rows) + std::popcount(cols) >= n;
  });
}

FidResult is_fully_indecomposable_weighted(const Pattern& pattern, const RVec& weights) {
  if (weights.size() != pattern.rows())
    throw Error(ErrorCode::InvalidArgument, "weights length differs from pattern size");
  const auto n = static_cast<int>(pattern.rows());
  auto mass = [&](std::uint32_t set) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      if (set & (1u << i)) acc += weights[i];
    return acc;
  };
  return find_zero_block(pattern, [&](std::uint32_t rows, std::uint32_t cols) {
    return mass(rows) + mass(cols) >= 1.0 - 1e-12;
  });
}

std::optional<Primitivity> primitivity_constants(const ModelSpec& model, int max_L) {
  if (max_L < 1) throw Error(ErrorCode::InvalidArgument, "max_L must be >= 1");
  RMat power = model.S();
  for (int L = 1; L <= max_L; ++L) {
    const double top = power.maxCoeff();
    const double low = power.minCoeff();
    if (top > 0.0 && low > 1e-14 * top) return Primitivity{L, low};
    power = power * model.kernel();
  }
  return std::nullopt;
}

StructuralReport structural_report(const ModelSpec& model, int max_L) {
  StructuralReport report;
  report.norm_S_BB = norm_S_BB(model);
  report.norm_S_L2_to_B = norm_S_L2_to_B(model);
  report.sigma_bound = sigma_bound(model);
  report.primitivity = primitivity_constants(model, max_L);
  if (model.n() <= 20) report.fid = is_fully_indecomposable(pattern_of(model.S()));
  return report;
}

ModelSpec semicircle_model(int n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "semicircle model needs n >= 1");
  return ModelSpec::build(RVec::Zero(n), RMat::Ones(n, n));
}

ModelSpec two_block(double lambda, double delta, int n) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "two_block needs lambda > 0");
  if (!(delta > 0.0 && delta < 1.0) || n < 2)
    throw Error(ErrorCode::EmptyBlock, "two_block needs 0 < delta < 1 and n >= 2");
  const int k = std::max(1, static_cast<int>(std::ceil(delta * n - 1e-9)));
  if (k >= n) throw Error(ErrorCode::EmptyBlock, "second block is empty for delta = " + std::to_string(delta));

  RMat S(n, n);
  RVec w(n);
  for (int i = 0; i < n; ++i) {
    const bool small_i = i < k;
    w[i] = small_i ? delta / k : (1.0 - delta) / (n - k);
    for (int j = 0; j < n; ++j) {
      const bool small_j = j < k;
      S(i, j) = (small_i && small_j) ? 0.0 : (small_i || small_j) ? lambda : 1.0;
    }
  }
  // The weights are exact by construction; rescale away rounding before validation.
  w /= w.sum();
  return ModelSpec::build(RVec::Zero(n), std::move(S), std::move(w));
}

double critical_delta(double lambda) {
  const double l = lambda;
  return std::pow(l - 2.0, 3) / (2.0 * l * l * l - 3.0 * l * l + 15.0 * l - 7.0);
}

double blowup_location(double lambda) {
  return 2.0 * lambda / std::sqrt(lambda * lambda - (lambda - 2.0) * (lambda - 2.0));
}

}  // namespace qvelab
