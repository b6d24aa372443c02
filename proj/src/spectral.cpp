#include "qvelab/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace qvelab {

namespace {

constexpr double kDegenerateTop = 1e-13;
constexpr double kIsolation = 1e-10;

RVec sqrt_weights(const RVec& weights) { return weights.cwiseSqrt(); }

// sign Re m with sign(0) = +1; "zero" means below rounding relative to |m|.
RVec sign_re(const CVec& m) {
  RVec p(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double re = m[i].real();
    p[i] = (re < 0.0 && std::abs(re) > 1e-14 * std::abs(m[i])) ? -1.0 : 1.0;
  }
  return p;
}

}  // namespace

RMat build_F(const Solution& solution, const ModelSpec& model) {
  const RVec scale = sqrt_weights(model.weights()).cwiseProduct(solution.m.cwiseAbs());
  return scale.asDiagonal() * model.S() * scale.asDiagonal();
}

TopEigenpair top_eigenpair(const RMat& F, const RVec& weights) {
  Eigen::SelfAdjointEigenSolver<RMat> eig(F);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::DegenerateTop, "eigendecomposition of F failed");
  const Eigen::Index n = F.rows();
  const RVec& values = eig.eigenvalues();

  TopEigenpair top;
  top.lambda = values[n - 1];
  top.second = n > 1 ? values[n - 2] : -std::numeric_limits<double>::infinity();
  std::vector<double> moduli(values.data(), values.data() + n);
  for (double& x : moduli) x = std::abs(x);
  std::sort(moduli.begin(), moduli.end(), std::greater<>());
  top.gap = n > 1 ? moduli[0] - moduli[1] : moduli[0];
  if (top.gap < kDegenerateTop)
    throw Error(ErrorCode::DegenerateTop, "top eigenvalue of F is not simple (gap " + std::to_string(top.gap) + ")");

  RVec f = eig.eigenvectors().col(n - 1).cwiseQuotient(sqrt_weights(weights));
  if (f.dot(weights) < 0.0) f = -f;
  top.f = f.cwiseMax(0.0);
  top.f /= std::sqrt(weights.dot(top.f.cwiseAbs2()));
  return top;
}

double verify_F_identity(const SpectralData& spectral, const Solution& solution) {
  const double eta = solution.z.imag();
  return std::abs(spectral.lambda - (1.0 - eta / spectral.alpha * spectral.f_abs_m));
}

CMat build_B(const Solution& solution, const RMat& F) {
  CVec rotation(solution.m.size());
  for (Eigen::Index i = 0; i < rotation.size(); ++i) {
    const Complex phase = solution.m[i] / std::abs(solution.m[i]);
    rotation[i] = std::conj(phase * phase);
  }
  CMat B = -F.cast<Complex>();
  B.diagonal() += rotation;
  return B;
}

BadDirection smallest_eigenpair_B(const CMat& B, const RVec& f, const RVec& weights) {
  Eigen::ComplexEigenSolver<CMat> eig(B);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::NotIsolated, "eigendecomposition of B failed");
  const CVec& values = eig.eigenvalues();
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < values.size(); ++k)
    if (std::abs(values[k]) < std::abs(values[best])) best = k;
  double isolation = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < values.size(); ++k)
    if (k != best) isolation = std::min(isolation, std::abs(values[k]) - std::abs(values[best]));
  if (isolation < kIsolation)
    throw Error(ErrorCode::NotIsolated, "smallest eigenvalue of B is not isolated in modulus");

  CVec b = eig.eigenvectors().col(best).cwiseQuotient(sqrt_weights(weights).cast<Complex>());
  Complex overlap = 0.0;
  for (Eigen::Index i = 0; i < b.size(); ++i) overlap += f[i] * b[i] * weights[i];
  if (std::abs(overlap) < 1e-12 * std::sqrt(weights.dot(b.cwiseAbs2())))
    throw Error(ErrorCode::NotIsolated, "bad direction is orthogonal to f");
  b /= overlap;
  return BadDirection{values[best], b, isolation};
}

SigmaPsi sigma_psi(const RMat& F, const TopEigenpair& top, const RVec& p, const RVec& weights) {
  if (1.0 - top.second < 1e-12)
    throw Error(ErrorCode::GapTooSmall, "1 - F is not invertible on the complement of f");
  const RVec& f = top.f;
  const RVec w = p.cwiseProduct(f.cwiseAbs2());
  SigmaPsi out;
  out.sigma = weights.dot(w.cwiseProduct(f));
  const RVec q0w = w - out.sigma * f;

  const RVec sw = sqrt_weights(weights);
  const RVec fh = f.cwiseProduct(sw);
  const RVec qh = q0w.cwiseProduct(sw);
  RMat system = -F;
  system.diagonal().array() += 1.0;
  system += fh * fh.transpose();
  const RVec x = system.ldlt().solve(qh);
  out.psi = (1.0 + top.lambda) * qh.dot(x) - qh.squaredNorm();
  return out;
}

StabilityOperator::StabilityOperator(const ModelSpec& model, const Solution& solution,
                                     const SpectralData& spectral)
    : kernel_(model.kernel()),
      weights_(model.weights()),
      abs_m_(spectral.abs_m),
      phase_(spectral.phase),
      b_(spectral.b),
      beta_(spectral.beta) {
  (void)solution;
  if (!spectral.has_bad_direction)
    throw Error(ErrorCode::NotIsolated, "stability operator needs an isolated bad direction");
  const Eigen::Index n = weights_.size();
  b_sq_avg_ = avg(b_.cwiseProduct(b_));
  B_ = -(abs_m_.asDiagonal() * kernel_ * abs_m_.asDiagonal()).cast<Complex>();
  for (Eigen::Index i = 0; i < n; ++i) B_(i, i) += std::conj(phase_[i] * phase_[i]);
  CMat projector(n, n);
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y) projector(x, y) = b_[x] * b_[y] * weights_[y] / b_sq_avg_;
  deflated_.compute(B_ + (1.0 - beta_) * projector);
}

Complex StabilityOperator::avg(const CVec& w) const {
  Complex acc = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) acc += w[i] * weights_[i];
  return acc;
}

CVec StabilityOperator::apply_F(const CVec& w) const {
  const CVec scaled = abs_m_.cast<Complex>().cwiseProduct(w);
  return abs_m_.cast<Complex>().cwiseProduct(kernel_.cast<Complex>() * scaled);
}

CVec StabilityOperator::apply_B(const CVec& w) const { return B_ * w; }

CVec StabilityOperator::project(const CVec& w) const {
  return (avg(b_.cwiseProduct(w)) / b_sq_avg_) * b_;
}

CVec StabilityOperator::solve_BQ(const CVec& w) const { return deflated_.solve(CVec(w - project(w))); }

CVec StabilityOperator::apply_R(const CVec& w) const {
  return solve_BQ(abs_m_.cast<Complex>().cwiseProduct(w));
}

CVec StabilityOperator::bilinear(const CVec& h, const CVec& w) const {
  const CVec Fh = apply_F(h);
  const CVec Fw = apply_F(w);
  CVec out(h.size());
  for (Eigen::Index i = 0; i < h.size(); ++i)
    out[i] = 0.5 * std::conj(phase_[i]) * (h[i] * Fw[i] + Fh[i] * w[i]);
  return out;
}

CubicCoefficients cubic_coefficients(const SpectralData& spectral, const Solution& solution,
                                     const ModelSpec& model) {
  if (!spectral.has_bad_direction)
    throw Error(ErrorCode::NotIsolated, "cubic coefficients need the bad direction (beta, b)");
  const StabilityOperator op(model, solution, spectral);
  const Eigen::Index n = model.n();
  const Complex beta = spectral.beta;
  const CVec& b = spectral.b;

  CVec c1(n), c2(n), c3(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    c1[i] = std::conj(spectral.phase[i]);
    c2[i] = c1[i] * c1[i];
    c3[i] = c2[i] * c1[i];
  }
  const CVec b2 = b.cwiseProduct(b);

  CubicCoefficients out;
  out.exact[0] = -beta * op.avg(b2);
  out.exact[1] = op.avg((c3 - beta * c1).cwiseProduct(b2).cwiseProduct(b));
  const CVec rhs = b2.cwiseProduct(c1).cwiseProduct((c2.array() - beta).matrix());
  const CVec y = op.solve_BQ(rhs);
  const CVec inner = c2.cwiseProduct(y) + op.apply_F(y) - beta * y;
  out.exact[2] = op.avg(b2.cwiseProduct(c1).cwiseProduct(inner));

  const double alpha = spectral.alpha;
  const double sigma = spectral.sigma;
  const double psi = spectral.psi;
  const double ratio = spectral.f_abs_m * solution.z.imag() / alpha;
  const Complex I(0.0, 1.0);
  out.expanded[0] = -ratio + 2.0 * I * sigma * alpha - 2.0 * (psi - sigma * sigma) * alpha * alpha;
  out.expanded[1] = (1.0 - ratio) * sigma + I * (3.0 * psi - sigma * sigma) * alpha;
  out.expanded[2] = (1.0 - ratio) * psi;
  return out;
}

BinvNorms binv_norms(const CMat& B, const RVec& weights) {
  Eigen::JacobiSVD<CMat> svd(B);
  const auto& s = svd.singularValues();
  const double smax = s[0];
  const double smin = s[s.size() - 1];
  if (!(smin > 1e-14 * std::max(1.0, smax))) throw Error(ErrorCode::SingularB, "B is numerically singular");
  BinvNorms out;
  out.l2 = 1.0 / smin;
  const RVec sw = sqrt_weights(weights);
  const CMat inv = Eigen::PartialPivLU<CMat>(B).inverse();
  // Original coordinates: D^{-1} B^{-1} D with D = diag(sqrt(pi)).
  const CMat inv_orig = sw.cwiseInverse().cast<Complex>().asDiagonal() * inv * sw.cast<Complex>().asDiagonal();
  out.bb = inv_orig.cwiseAbs().rowwise().sum().maxCoeff();
  return out;
}

SpectralData analyze(const ModelSpec& model, const Solution& solution, const SpectralOptions& options) {
  SpectralData out;
  out.z = solution.z;
  const RVec& pi = model.weights();
  out.abs_m = solution.m.cwiseAbs();
  out.phase = solution.m.cwiseQuotient(out.abs_m.cast<Complex>());
  out.p = sign_re(solution.m);
  const RVec v = solution.m.imag();
  out.avg_v = pi.dot(v);

  const RMat F = build_F(solution, model);
  const TopEigenpair top = top_eigenpair(F, pi);
  out.lambda = top.lambda;
  out.f = top.f;
  out.gap = top.gap;
  out.alpha = pi.dot(top.f.cwiseProduct(v.cwiseQuotient(out.abs_m)));
  out.f_abs_m = pi.dot(top.f.cwiseProduct(out.abs_m));
  const SigmaPsi sp = sigma_psi(F, top, out.p, pi);
  out.sigma = sp.sigma;
  out.psi = sp.psi;
  out.small_alpha = out.avg_v <= options.eps_star;

  if (!options.bad_direction) return out;
  const CMat B = build_B(solution, F);
  try {
    const BadDirection bad = smallest_eigenpair_B(B, top.f, pi);
    out.has_bad_direction = true;
    out.beta = bad.beta;
    out.b = bad.b;
    const CubicCoefficients mu = cubic_coefficients(out, solution, model);
    out.mu = mu.exact;
    out.mu_expanded = mu.expanded;
  } catch (const Error& e) {
    // In the bulk the least-modulus eigenvalue of B may be degenerate; the
    // remaining quantities are still well defined.
    if (e.code() != ErrorCode::NotIsolated) throw;
    out.has_bad_direction = false;
  }
  const BinvNorms norms = binv_norms(B, pi);
  out.binv_norm_bb = norms.bb;
  out.binv_norm_l2 = norms.l2;
  return out;
}

}  // namespace qvelab
