#pragma once

#include "qvelab/types.hpp"

#include <optional>
#include <vector>

namespace qvelab {

// Discrete QVE model (a, S, pi). The kernel S acts on functions through the
// probability weights: (Sw)_i = sum_j S_ij w_j pi_j.
class ModelSpec {
 public:
  // Validates and builds a model. Uniform weights 1/n are used when none are
  // given. Throws AsymmetricKernel, NegativeEntry, BadWeights, InvalidArgument.
  static ModelSpec build(RVec a, RMat S, std::optional<RVec> weights = std::nullopt);

  Eigen::Index n() const { return a_.size(); }
  const RVec& a() const { return a_; }
  const RMat& S() const { return S_; }
  const RVec& weights() const { return weights_; }

  // S * diag(weights): the matrix that realises the action of S on vectors.
  const RMat& kernel() const { return kernel_; }

  CVec apply(const CVec& w) const { return kernel_ * w; }
  RVec apply(const RVec& w) const { return kernel_ * w; }

  // <u, w> = sum conj(u_i) w_i pi_i
  Complex inner(const CVec& u, const CVec& w) const;
  // <w> = sum w_i pi_i
  Complex average(const CVec& w) const;
  double average(const RVec& w) const { return weights_.dot(w); }
  double norm2(const CVec& w) const;

  bool is_zero_a() const { return a_.cwiseAbs().maxCoeff() == 0.0; }

 private:
  ModelSpec(RVec a, RMat S, RVec weights);

  RVec a_;
  RMat S_;
  RVec weights_;
  RMat kernel_;
};

struct Primitivity {
  int L = 0;
  double rho = 0.0;
};

struct FidResult {
  bool fully_indecomposable = true;
  // Offending all-zero block I x J with |I| + |J| >= n when not FID.
  std::vector<int> rows;
  std::vector<int> cols;
};

struct StructuralReport {
  double sigma_bound = 0.0;
  double norm_S_BB = 0.0;
  double norm_S_L2_to_B = 0.0;
  std::optional<Primitivity> primitivity;
  FidResult fid;
};

// ||S||_{B->B}: maximal weighted row sum.
double norm_S_BB(const ModelSpec& model);
// ||S||_{L2->B} = max_x ||S_x||_2, the L2(pi) norm of the row functions.
double norm_S_L2_to_B(const ModelSpec& model);
// Sigma = ||a||_inf + 2 ||S||^{1/2}; the support of every v_x lies in [-Sigma, Sigma].
double sigma_bound(const ModelSpec& model);

// Gamma(tau) = inf_x sqrt( sum_y pi_y (1/tau + |a_y - a_x| + ||S_y - S_x||_2)^{-2} ).
double gamma_function(const ModelSpec& model, double tau);

Pattern pattern_of(const RMat& S, double zero_tol = 0.0);

// Brute force over row subsets; n <= 20.
FidResult is_fully_indecomposable(const Pattern& pattern);

// Measure version of full indecomposability: no all-zero block I x J with
// pi(I) + pi(J) >= 1. Coincides with the pattern version for uniform weights.
FidResult is_fully_indecomposable_weighted(const Pattern& pattern, const RVec& weights);

// Smallest L <= max_L such that the kernel of S^L (w.r.t. pi) is strictly
// positive, with rho its minimal entry.
std::optional<Primitivity> primitivity_constants(const ModelSpec& model, int max_L);

StructuralReport structural_report(const ModelSpec& model, int max_L = 8);

// a = 0, S = ones: every component solves the semicircle equation.
ModelSpec semicircle_model(int n);

// 2x2 block kernel lambda 1{x<=d, y>d} + lambda 1{y<=d, x>d} + 1{x>d, y>d},
// discretised on n points with the first ceil(d n) points carrying mass d.
ModelSpec two_block(double lambda, double delta, int n);

// Critical block mass at which the two-block density develops interior cusps
// (lambda > 2).
double critical_delta(double lambda);

// Location 2 lambda / sqrt(lambda^2 - (lambda - 2)^2) of the outlier
// singularity of the small block as delta -> 0.
double blowup_location(double lambda);

}  // namespace qvelab
