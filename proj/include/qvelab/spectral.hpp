#pragma once

#include "qvelab/model.hpp"
#include "qvelab/solver.hpp"

#include <array>

namespace qvelab {

// Spectral quantities of the saturated operator F and of the stability
// operator B = e^{-2iq} - F at one spectral point. Vectors are in the
// original coordinates (functions on the index set, L2(pi) geometry).
struct SpectralData {
  Complex z;
  double lambda = 0.0;      // ||F||_{L2 -> L2}
  RVec f;                   // top eigenvector, f >= 0, ||f||_2 = 1
  double gap = 0.0;         // difference of the two largest |eigenvalues| of F
  double alpha = 0.0;       // <f, v/|m|>
  double f_abs_m = 0.0;     // <f |m|>
  double avg_v = 0.0;       // <v>
  RVec abs_m;
  CVec phase;               // e^{iq} = m/|m|
  RVec p;                   // sign Re m, sign(0) = +1
  double sigma = 0.0;       // <p f^3>
  double psi = 0.0;         // D(p f^2)

  bool has_bad_direction = false;
  Complex beta;             // smallest-modulus eigenvalue of B
  CVec b;                   // B b = beta b, <f, b> = 1
  std::array<Complex, 3> mu{};           // exact cubic coefficients mu_1, mu_2, mu_3
  std::array<Complex, 3> mu_expanded{};  // leading-order expansions in alpha, eta
  double binv_norm_bb = 0.0;
  double binv_norm_l2 = 0.0;
  bool small_alpha = false;              // <v> <= eps_star
};

struct SpectralOptions {
  double eps_star = 0.15;
  bool bad_direction = true;
};

// F in orthonormal coordinates: sqrt(pi_x) |m_x| S_xy |m_y| sqrt(pi_y).
RMat build_F(const Solution& solution, const ModelSpec& model);

struct TopEigenpair {
  double lambda = 0.0;
  RVec f;  // original coordinates
  double gap = 0.0;
  double second = 0.0;  // second largest (signed) eigenvalue
};

// Dense symmetric eigendecomposition. Throws DegenerateTop when gap < 1e-13.
TopEigenpair top_eigenpair(const RMat& F, const RVec& weights);

// |lambda - (1 - (Im z / alpha) <f |m|>)|
double verify_F_identity(const SpectralData& spectral, const Solution& solution);

// B in orthonormal coordinates.
CMat build_B(const Solution& solution, const RMat& F);

struct BadDirection {
  Complex beta;
  CVec b;  // original coordinates, <f, b> = 1
  double isolation = 0.0;  // min |beta'| - |beta| over the rest of the spectrum
};

// Throws NotIsolated when the modulus gap is below 1e-10.
BadDirection smallest_eigenpair_B(const CMat& B, const RVec& f, const RVec& weights);

struct SigmaPsi {
  double sigma = 0.0;
  double psi = 0.0;
};

// sigma = <p f^3>, psi = <Q0 w, ((1 + lambda)(1 - F)^{-1} - 1) Q0 w> with
// w = p f^2 and Q0 = 1 - f<f, .>. Throws GapTooSmall.
SigmaPsi sigma_psi(const RMat& F, const TopEigenpair& top, const RVec& p, const RVec& weights);

// Operator-level access to B and its restricted inverse in original coordinates.
class StabilityOperator {
 public:
  StabilityOperator(const ModelSpec& model, const Solution& solution, const SpectralData& spectral);

  CVec apply_F(const CVec& w) const;
  CVec apply_B(const CVec& w) const;
  // P w = <conj b, w> / <b^2> b
  CVec project(const CVec& w) const;
  // B^{-1} Q w, solved on the complement of b.
  CVec solve_BQ(const CVec& w) const;
  // R w = B^{-1} Q (|m| w)
  CVec apply_R(const CVec& w) const;
  // Plain average <w> = sum w pi (no conjugation).
  Complex avg(const CVec& w) const;
  // The bilinear map A(h, w) = e^{-iq}(h Fw + w Fh) / 2.
  CVec bilinear(const CVec& h, const CVec& w) const;

  const CMat& B() const { return B_; }

 private:
  RMat kernel_;
  RVec weights_;
  RVec abs_m_;
  CVec phase_;
  CVec b_;
  Complex beta_;
  Complex b_sq_avg_;
  CMat B_;
  Eigen::PartialPivLU<CMat> deflated_;
};

struct CubicCoefficients {
  std::array<Complex, 3> exact{};
  std::array<Complex, 3> expanded{};
};

CubicCoefficients cubic_coefficients(const SpectralData& spectral, const Solution& solution,
                                     const ModelSpec& model);

struct BinvNorms {
  double bb = 0.0;
  double l2 = 0.0;
};

// Norms of B^{-1} for B given in orthonormal coordinates. Throws SingularB.
BinvNorms binv_norms(const CMat& B, const RVec& weights);

// Full per-z analysis. Throws DegenerateTop, GapTooSmall, SingularB. When the
// least-modulus eigenvalue of B is not isolated, has_bad_direction stays false.
SpectralData analyze(const ModelSpec& model, const Solution& solution, const SpectralOptions& options = {});

}  // namespace qvelab
