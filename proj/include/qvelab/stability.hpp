#pragma once

#include "qvelab/model.hpp"
#include "qvelab/shape.hpp"
#include "qvelab/solver.hpp"
#include "qvelab/spectral.hpp"

#include <map>
#include <string>
#include <vector>

namespace qvelab {

// Solution g of -1/g = z + a + S g + d next to m(z), with u = (g - m)/|m|
// decomposed as u = theta b + r along the bad direction.
struct PerturbationResult {
  Complex z;
  CVec d;
  CVec g;
  CVec m;
  CVec u;
  Complex theta;          // <b u> / <b^2>
  CVec r;                 // Q u = u - theta b
  double r_norm = 0.0;    // ||r||_inf
  double residual = 0.0;  // ||g + 1/(z + a + S g + d)||_inf
  double reconstruction_error = 0.0;  // ||u - theta b - r||_inf
  double gate = 0.0;      // admissible ||d||_inf
  double distance = 0.0;  // ||g - m||_inf
  std::map<std::string, double> bound_ratios;
};

struct PerturbationOptions {
  double tol = 1e-13;
  int max_iter = 100;
  bool enforce_gate = true;
  SolverConfig solver{};
};

// Smallness gate eps / (8 Phi^2 Psi) with eps = 1 / (3 Sigma + 9 ||S|| Phi Psi),
// Phi = ||m||_inf and Psi = max(1, ||B^{-1}||_{B->B}).
double perturbation_gate(const ModelSpec& model, const Solution& base, const SpectralData& spectral);

// Newton from m(z). Throws PerturbationTooLarge (d above the gate, when
// enforced), Diverged.
PerturbationResult solve_perturbed(const ModelSpec& model, const Solution& base, const SpectralData& spectral,
                                   const CVec& d, const PerturbationOptions& options = {});
PerturbationResult solve_perturbed(const ModelSpec& model, Complex z, const CVec& d,
                                   const PerturbationOptions& options = {});

struct CubicCheck {
  double residual = 0.0;  // |mu3 theta^3 + mu2 theta^2 + mu1 theta + <|m| b d>|
  double scale = 0.0;     // |theta|^4 + ||d||^2 + |theta| ||d||
  double constant = 100.0;
  bool pass = false;
};

// Throws NotSmallAlpha when <v> exceeds options' eps_star.
CubicCheck cubic_check(const PerturbationResult& result, const SpectralData& spectral, const ModelSpec& model,
                       double constant = 100.0, double eps_star = 0.15);

struct StabilityParams {
  double varpi = 0.0;    // dist(z, supp v)
  double rho = 0.0;      // <v(Re z)>
  double delta = 0.0;    // ||d||^2 + |<t1, d>| + |<t2, d>|
  double upsilon = 0.0;  // min{delta / rho^2, delta / varpi^{2/3}, delta^{1/3}}
  Complex t1_d;          // <|m| conj(b), d>
  Complex t2_d;          // 2 <b A(b, R d)> + <b^2 |m| e^{-iq} d>
};

// rho is evaluated at Re z + i eta_real (the real-axis convention of the grid).
StabilityParams stability_params(const ModelSpec& model, const SupportProfile& profile, const Solution& base,
                                 const SpectralData& spectral, const CVec& d, double eta_real = 1e-6,
                                 const SolverConfig& config = {});

struct HolderReport {
  double worst_ratio = 0.0;  // max ||m(z1) - m(z2)||_inf / |z1 - z2|^{1/3} over neighbours
  double argmax_tau = 0.0;   // midpoint of the worst pair
  std::vector<double> ratios;
};

HolderReport holder_check(const GridSolution& grid);

}  // namespace qvelab
