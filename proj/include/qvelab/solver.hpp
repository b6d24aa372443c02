#pragma once

#include "qvelab/model.hpp"

#include <optional>
#include <vector>

namespace qvelab {

// m(z) at one spectral point.
struct Solution {
  Complex z;
  CVec m;
  double residual = 0.0;  // || m + 1/(z + a + S m) ||_inf
  int iterations = 0;

  RVec v() const { return m.imag(); }
};

struct SolverConfig {
  double tol = 1e-12;
  long max_iter = 1'000'000;
  double eta_floor = 1e-6;
  double continuation_factor = 0.5;
  bool newton = true;
  int threads = 1;
};

// Trace of the plain fixed-point iteration, used to certify contraction.
struct ContractionTrace {
  // sup_x D(m^{k+1}_x, m^k_x) with D(a, b) = |a - b|^2 / (Im a Im b).
  std::vector<double> hyperbolic_steps;
  std::vector<double> sup_steps;  // || m^{k+1} - m^k ||_inf
  double guaranteed_rate = 0.0;   // (1 + eta0^2 / ||S||)^{-2}
};

double qve_residual(const ModelSpec& model, Complex z, const CVec& m);

// Plain iteration m <- -1/(z + a + S m). Throws MaxIterExceeded.
Solution solve_fixed_point(const ModelSpec& model, Complex z,
                           const std::optional<CVec>& init = std::nullopt,
                           const SolverConfig& config = {}, ContractionTrace* trace = nullptr);

// Damped Newton on m + 1/(z + a + S m) = 0 with dense complex LU.
// Throws SingularJacobian, Diverged, InvalidArgument (init outside the closed
// upper half-plane).
Solution solve_newton(const ModelSpec& model, Complex z, const CVec& init,
                      const SolverConfig& config = {});

// Fixed point at Im z = max(1, eta) followed by geometric eta-continuation
// with Newton warm starts down to Im z.
Solution solve_continuation(const ModelSpec& model, Complex z, const SolverConfig& config = {});

struct GridSolution {
  std::vector<double> tau_grid;
  double eta = 0.0;
  std::vector<Solution> solutions;
  std::vector<double> avg_density;  // <v(tau + i eta)> / pi
  std::vector<bool> converged;

  bool all_converged() const;
};

GridSolution solve_grid(const ModelSpec& model, const std::vector<double>& tau_grid, double eta_target,
                        const SolverConfig& config = {});

// Inclusive grid lo, lo + step, ..., hi (endpoint kept within half a step).
std::vector<double> make_grid(double lo, double hi, double step);

// Trapezoid integral of the grid density (mass of <v>/pi).
double grid_mass(const GridSolution& grid);

struct StructuralBoundsReport {
  bool trivial_bound = true;          // |m_x| <= 1 / Im z
  std::optional<bool> l2_bound;       // ||m||_2 <= 2 / |z| when a = 0
  double l2_norm = 0.0;
  std::optional<bool> support_bound;  // density small outside [-Sigma, Sigma]
  std::optional<bool> symmetry;       // m(-conj z) = -conj m(z) when a = 0
  double symmetry_error = 0.0;
};

StructuralBoundsReport check_structural_bounds(const Solution& solution, const ModelSpec& model,
                                               const SolverConfig& config = {});

}  // namespace qvelab
