#pragma once

#include "qvelab/model.hpp"
#include "qvelab/solver.hpp"
#include "qvelab/spectral.hpp"

#include <array>
#include <optional>
#include <string_view>
#include <vector>

namespace qvelab {

// Universal profile of v next to an edge whose neighbouring gap has unit length.
double psi_edge(double lambda);
// Universal profile of v around a small non-zero local minimum; even in lambda.
double psi_min(double lambda);

struct CardanoRoots {
  // Omega_0, Omega_+, Omega_- in this order.
  std::array<Complex, 3> roots;
  bool on_branch_cut = false;

  Complex omega0() const { return roots[0]; }
  Complex omega_plus() const { return roots[1]; }
  Complex omega_minus() const { return roots[2]; }
};

// Roots of Omega^3 + 3 Omega + 2 zeta. Cut: {i xi : |xi| > 1}.
CardanoRoots cardano_pos(Complex zeta);
// Roots of Omega^3 - 3 Omega + 2 zeta. Flagged on |Re zeta| = 1.
CardanoRoots cardano_neg(Complex zeta);

// max over the three roots of |Omega^3 + s 3 Omega + 2 zeta|, s = +1 or -1.
double cardano_residual(const CardanoRoots& r, Complex zeta, int sign);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
};

struct Minimum {
  double tau = 0.0;
  double value = 0.0;  // <v(tau + i eta)>, not divided by pi
};

struct GapInfo {
  double left = 0.0;   // right end of the interval below
  double right = 0.0;  // left end of the interval above
  double delta() const { return right - left; }
};

struct SupportProfile {
  std::vector<Interval> intervals;
  std::vector<Minimum> minima;
  std::vector<GapInfo> gaps;
  double threshold = 0.0;  // on <v>/pi
  double eta = 0.0;
};

// sqrt(eta) times the largest grid density.
double default_support_threshold(double eta, double max_density);

struct SupportOptions {
  std::optional<double> threshold;  // on <v>/pi; default_support_threshold when absent
  double min_eps = 0.15;            // interior minima with <v> below this are reported
};

// Grid-only detection: runs above threshold become intervals (ends linearly
// interpolated), strict interior local minima become minima. Throws NoSupport.
SupportProfile detect_support(const GridSolution& grid, const SupportOptions& options = {});

struct RefineOptions {
  double edge_tol = 1e-10;
  double min_tol = 1e-9;
  int max_iter = 200;
  SolverConfig solver{};
};

// Sharpens a grid profile with direct solves at the profile's eta: edges by
// bisection on the threshold crossing, minima by golden section. A refined
// minimum that falls below the threshold splits its interval.
SupportProfile refine_support(const ModelSpec& model, const GridSolution& grid, const SupportProfile& profile,
                              const RefineOptions& options = {});

enum class ShapeKind { Edge, Cusp, NonzeroMin };
std::string_view to_string(ShapeKind kind);

struct SingularPoint {
  ShapeKind kind = ShapeKind::Edge;
  double tau = 0.0;
  double value = 0.0;  // <v> at tau
};

// Edges of all intervals plus the minima: cusp when <v(gamma)> < cusp_factor
// eta^{1/3}, otherwise a non-zero minimum.
std::vector<SingularPoint> classify(const SupportProfile& profile, double cusp_factor = 5.0);

// 4 |sigma|^3 / (27 <|m| f> psi^2) from spectral data at an edge. Throws ZeroPsi.
double gap_estimate(const SpectralData& spectral);

struct ShapeFit {
  ShapeKind kind = ShapeKind::Edge;
  double tau0 = 0.0;
  RVec h;                 // per-component amplitude
  double scale = 0.0;     // Delta for edges, rho for minima, 0 for cusps
  double residual = 0.0;  // relative L2 misfit over all samples and components
  double exponent = 0.0;  // log-log slope of <v(tau0 + w)> - <v(tau0)> against |w|
  double omega_min = 0.0;
  double omega_max = 0.0;
  std::vector<double> omega;  // signed sample offsets
};

struct FitOptions {
  // +1: samples at tau0 + w, -1: at tau0 - w, 0: both sides. w in [omega_min, omega_max].
  int side = 0;
  std::optional<double> omega_min;
  std::optional<double> omega_max;
  std::optional<double> scale_hint;  // Delta (edge) or rho (minimum)
  std::optional<double> interval_length;
  int samples = 25;                  // log-spaced per side
  double eta = 1e-6;
  SolverConfig solver{};
};

// Samples v(tau0 + w + i eta) directly and fits h_x Psi(w) to v_x(tau0 + w) - v_x(tau0),
// where v_x(tau0) is taken as 0 for edges and cusps.
// Throws WindowTooSmall, FitDiverged.
ShapeFit fit_shape(const ModelSpec& model, double tau0, ShapeKind kind, const FitOptions& options = {});

// Same fit on the grid points of an existing sweep that fall inside the window.
ShapeFit fit_shape(const ModelSpec& model, const GridSolution& grid, double tau0, ShapeKind kind,
                   const FitOptions& options = {});

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace qvelab
