#pragma once

#include "qvelab/model.hpp"
#include "qvelab/shape.hpp"
#include "qvelab/solver.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace qvelab {

// Counter-based generator: the k-th draw of a stream depends only on
// (seed, stream, k), so sampling order and threading never change results.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);
  std::uint64_t bits(std::uint64_t counter) const;
  // Uniform on (0, 1).
  double uniform(std::uint64_t counter) const;
  // Standard normal from the pair of uniforms at 2 counter, 2 counter + 1.
  double normal(std::uint64_t counter) const;

 private:
  std::uint64_t key_;
};

enum class Symmetry { RealSymmetric, ComplexHermitian };
std::string_view to_string(Symmetry symmetry);

struct EnsembleSpec {
  int N = 0;
  Symmetry symmetry = Symmetry::RealSymmetric;
  std::uint64_t seed = 1;
};

// Model classes blown up to N rows: class c gets round(pi_c N) rows (largest
// remainder), s_ij = S_{c(i) c(j)} / N.
struct Ensemble {
  ModelSpec model;
  EnsembleSpec spec;
  std::vector<int> row_class;
  RMat variance;  // s_ij

  static Ensemble build(const ModelSpec& model, const EnsembleSpec& spec);
  CVec expand(const CVec& m) const;  // m_{c(i)}
};

// Centered Gaussian entries with E|h_ij|^2 = s_ij. The imaginary part is
// exactly zero for RealSymmetric.
CMat sample(const Ensemble& ensemble);
// Same matrix, resampled with another seed.
CMat sample(const Ensemble& ensemble, std::uint64_t seed);

// Ascending eigenvalues; uses the real solver when the imaginary part vanishes.
std::vector<double> eigenvalues(const CMat& H);

struct KolmogorovResult {
  double distance = 0.0;
  double at = 0.0;    // location of the largest deviation
  double mass = 0.0;  // trapezoid mass of the grid density
};

// sup_x |F_N(x) - F(x)| with F_N the empirical CDF of the (sorted) eigenvalues
// and F the trapezoid-integrated grid density, linear between grid points.
KolmogorovResult kolmogorov_distance(const std::vector<double>& eigs, const GridSolution& grid);

// Spacings between consecutive eigenvalues wider than min_width.
std::vector<GapInfo> spectral_gaps(const std::vector<double>& eigs, double min_width);

struct LocalLawReport {
  Complex z;
  double max_diag_dev = 0.0;   // max_i |G_ii - m_i|
  double max_offdiag = 0.0;    // max_{i != j} |G_ij|
  double avg_dev = 0.0;        // |N^{-1} Tr G - <m>|
  double predicted_scale = 0.0;  // 1 / sqrt(N Im z)
  double d_norm = 0.0;         // ||d||_inf
  double d_avg = 0.0;          // |<d>|
  double resolvent_error = -1.0;  // ||(H - z) G - I||_max, -1 when skipped
  std::uint64_t seed = 0;
};

struct LocalLawOptions {
  bool check_resolvent = true;
};

// G = (H - z)^{-1} by dense LU; d_k = -1/G_kk - z - sum_i s_ki G_ii (E h_kk = 0).
// m is the QVE solution on the model classes at z.
LocalLawReport locallaw_residuals(const CMat& H, const Ensemble& ensemble, const CVec& m, Complex z,
                                  const LocalLawOptions& options = {});

struct LocalLawSweep {
  std::vector<LocalLawReport> reports;
  double median_max_diag_dev = 0.0;
  double median_avg_dev = 0.0;
  double median_d_ratio = 0.0;  // median of d_avg / d_norm
};

// One sample per seed; seeds are independent and split over `threads`.
LocalLawSweep locallaw_sweep(const Ensemble& ensemble, Complex z, const std::vector<std::uint64_t>& seeds,
                             int threads = 1, const SolverConfig& config = {});

double median(std::vector<double> values);

}  // namespace qvelab
