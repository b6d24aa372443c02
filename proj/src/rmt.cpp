#include "qvelab/rmt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

namespace qvelab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(splitmix64(splitmix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL))) {}

std::uint64_t CounterRng::bits(std::uint64_t counter) const {
  return splitmix64(key_ ^ splitmix64(counter));
}

double CounterRng::uniform(std::uint64_t counter) const {
  return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t counter) const {
  const double u1 = uniform(2 * counter);
  const double u2 = uniform(2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

std::string_view to_string(Symmetry symmetry) {
  return symmetry == Symmetry::RealSymmetric ? "real_symmetric" : "complex_hermitian";
}

Ensemble Ensemble::build(const ModelSpec& model, const EnsembleSpec& spec) {
  if (spec.N < 1) throw Error(ErrorCode::InvalidArgument, "ensemble needs N >= 1");
  const Eigen::Index n = model.n();
  const RVec& pi = model.weights();
  std::vector<long> count(n);
  std::vector<std::pair<double, Eigen::Index>> remainders;
  long assigned = 0;
  for (Eigen::Index c = 0; c < n; ++c) {
    const double exact = pi[c] * spec.N;
    count[c] = static_cast<long>(std::floor(exact));
    assigned += count[c];
    remainders.emplace_back(exact - count[c], c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (long k = 0; assigned < spec.N; ++k, ++assigned) ++count[remainders[k % n].second];

  Ensemble out{model, spec, {}, RMat()};
  out.row_class.reserve(spec.N);
  for (Eigen::Index c = 0; c < n; ++c)
    for (long k = 0; k < count[c]; ++k) out.row_class.push_back(static_cast<int>(c));
  out.variance.resize(spec.N, spec.N);
  for (int i = 0; i < spec.N; ++i)
    for (int j = 0; j < spec.N; ++j) out.variance(i, j) = model.S()(out.row_class[i], out.row_class[j]) / spec.N;
  return out;
}

CVec Ensemble::expand(const CVec& m) const {
  if (m.size() != model.n()) throw Error(ErrorCode::InvalidArgument, "class vector has wrong length");
  CVec out(spec.N);
  for (int i = 0; i < spec.N; ++i) out[i] = m[row_class[i]];
  return out;
}

CMat sample(const Ensemble& ensemble) { return sample(ensemble, ensemble.spec.seed); }

CMat sample(const Ensemble& ensemble, std::uint64_t seed) {
  const int N = ensemble.spec.N;
  const bool real = ensemble.spec.symmetry == Symmetry::RealSymmetric;
  const CounterRng re(seed, 0);
  const CounterRng im(seed, 1);
  CMat H(N, N);
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i <= j; ++i) {
      const std::uint64_t k = static_cast<std::uint64_t>(j) * (j + 1) / 2 + i;
      const double sd = std::sqrt(ensemble.variance(i, j));
      Complex h;
      if (real || i == j) {
        h = Complex(sd * re.normal(k), 0.0);
      } else {
        h = Complex(re.normal(k), im.normal(k)) * (sd / std::sqrt(2.0));
      }
      H(i, j) = h;
      H(j, i) = std::conj(h);
    }
  }
  return H;
}

std::vector<double> eigenvalues(const CMat& H) {
  std::vector<double> out;
  if (H.imag().cwiseAbs().maxCoeff() == 0.0) {
    const RMat real = H.real();
    Eigen::SelfAdjointEigenSolver<RMat> es(real, Eigen::EigenvaluesOnly);
    out.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  } else {
    Eigen::SelfAdjointEigenSolver<CMat> es(H, Eigen::EigenvaluesOnly);
    out.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  }
  std::sort(out.begin(), out.end());
  return out;
}

KolmogorovResult kolmogorov_distance(const std::vector<double>& eigs, const GridSolution& grid) {
  const auto& x = grid.tau_grid;
  const auto& rho = grid.avg_density;
  if (x.size() < 2) throw Error(ErrorCode::InvalidArgument, "grid needs at least two points");
  std::vector<double> cdf(x.size(), 0.0);
  for (std::size_t k = 1; k < x.size(); ++k) cdf[k] = cdf[k - 1] + 0.5 * (x[k] - x[k - 1]) * (rho[k] + rho[k - 1]);

  auto F = [&](double t) {
    if (t <= x.front()) return 0.0;
    if (t >= x.back()) return cdf.back();
    const auto it = std::upper_bound(x.begin(), x.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - x.begin());
    const double h = x[k] - x[k - 1];
    const double s = t - x[k - 1];
    // exact integral of the linear interpolant of rho
    return cdf[k - 1] + s * rho[k - 1] + 0.5 * s * s * (rho[k] - rho[k - 1]) / h;
  };

  KolmogorovResult out;
  out.mass = cdf.back();
  const double N = static_cast<double>(eigs.size());
  for (std::size_t k = 0; k < eigs.size(); ++k) {
    const double f = F(eigs[k]);
    const double dev = std::max(std::abs(k / N - f), std::abs((k + 1) / N - f));
    if (dev > out.distance) {
      out.distance = dev;
      out.at = eigs[k];
    }
  }
  return out;
}

std::vector<GapInfo> spectral_gaps(const std::vector<double>& eigs, double min_width) {
  std::vector<GapInfo> out;
  for (std::size_t k = 1; k < eigs.size(); ++k)
    if (eigs[k] - eigs[k - 1] > min_width) out.push_back(GapInfo{eigs[k - 1], eigs[k]});
  return out;
}

LocalLawReport locallaw_residuals(const CMat& H, const Ensemble& ensemble, const CVec& m, Complex z,
                                  const LocalLawOptions& options) {
  const Eigen::Index N = H.rows();
  if (N != ensemble.spec.N || H.cols() != N) throw Error(ErrorCode::InvalidArgument, "matrix size does not match");
  CMat A = H;
  A.diagonal().array() -= z;
  const Eigen::PartialPivLU<CMat> lu(A);
  const CMat G = lu.inverse();

  LocalLawReport out;
  out.z = z;
  out.seed = ensemble.spec.seed;
  const CVec mi = ensemble.expand(m);
  const CVec g = G.diagonal();
  out.max_diag_dev = (g - mi).cwiseAbs().maxCoeff();
  double off = 0.0;
  for (Eigen::Index j = 0; j < N; ++j)
    for (Eigen::Index i = 0; i < N; ++i)
      if (i != j) off = std::max(off, std::abs(G(i, j)));
  out.max_offdiag = off;
  out.avg_dev = std::abs((g - mi).mean());
  out.predicted_scale = 1.0 / std::sqrt(static_cast<double>(N) * z.imag());

  const CVec sg = ensemble.variance.cast<Complex>() * g;
  CVec d(N);
  for (Eigen::Index k = 0; k < N; ++k) d[k] = -1.0 / g[k] - z - sg[k];
  out.d_norm = d.cwiseAbs().maxCoeff();
  out.d_avg = std::abs(d.mean());

  if (options.check_resolvent) {
    CMat id = A * G;
    id.diagonal().array() -= 1.0;
    out.resolvent_error = id.cwiseAbs().maxCoeff();
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double hi = values[mid];
  if (values.size() % 2) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lo + hi);
}

LocalLawSweep locallaw_sweep(const Ensemble& ensemble, Complex z, const std::vector<std::uint64_t>& seeds,
                             int threads, const SolverConfig& config) {
  const Solution sol = solve_continuation(ensemble.model, z, config);
  LocalLawSweep out;
  out.reports.resize(seeds.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const CMat H = sample(ensemble, seeds[k]);
      LocalLawReport r = locallaw_residuals(H, ensemble, sol.m, z, LocalLawOptions{false});
      r.seed = seeds[k];
      out.reports[k] = r;
    }
  };
  const int t = std::max(1, threads);
  if (t == 1 || seeds.size() < 2) {
    work(0, seeds.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (seeds.size() + t - 1) / t;
    for (int i = 0; i < t; ++i) {
      const std::size_t begin = i * chunk;
      const std::size_t end = std::min(seeds.size(), begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  std::vector<double> diag, avg, ratio;
  for (const auto& r : out.reports) {
    diag.push_back(r.max_diag_dev);
    avg.push_back(r.avg_dev);
    ratio.push_back(r.d_norm > 0.0 ? r.d_avg / r.d_norm : 0.0);
  }
  out.median_max_diag_dev = median(diag);
  out.median_avg_dev = median(avg);
  out.median_d_ratio = median(ratio);
  return out;
}

}  // namespace qvelab
