#include "qvelab/shape.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace qvelab;

namespace {

// Reference evaluations of the closed forms in their cancellation-prone
// textbook shape (fine at moderate lambda).
double psi_edge_ref(double l) {
  const double r = std::sqrt((1 + l) * l);
  return r / (std::pow(1 + 2 * l + 2 * r, 2.0 / 3) + std::pow(1 + 2 * l - 2 * r, 2.0 / 3) + 1);
}
double psi_min_ref(double l) {
  const double r = std::sqrt(1 + l * l);
  return r / (std::pow(r + l, 2.0 / 3) + std::pow(r - l, 2.0 / 3) - 1) - 1;
}

bool contains(const CardanoRoots& r, Complex w, double tol) {
  return std::any_of(r.roots.begin(), r.roots.end(), [&](Complex x) { return std::abs(x - w) < tol; });
}

SupportProfile pipeline(const ModelSpec& m, double step = 1e-3, double eta = 1e-6) {
  const double s = sigma_bound(m);
  const GridSolution g = solve_grid(m, make_grid(-s - 0.5, s + 0.5, step), eta);
  return refine_support(m, g, detect_support(g));
}

}  // namespace

TEST_SUITE("shape") {
  TEST_CASE("shape function values") {
    CHECK(psi_edge(0.0) == 0.0);
    CHECK(psi_min(0.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(std::abs(psi_edge(1.0) - 0.310990823173969) < 1e-14);
    CHECK(std::abs(psi_edge(1.0) - 0.31095) < 1e-4);
    CHECK(std::abs(psi_min(1.0) - 0.043467943638917) < 1e-14);
    CHECK(std::abs(psi_min(1.0) - 0.04347) < 1e-5);
    CHECK(psi_min(-2.5) == psi_min(2.5));
    const double asym = psi_edge(1e6) / std::cbrt(1e6);
    CHECK(std::abs(asym / std::pow(2.0, -4.0 / 3.0) - 1.0) < 0.01);
    for (double l : {1e-3, 0.1, 0.7, 3.0, 40.0}) {
      CHECK(psi_edge(l) == doctest::Approx(psi_edge_ref(l)).epsilon(1e-10));
      CHECK(psi_min(l) == doctest::Approx(psi_min_ref(l)).epsilon(1e-9));
    }
    CHECK_THROWS_AS(psi_edge(-1.0), Error);
  }

  TEST_CASE("shape functions follow their power-law envelopes") {
    for (double l = 1e-6; l <= 1e6; l *= 1.7) {
      const double e = psi_edge(l) / std::min(std::sqrt(l), std::cbrt(l));
      const double m = psi_min(l) / std::min(l * l, std::cbrt(l));
      CHECK(e >= 0.1);
      CHECK(e <= 10.0);
      // psi_min ~ lambda^2 / 18 at the origin and dips to 0.0435 at lambda = 1
      CHECK(m >= 1.0 / 25.0);
      CHECK(m <= 10.0);
    }
    CHECK(psi_min(1e-4) / 1e-8 == doctest::Approx(1.0 / 18.0).epsilon(1e-6));
  }

  TEST_CASE("Cardano roots at special points") {
    const CardanoRoots p0 = cardano_pos(0.0);
    CHECK(std::abs(p0.omega0()) < 1e-15);
    CHECK(std::abs(p0.omega_plus() - Complex(0, std::sqrt(3.0))) < 1e-14);
    CHECK(std::abs(p0.omega_minus() - Complex(0, -std::sqrt(3.0))) < 1e-14);
    const CardanoRoots n1 = cardano_neg(1.0);
    CHECK(std::abs(n1.omega0() + 2.0) < 1e-14);
    CHECK(std::abs(n1.omega_plus() - 1.0) < 1e-14);
    CHECK(std::abs(n1.omega_minus() - 1.0) < 1e-14);
    CHECK(n1.on_branch_cut);
    const CardanoRoots n0 = cardano_neg(0.0);
    for (Complex w : {Complex(0), Complex(std::sqrt(3.0)), Complex(-std::sqrt(3.0))}) CHECK(contains(n0, w, 1e-14));
    CHECK(cardano_pos(Complex(0, 2)).on_branch_cut);
    CHECK_FALSE(cardano_pos(Complex(0.1, 2)).on_branch_cut);
  }

  TEST_CASE("Cardano factorization") {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> N(0.0, 2.0);
    for (int k = 0; k < 1000; ++k) {
      const Complex z(N(gen), N(gen));
      CHECK(cardano_residual(cardano_pos(z), z, +1) < 1e-12 * std::max(1.0, std::abs(z)));
      CHECK(cardano_residual(cardano_neg(z), z, -1) < 1e-12 * std::max(1.0, std::abs(z)));
    }
    const Complex z(0.7, -0.2);
    const CardanoRoots r = cardano_pos(z);
    for (Complex w : {Complex(0.3, 0.1), Complex(-1.2, 0.5), Complex(2.0, -3.0)}) {
      const Complex prod = (w - r.roots[0]) * (w - r.roots[1]) * (w - r.roots[2]);
      CHECK(std::abs(prod - (w * w * w + 3.0 * w + 2.0 * z)) < 1e-12);
    }
  }

  TEST_CASE("positive Cardano roots are stable off the cut") {
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    std::vector<double> ratio;
    while (ratio.size() < 100) {
      const Complex z(U(gen), U(gen));
      const Complex xi = 1e-3 * Complex(U(gen), U(gen));
      // good set: away from the branch points +-i and the cut
      if (std::abs(z - Complex(0, 1)) < 0.3 || std::abs(z + Complex(0, 1)) < 0.3 || std::abs(z.real()) < 0.1) continue;
      const double d = std::abs(cardano_pos(z + xi).omega_plus() - cardano_pos(z).omega_plus());
      ratio.push_back(d * (1.0 + std::pow(std::abs(z), 2.0 / 3.0)) / std::abs(xi));
    }
    const double c = 2.0 * *std::max_element(ratio.begin(), ratio.begin() + 50);
    CHECK(std::all_of(ratio.begin() + 50, ratio.end(), [c](double r) { return r <= c; }));
  }

  TEST_CASE("Cardano roots are continuous off the cuts") {
    std::mt19937_64 gen(13);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    for (int k = 0; k < 200; ++k) {
      const Complex z(U(gen), U(gen));
      const Complex h(1e-9, -1e-9);
      if (std::abs(z.real()) > 0.05 && std::abs(z - Complex(0, 1)) > 0.05 && std::abs(z + Complex(0, 1)) > 0.05)
        for (int j = 0; j < 3; ++j) CHECK(std::abs(cardano_pos(z + h).roots[j] - cardano_pos(z).roots[j]) < 1e-6);
      if (std::abs(std::abs(z.real()) - 1.0) > 0.05)
        for (int j = 0; j < 3; ++j) CHECK(std::abs(cardano_neg(z + h).roots[j] - cardano_neg(z).roots[j]) < 1e-6);
    }
  }

  TEST_CASE("edge profile from the positive Cardano root") {
    // Im Omega_+(1 + 2 lambda) of the negative cubic equals the edge profile up
    // to the constant 2 sqrt(3).
    for (double l = 0.0; l <= 50.0; l += 0.25) {
      const double im = cardano_neg(1.0 + 2.0 * l).omega_plus().imag();
      CHECK(std::abs(im - 2.0 * std::sqrt(3.0) * psi_edge(l)) < 1e-12 * std::max(1.0, im));
    }
  }

  TEST_CASE("support of the semicircle") {
    const SupportProfile p = pipeline(semicircle_model(2), 0.01);
    REQUIRE(p.intervals.size() == 1);
    CHECK(std::abs(p.intervals[0].lo + 2.0) < 0.01);
    CHECK(std::abs(p.intervals[0].hi - 2.0) < 0.01);
    CHECK(p.gaps.empty());
  }

  TEST_CASE("flat zero density has no support") {
    GridSolution g;
    g.tau_grid = {0.0, 1.0, 2.0};
    g.eta = 1e-6;
    g.avg_density = {0.0, 0.0, 0.0};
    g.converged = {true, true, true};
    g.solutions.resize(3);
    try {
      detect_support(g);
      FAIL("expected NoSupport");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoSupport);
    }
  }

  TEST_CASE("phase transition of the two-block family") {
    const double dc = oracle::delta_c(3.0);
    const SupportProfile below = pipeline(two_block(3.0, 0.9 * dc, 2));
    CHECK(below.intervals.size() == 3);
    CHECK(below.gaps.size() == 2);
    const auto at = classify(pipeline(two_block(3.0, dc, 2)));
    CHECK(std::count_if(at.begin(), at.end(), [](const SingularPoint& s) { return s.kind == ShapeKind::Cusp; }) == 2);
    const auto above = classify(pipeline(two_block(3.0, 1.1 * dc, 2)));
    CHECK(std::count_if(above.begin(), above.end(), [](const SingularPoint& s) { return s.kind == ShapeKind::NonzeroMin; }) == 2);
    for (const auto& prof : {below}) {
      for (std::size_t i = 0; i + 1 < prof.intervals.size(); ++i) CHECK(prof.intervals[i].hi < prof.intervals[i + 1].lo);
      for (const auto& iv : prof.intervals) {
        CHECK(iv.lo >= -sigma_bound(two_block(3.0, 0.9 * dc, 2)));
        CHECK(iv.hi <= sigma_bound(two_block(3.0, 0.9 * dc, 2)));
      }
    }
  }

  TEST_CASE("gap estimate needs a non-zero psi") {
    const ModelSpec sc = semicircle_model(1);
    const SpectralData s = analyze(sc, solve_continuation(sc, Complex(2.0, 1e-6)));
    try {
      gap_estimate(s);
      FAIL("expected ZeroPsi");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ZeroPsi);
    }
    const ModelSpec tb = two_block(3.0, 0.25, 2);
    const SpectralData e = analyze(tb, solve_continuation(tb, Complex(2.6500222659, 1e-8)));
    const double d = gap_estimate(e);
    CHECK(d > 0.0);
    CHECK(d == doctest::Approx(4.0 * std::pow(std::abs(e.sigma), 3) / (27.0 * e.f_abs_m * e.psi * e.psi)));
  }

  TEST_CASE("square-root edge of the semicircle") {
    FitOptions o;
    o.side = -1;
    o.omega_min = 1e-3;
    o.omega_max = 0.1;
    const ShapeFit f = fit_shape(semicircle_model(1), 2.0, ShapeKind::Edge, o);
    CHECK(std::abs(f.exponent - 0.5) < 0.05);
    CHECK(f.residual < 0.05);
    CHECK(f.h[0] > 0.0);
  }

  TEST_CASE("cube-root cusp with a window-stable amplitude") {
    const ModelSpec m = two_block(3.0, oracle::delta_c(3.0), 2);
    const auto pts = classify(pipeline(m));
    const auto cusp = std::find_if(pts.begin(), pts.end(), [](const SingularPoint& s) { return s.kind == ShapeKind::Cusp; });
    REQUIRE(cusp != pts.end());
    FitOptions a;
    a.interval_length = 4.6;
    FitOptions b = a;
    b.omega_min = 2e-4;
    b.omega_max = 5e-3;
    const ShapeFit fa = fit_shape(m, cusp->tau, ShapeKind::Cusp, a);
    const ShapeFit fb = fit_shape(m, cusp->tau, ShapeKind::Cusp, b);
    CHECK(std::abs(fa.exponent - 1.0 / 3.0) < 0.05);
    CHECK(std::abs(fb.exponent - 1.0 / 3.0) < 0.05);
    for (int x = 0; x < 2; ++x) CHECK(fa.h[x] == doctest::Approx(fb.h[x]).epsilon(0.1));
  }

  TEST_CASE("non-zero minimum scale is comparable to the minimum") {
    const ModelSpec m = two_block(3.0, 1.1 * oracle::delta_c(3.0), 2);
    const auto pts = classify(pipeline(m));
    const auto mn = std::find_if(pts.begin(), pts.end(), [](const SingularPoint& s) { return s.kind == ShapeKind::NonzeroMin; });
    REQUIRE(mn != pts.end());
    FitOptions o;
    o.scale_hint = mn->value;
    const ShapeFit f = fit_shape(m, mn->tau, ShapeKind::NonzeroMin, o);
    CHECK(f.scale / mn->value < 3.0);
    CHECK(mn->value / f.scale < 3.0);
  }

  TEST_CASE("edges of a wide gap grow like a square root") {
    RVec a(2);
    a << -2.0, 2.0;
    RMat S(2, 2);
    S << 0.25, 0.025, 0.025, 0.25;
    const ModelSpec m = ModelSpec::build(a, S);
    const SupportProfile p = pipeline(m, 2e-3);
    REQUIRE(p.intervals.size() == 2);
    const GapInfo g = p.gaps[0];
    REQUIRE(g.delta() > 0.5);
    for (int side : {-1, 1}) {
      FitOptions o;
      o.side = side;
      // square-root regime of the profile: omega well below the gap length
      o.omega_min = g.delta() / 1000.0;
      o.omega_max = g.delta() / 100.0;
      o.scale_hint = g.delta();
      const ShapeFit f = fit_shape(m, side < 0 ? g.left : g.right, ShapeKind::Edge, o);
      CHECK(f.exponent >= 0.45);
      CHECK(f.exponent <= 0.55);
    }
  }

  TEST_CASE("fit errors") {
    FitOptions o;
    CHECK_THROWS_AS(fit_shape(semicircle_model(1), 2.0, ShapeKind::Edge, o), Error);
    o.side = -1;
    o.omega_min = 0.1;
    o.omega_max = 0.01;
    try {
      fit_shape(semicircle_model(1), 2.0, ShapeKind::Edge, o);
      FAIL("expected WindowTooSmall");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::WindowTooSmall);
    }
  }
}
