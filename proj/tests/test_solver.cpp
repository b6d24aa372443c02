#include "qvelab/solver.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace qvelab;

TEST_SUITE("solver") {
  TEST_CASE("fixed point at z = i") {
    const ModelSpec m = semicircle_model(4);
    const Solution s = solve_fixed_point(m, Complex(0, 1));
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int i = 0; i < 4; ++i) CHECK(std::abs(s.m[i] - Complex(0, g)) < 1e-11);
    CHECK(s.residual <= 1e-12);
  }

  TEST_CASE("small eta on the imaginary axis") {
    const Solution s = solve_continuation(semicircle_model(3), Complex(0, 1e-4));
    for (int i = 0; i < 3; ++i) CHECK(std::abs(s.m[i] - Complex(0, 1)) < 1e-4);
  }

  TEST_CASE("two_block against an independent two-component iteration") {
    const double l = 3.0, d = 0.5;
    const Complex z(0, 2);
    Complex mu(0, 1), nu(0, 1);
    for (int k = 0; k < 2000; ++k) {
      const Complex mu1 = -1.0 / (z + (1 - d) * l * nu);
      const Complex nu1 = -1.0 / (z + d * l * mu + (1 - d) * nu);
      mu = mu1;
      nu = nu1;
    }
    const ModelSpec m = two_block(l, d, 2);
    const Solution s = solve_fixed_point(m, z);
    CHECK(s.residual < 1e-12);
    CHECK(std::abs(s.m[0] - mu) < 1e-11);
    CHECK(std::abs(s.m[1] - nu) < 1e-11);
  }

  TEST_CASE("Newton close to the real axis") {
    const ModelSpec m = semicircle_model(2);
    const Solution warm = solve_continuation(m, Complex(0.5, 1e-4));
    SolverConfig cfg;
    const Solution s = solve_newton(m, Complex(0.5, 1e-8), warm.m, cfg);
    CHECK(std::abs(s.m[0] - Complex(-0.25, 0.968246)) < 1e-6);
    CHECK(std::abs(s.m[0] - oracle::m_sc(Complex(0.5, 1e-8))) < 1e-10);

    const Solution out_warm = solve_continuation(m, Complex(3.0, 1e-4));
    const Solution out = solve_newton(m, Complex(3.0, 1e-8), out_warm.m, cfg);
    CHECK(out.m[0].real() == doctest::Approx((-3.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-9));
    CHECK(std::abs(out.m[0].imag()) < 1e-7);
  }

  TEST_CASE("Newton rejects initial guesses below the axis") {
    CVec init = CVec::Constant(2, Complex(0.1, -0.5));
    CHECK_THROWS_AS(solve_newton(semicircle_model(2), Complex(0.2, 0.1), init), Error);
    CHECK_THROWS_AS(solve_fixed_point(semicircle_model(2), Complex(0.2, 0.1), init), Error);
  }

  TEST_CASE("semicircle density on a grid") {
    const ModelSpec m = semicircle_model(3);
    const GridSolution g = solve_grid(m, make_grid(-3, 3, 0.01), 1e-6);
    REQUIRE(g.all_converged());
    double worst = 0.0;
    for (std::size_t k = 0; k < g.tau_grid.size(); ++k) {
      CHECK(g.avg_density[k] >= 0.0);
      if (std::abs(g.tau_grid[k]) <= 1.9) worst = std::max(worst, std::abs(g.avg_density[k] - oracle::rho_sc(g.tau_grid[k])));
    }
    CHECK(worst < 1e-3);
    CHECK(grid_mass(g) == doctest::Approx(1.0).epsilon(0.01));
  }

  TEST_CASE("empty grid and eta floor") {
    const GridSolution g = solve_grid(semicircle_model(2), {}, 1e-6);
    CHECK(g.tau_grid.empty());
    CHECK(g.solutions.empty());
    CHECK_THROWS_AS(solve_grid(semicircle_model(2), {0.0}, 1e-8), Error);
    CHECK(make_grid(-1, 1, 0.5).size() == 5);
    CHECK(make_grid(0, 1, 0.3).back() == doctest::Approx(0.9));
  }

  TEST_CASE("cusp family has two interior zeros") {
    const ModelSpec m = two_block(3.0, oracle::delta_c(3.0), 2);
    const GridSolution g = solve_grid(m, make_grid(-2.8, 2.8, 0.002), 1e-6);
    REQUIRE(g.all_converged());
    int interior_minima = 0;
    for (std::size_t k = 1; k + 1 < g.tau_grid.size(); ++k) {
      const double d = g.avg_density[k];
      if (d < g.avg_density[k - 1] && d < g.avg_density[k + 1] && d < 0.15) {
        ++interior_minima;
        CHECK(std::abs(std::abs(g.tau_grid[k]) - 1.9335) < 0.01);
      }
    }
    CHECK(interior_minima == 2);
  }

  TEST_CASE("structural bounds") {
    const ModelSpec m = semicircle_model(3);
    const Solution s = solve_fixed_point(m, Complex(0, 1));
    StructuralBoundsReport r = check_structural_bounds(s, m);
    CHECK(r.trivial_bound);
    REQUIRE(r.l2_bound.has_value());
    CHECK(*r.l2_bound);
    CHECK(r.l2_norm == doctest::Approx((std::sqrt(5.0) - 1.0) / 2.0));

    const Solution a = solve_continuation(m, Complex(0.7, 0.1));
    r = check_structural_bounds(a, m);
    REQUIRE(r.symmetry.has_value());
    CHECK(*r.symmetry);
    CHECK(r.symmetry_error < 1e-10);

    const Solution out = solve_continuation(m, Complex(2.5, 1e-6));
    CHECK(m.average(RVec(out.m.imag())) < 1e-4);
    r = check_structural_bounds(out, m);
    REQUIRE(r.support_bound.has_value());
    CHECK(*r.support_bound);
  }

  TEST_CASE("contraction certificate in the hyperbolic metric") {
    for (Complex z : {Complex(0.0, 0.1), Complex(0.8, 0.3), Complex(-1.5, 1.0)}) {
      ContractionTrace trace;
      solve_fixed_point(two_block(3.0, 0.25, 4), z, std::nullopt, {}, &trace);
      const auto& h = trace.hyperbolic_steps;
      REQUIRE(h.size() > 10);
      // The hyperbolic distance is quadratic in the displacement, so the
      // per-step contraction rate applies to its square root.
      for (std::size_t k = h.size() / 2; k + 1 < h.size(); ++k) {
        if (h[k] < 1e-24) break;
        CHECK(std::sqrt(h[k + 1] / h[k]) <= trace.guaranteed_rate + 0.05);
      }
    }
  }

  TEST_CASE("Stieltjes positivity and mass at moderate eta") {
    const ModelSpec m = two_block(3.0, 0.25, 4);
    const double s = sigma_bound(m);
    const GridSolution g = solve_grid(m, make_grid(-s - 1, s + 1, 0.002), 1e-4);
    REQUIRE(g.all_converged());
    for (int x = 0; x < 4; ++x) {
      double mass = 0.0;
      for (std::size_t k = 1; k < g.tau_grid.size(); ++k) {
        const double h = g.tau_grid[k] - g.tau_grid[k - 1];
        mass += 0.5 * h * (g.solutions[k].m[x].imag() + g.solutions[k - 1].m[x].imag()) / kPi;
      }
      CHECK(mass == doctest::Approx(1.0).epsilon(0.01));
    }
    for (const auto& sol : g.solutions) CHECK((sol.m.imag().array() > 0.0).all());
    // Far outside the support v decays linearly in eta.
    const double v1 = solve_continuation(m, Complex(s + 2, 1e-3)).m.imag().maxCoeff();
    const double v2 = solve_continuation(m, Complex(s + 2, 1e-4)).m.imag().maxCoeff();
    CHECK(v1 / v2 == doctest::Approx(10.0).epsilon(1e-3));
  }

  TEST_CASE("components are comparable under primitivity") {
    const ModelSpec m = two_block(3.0, 0.25, 4);
    const GridSolution g = solve_grid(m, make_grid(-1.5, 1.5, 0.05), 1e-6);
    for (const auto& sol : g.solutions) {
      const RVec v = sol.m.imag();
      CHECK(v.minCoeff() / v.maxCoeff() > 0.05);
    }
  }

  TEST_CASE("threads give identical grids") {
    const ModelSpec m = two_block(3.0, 0.25, 4);
    SolverConfig one, four;
    four.threads = 4;
    const auto grid = make_grid(-2.5, 2.5, 0.05);
    const GridSolution a = solve_grid(m, grid, 1e-6, one);
    const GridSolution b = solve_grid(m, grid, 1e-6, four);
    for (std::size_t k = 0; k < grid.size(); ++k) CHECK((a.solutions[k].m - b.solutions[k].m).cwiseAbs().maxCoeff() == 0.0);
  }
}
