#include <catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace adjmm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

StepCoefficientsTwo coeffs(double a, double b, double c, double d) { return {a, b, c, d}; }

// Partial derivatives of q up to the positive factor (1+t^2)^(3/2) (1+s^2)^(3/2) / (1+other^2).
double dq_dtau(const StepCoefficientsTwo& k, double t, double s) {
  const double n = k.a + k.b * t + k.c * s + k.d * t * s;
  return (k.b + k.d * s) * (1 + t * t) - t * n;
}
double dq_dxi(const StepCoefficientsTwo& k, double t, double s) {
  const double n = k.a + k.b * t + k.c * s + k.d * t * s;
  return (k.c + k.d * t) * (1 + s * s) - s * n;
}

}  // namespace

TEST_CASE("coefficients_two by hand", "[estimator_two]") {
  BlackBoxPair pair = BlackBoxPair::dense(DenseMatrix::diagonal({1, 0}), DenseMatrix(2, 2));
  const auto k1 = coefficients_two(pair, {{1, 0}, {1, 0}, 1.0}, {{0, 1}, {0, 1}});
  CHECK(k1.a == 1.0);
  CHECK(k1.b == 0.0);
  CHECK(k1.c == 0.0);
  CHECK(k1.d == 0.0);
  const auto k2 = coefficients_two(pair, {{1, 0}, {0, 1}, 0.0}, {{0, 1}, {1, 0}});
  CHECK(k2.a == 0.0);
  CHECK(k2.b == 0.0);
  CHECK(k2.c == 1.0);
  CHECK(k2.d == 0.0);
}

TEST_CASE("coefficients_two matches dense evaluation", "[estimator_two][property]") {
  const auto A = testing::gaussian(6, 4, 61), V = testing::gaussian(6, 4, 62);
  const auto M = A - V;
  BlackBoxPair pair = BlackBoxPair::dense(A, V);
  RngState rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const IteratePair it = testing::random_iterate(M, rng);
    const DirectionPair dir = sample_directions(rng, it);
    const auto k = coefficients_two(pair, it, dir);
    CHECK_THAT(k.a, WithinAbs(testing::dense_bilinear(M, it.u, it.v), 1e-12));
    CHECK_THAT(k.b, WithinAbs(testing::dense_bilinear(M, dir.w, it.v), 1e-12));
    CHECK_THAT(k.c, WithinAbs(testing::dense_bilinear(M, it.u, dir.x), 1e-12));
    CHECK_THAT(k.d, WithinAbs(testing::dense_bilinear(M, dir.w, dir.x), 1e-12));
  }
}

TEST_CASE("coefficients_two names a non-finite oracle", "[estimator_two]") {
  AdjointOracle bad{2, 2, [](std::span<const double>) { return Vec{0.0, INFINITY}; }};
  BlackBoxPair pair(dense_forward_oracle(DenseMatrix::diagonal({1, 1})), bad);
  CHECK_THROWS_WITH(coefficients_two(pair, {{1, 0}, {1, 0}, 1.0}, {{0, 1}, {0, 1}}),
                    Catch::Matchers::ContainsSubstring("adjoint oracle"));
}

TEST_CASE("step_sizes_two worked examples", "[estimator_two]") {
  {
    const auto k = coeffs(1, 1, 0, 0);
    CHECK(k.e() == 1.0);
    CHECK(k.f() == 0.0);
    const StepTwo s = step_sizes_two(k);
    REQUIRE(s.status == StepStatus::ok);
    CHECK(s.tau == 1.0);
    CHECK(s.xi == 0.0);
    CHECK_THAT((k.a + s.tau * k.b) * (k.a + s.xi * k.c), WithinAbs(2.0, 1e-15));
    CHECK_THAT(q_squared_reduced(k, s.tau), WithinAbs(2.0, 1e-15));
    const auto g = grid_maximize([&](double t, double x) { return std::pow(q_value(k, t, x), 2); }, -10, 10, 201);
    CHECK_THAT(g.value, WithinAbs(2.0, 1e-9));
    CHECK_THAT(g.tau, WithinAbs(1.0, 1e-4));
    CHECK_THAT(g.xi, WithinAbs(0.0, 1e-4));
  }
  {
    const auto k = coeffs(1, 0, 0, 0);
    CHECK(k.e() == 0.0);
    CHECK(k.f() == 1.0);
    CHECK(step_sizes_two(k).status == StepStatus::need_resample);
    CHECK(classify_two(k) == LineShape::maximum_at_zero);
  }
  {
    const auto k = coeffs(2, 1, 1, 0);
    CHECK(k.e() == 2.0);
    CHECK(k.f() == 4.0);
    const StepTwo s = step_sizes_two(k);
    const double r = std::sqrt(2.0) - 1.0;
    CHECK_THAT(s.tau, WithinRel(r, 1e-15));
    CHECK_THAT(s.xi, WithinRel(r, 1e-15));
    CHECK(std::abs(dq_dtau(k, s.tau, s.xi)) <= 1e-14);
    CHECK(std::abs(dq_dxi(k, s.tau, s.xi)) <= 1e-14);
    const auto g = grid_maximize([&](double t, double x) { return std::pow(q_value(k, t, x), 2); }, -10, 10, 201);
    CHECK_THAT(g.value, WithinAbs(3.0 + 2.0 * std::sqrt(2.0), 1e-9));
  }
}

TEST_CASE("classify_two compares a^2 + c^2 against b^2 + d^2", "[estimator_two]") {
  // e = 0 in each case; c and d are chosen so that only the b^2 + d^2 reading gives these shapes.
  CHECK(classify_two(coeffs(1, 0, 0, 2)) == LineShape::unbounded);
  CHECK(classify_two(coeffs(0, 1, 2, 0)) == LineShape::maximum_at_zero);
  CHECK(classify_two(coeffs(1, 0, 0, 1)) == LineShape::constant);
  CHECK(classify_two(coeffs(1, 1, 0, 0)) == LineShape::unique_maximum);
  // unbounded branch: q^2 increases towards b^2 + d^2 without reaching it
  const auto k = coeffs(1, 0, 0, 2);
  CHECK(q_squared_reduced(k, 10.0) < q_squared_reduced(k, 100.0));
  CHECK(q_squared_reduced(k, 1e6) < 4.0);
}

TEST_CASE("step_sizes_two is stable for large |f/e|", "[estimator_two]") {
  const auto k = coeffs(1e4, 1e-6, 0, 0);  // e = 1e-2, f ~ 1e8, tau ~ e/f
  const StepTwo s = step_sizes_two(k);
  REQUIRE(s.status == StepStatus::ok);
  CHECK_THAT(s.tau, WithinRel(1e-10, 1e-8));
  CHECK(std::abs(dq_dtau(k, s.tau, s.xi)) <= 1e-12 * 1e4);
}

TEST_CASE("step_sizes_two invariants on random coefficients", "[estimator_two][property]") {
  RngState rng(2);
  for (int i = 0; i < 2000; ++i) {
    const auto k = coeffs(std::abs(rng.normal()), rng.normal(), rng.normal(), rng.normal());
    const StepTwo s = step_sizes_two(k);
    if (s.status != StepStatus::ok) continue;
    CHECK(std::signbit(s.tau) == std::signbit(k.e()));
    CHECK(std::abs(k.a + s.tau * k.b) > 0.0);
    CHECK(s.xi == (k.c + s.tau * k.d) / (k.a + s.tau * k.b));
    const double scale = 1.0 + std::abs(k.a) + std::abs(k.b) + std::abs(k.c) + std::abs(k.d);
    const double ft = (1 + s.tau * s.tau) * (1 + s.xi * s.xi) * scale;
    CHECK(std::abs(dq_dtau(k, s.tau, s.xi)) <= 1e-9 * ft);
    CHECK(std::abs(dq_dxi(k, s.tau, s.xi)) <= 1e-9 * ft);
    const double product = (k.a + s.tau * k.b) * (k.a + s.xi * k.c);
    const double reduced = q_squared_reduced(k, s.tau);
    CHECK(std::abs(product - reduced) <= 1e-10 * (1.0 + reduced));
    const double direct = std::pow(q_value(k, s.tau, s.xi), 2);
    CHECK(std::abs(direct - reduced) <= 1e-9 * (1.0 + reduced));
    // ascent: a_{k+1}^2 - a_k^2 = c^2 + tau e
    CHECK(std::abs(reduced - k.a * k.a - (k.c * k.c + s.tau * k.e())) <= 1e-10 * (1.0 + reduced));
    CHECK(std::abs(reduced - k.a * k.a - (k.b * k.b + s.xi * (k.a * k.c + k.b * k.d))) <= 1e-9 * (1.0 + reduced));
  }
}

TEST_CASE("closed-form pair beats a 2-D grid", "[estimator_two][property]") {
  RngState rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto k = coeffs(std::abs(rng.normal()), rng.normal(), rng.normal(), rng.normal());
    const StepTwo s = step_sizes_two(k);
    REQUIRE(s.status == StepStatus::ok);
    const auto g = grid_maximize([&](double t, double x) { return std::pow(q_value(k, t, x), 2); }, -50, 50, 200);
    CHECK(q_squared_reduced(k, s.tau) >= g.value - 1e-6);
  }
}

TEST_CASE("one two-step iteration by hand", "[estimator_two]") {
  BlackBoxPair pair = BlackBoxPair::dense(DenseMatrix::from_rows({{1, 0}, {1, 0}}), DenseMatrix(2, 2));
  const IteratePair it{{1, 0}, {1, 0}, 1.0};
  const DirectionPair dir{{0, 1}, {0, 1}};
  const auto k = coefficients_two(pair, it, dir);
  REQUIRE(k.a == 1.0);
  REQUIRE(k.b == 1.0);
  REQUIRE(k.c == 0.0);
  REQUIRE(k.d == 0.0);
  const StepTwo s = step_sizes_two(k);
  const IteratePair next = apply_step_two(it, dir, k, s.tau, s.xi, std::sqrt(q_squared_reduced(k, s.tau)));
  const double r = 1.0 / std::sqrt(2.0);
  CHECK_THAT(next.u[0], WithinAbs(r, 1e-15));
  CHECK_THAT(next.u[1], WithinAbs(r, 1e-15));
  CHECK(next.v == it.v);
  CHECK_THAT(next.objective, WithinAbs(std::sqrt(2.0), 1e-15));
  CHECK_THAT(testing::dense_bilinear(DenseMatrix::from_rows({{1, 0}, {1, 0}}), next.u, next.v),
             WithinAbs(std::sqrt(2.0), 1e-15));
}

TEST_CASE("apply_step_two keeps the objective nonnegative", "[estimator_two]") {
  const IteratePair it{{1, 0}, {1, 0}, 1.0};
  const DirectionPair dir{{0, 1}, {0, 1}};
  // the closed-form step never makes a + tau b negative on its own
  const auto k = coeffs(1, -3, 0, 0);
  CHECK(k.a + step_sizes_two(k).tau * k.b > 0.0);
  // a + tau b = -2 < 0: u+ is negated
  const IteratePair flipped = apply_step_two(it, dir, k, 1.0, 0.0, 2.0);
  CHECK(flipped.u[0] < 0.0);
  CHECK(flipped.u[1] < 0.0);
  const IteratePair kept = apply_step_two(it, dir, coeffs(1, 1, 0, 0), 1.0, 0.0, 1.4);
  CHECK(kept.u[0] > 0.0);
  CHECK(kept.v == Vec{1, 0});
}

TEST_CASE("run_two reaches the optimum of small examples in one iteration", "[estimator_two]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    BlackBoxPair p2 = BlackBoxPair::dense(DenseMatrix::diagonal({1, 0}), DenseMatrix(2, 2));
    RngState r2(seed);
    const auto rep2 = run_two(p2, {}, r2);
    REQUIRE(rep2.trace.size() >= 2);
    CHECK_THAT(rep2.trace[1].objective, WithinAbs(1.0, 1e-12));
    CHECK_THAT(rep2.estimate, WithinAbs(1.0, 1e-12));

    BlackBoxPair p3 = BlackBoxPair::dense(DenseMatrix::from_rows({{1, 0}, {0, 1}, {0, 0}}), DenseMatrix(3, 2));
    RngState r3(seed);
    const auto rep3 = run_two(p3, {}, r3);
    REQUIRE(rep3.trace.size() >= 2);
    CHECK_THAT(rep3.trace[1].objective, WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("run_two on an adjoint pair", "[estimator_two]") {
  const auto M = testing::gaussian(3, 5, 7);
  BlackBoxPair pair = BlackBoxPair::dense(M, M);
  RngState rng(8);
  const auto rep = run_two(pair, {}, rng);
  CHECK(rep.stop_reason == StopReason::adjoint_pair);
  CHECK(std::abs(rep.estimate) <= 1e-12);
}

TEST_CASE("run_two invariants along a seeded run", "[estimator_two][property]") {
  const auto A = testing::gaussian(30, 20, 71), V = testing::gaussian(30, 20, 72);
  const auto M = A - V;
  const double sigma1 = jacobi_svd(M).largest();
  BlackBoxPair pair = BlackBoxPair::dense(A, V);
  EstimatorConfig cfg;
  cfg.max_iters = 1000;
  cfg.eps = 1e-300;
  std::optional<double> prev;
  cfg.observer = [&](const IteratePair& it, TraceRecord& row) {
    CHECK(std::abs(norm2(it.u) - 1.0) <= 1e-12);
    CHECK(std::abs(norm2(it.v) - 1.0) <= 1e-12);
    const double direct = testing::dense_bilinear(M, it.u, it.v);
    CHECK(std::abs(direct - row.objective) <= 1e-9 * (1.0 + row.objective));
    CHECK(row.objective <= sigma1 + 1e-9);
    if (prev) {
      CHECK(row.objective >= *prev);
      if (row.tau && *row.tau != 0.0) {
        CHECK(row.objective > *prev);
        // the row's a is the previous objective measured afresh
        CHECK(std::abs(*row.a - *prev) <= 1e-9 * (1.0 + *prev));
      }
    }
    prev = row.objective;
  };
  RngState rng(9);
  const auto rep = run_two(pair, cfg, rng);
  REQUIRE(rep.iterations == 1000);
  const auto mins = summarize_min_so_far(rep.trace, "bc_sum");
  for (std::size_t i = 1; i < mins.size(); ++i) CHECK(mins[i].second <= mins[i - 1].second);
  CHECK(mins.back().second < mins.front().second);
  CHECK(rep.estimate >= (1.0 - 1e-3) * sigma1);
}
