#include <catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace adjmm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

BlackBoxPair diag10() { return BlackBoxPair::dense(DenseMatrix::from_rows({{1, 0}, {0, 0}}), DenseMatrix(2, 2)); }

}  // namespace

TEST_CASE("coefficients_one by hand", "[estimator_one]") {
  BlackBoxPair id = BlackBoxPair::dense(DenseMatrix::diagonal({1, 1}), DenseMatrix(2, 2));
  const auto c0 = coefficients_one(id, {{1, 0}, {1, 0}, 1.0}, {{0, 1}, {0, 1}});
  CHECK(c0.a == 0.0);
  CHECK(c0.b == 0.0);

  BlackBoxPair pair = diag10();
  const auto c1 = coefficients_one(pair, {{0, 1}, {1, 0}, 0.0}, {{1, 0}, {0, 1}});
  CHECK(c1.a == 1.0);
  CHECK(c1.b == 0.0);
  CHECK(pair.n_forward() == 2);
  CHECK(pair.n_adjoint() == 2);
}

TEST_CASE("coefficients_one matches dense evaluation", "[estimator_one][property]") {
  const auto A = testing::gaussian(5, 4, 31), V = testing::gaussian(5, 4, 32);
  const auto M = A - V;
  BlackBoxPair pair = BlackBoxPair::dense(A, V);
  RngState rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const IteratePair it = testing::random_iterate(M, rng);
    const DirectionPair dir = sample_directions(rng, it);
    const auto c = coefficients_one(pair, it, dir);
    const double a = testing::dense_bilinear(M, it.u, dir.x) + testing::dense_bilinear(M, dir.w, it.v);
    const double b = 2.0 * (testing::dense_bilinear(M, dir.w, dir.x) - testing::dense_bilinear(M, it.u, it.v));
    CHECK_THAT(c.a, WithinAbs(a, 1e-12));
    CHECK_THAT(c.b, WithinAbs(b, 1e-12));
  }
}

TEST_CASE("coefficients_one names a non-finite oracle", "[estimator_one]") {
  ForwardOracle bad{2, 2, [](std::span<const double>) { return Vec{NAN, 0.0}; }};
  BlackBoxPair pair(bad, zero_adjoint_oracle(2, 2));
  CHECK_THROWS_WITH(coefficients_one(pair, {{1, 0}, {1, 0}, 1.0}, {{0, 1}, {0, 1}}),
                    Catch::Matchers::ContainsSubstring("forward oracle"));
}

TEST_CASE("step_size_one closed form", "[estimator_one]") {
  CHECK(step_size_one(1.0, 0.0).tau == 1.0);
  CHECK(step_size_one(-1.0, 0.0).tau == -1.0);

  const StepOne deg = step_size_one(0.0, -2.0);
  CHECK(deg.status == StepStatus::need_resample);
  CHECK(classify_one(0.0, -2.0) == LineShape::maximum_at_zero);
  CHECK(classify_one(0.0, 2.0) == LineShape::unbounded);
  CHECK(classify_one(0.0, 0.0) == LineShape::constant);
  CHECK(classify_one(1e-300, 0.0) == LineShape::unique_maximum);

  const double expected = (2.0 + std::sqrt(13.0)) / 3.0;
  CHECK_THAT(step_size_one(3.0, 4.0).tau, WithinRel(expected, 1e-15));
  const auto golden = golden_section_maximize([](double t) { return line_gain_one(3.0, 4.0, t); }, -10, 10);
  CHECK_THAT(golden.arg, WithinAbs(expected, 1e-8));
}

TEST_CASE("step_size_one is stable when b is large of either sign", "[estimator_one]") {
  // Reference values from the roots of a t^2 - b t - a = 0 in extended precision.
  const long double a = 1e-6L, b = -1e6L;
  const long double h = b / (2 * a);
  const long double ref = 1.0L / (std::sqrt(h * h + 1) - h);
  CHECK_THAT(step_size_one(1e-6, -1e6).tau, WithinRel(static_cast<double>(ref), 1e-12));
  CHECK(step_size_one(1e-6, -1e6).tau > 0.0);
  CHECK(std::isfinite(step_size_one(1e-3, 1e300).tau));
}

TEST_CASE("step sign and ascent sign", "[estimator_one][property]") {
  RngState rng(2);
  for (int i = 0; i < 2000; ++i) {
    const double a = rng.normal() * std::pow(10.0, 4 * rng.normal());
    const double b = rng.normal() * std::pow(10.0, 4 * rng.normal());
    const StepOne s = step_size_one(a, b);
    if (s.status != StepStatus::ok) continue;
    CHECK(std::signbit(s.tau) == std::signbit(a));
    CHECK(s.tau * a >= 0.0);
    // stationarity a + b t - a t^2 = 0, relative to the size of its terms
    const double t = s.tau;
    const double resid = a + b * t - a * t * t;
    CHECK(std::abs(resid) <= 1e-10 * (std::abs(a) + std::abs(b * t) + std::abs(a * t * t)));
  }
}

TEST_CASE("closed-form step beats a dense grid", "[estimator_one][property]") {
  RngState rng(3);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.normal(), b = 4 * rng.normal();
    const StepOne s = step_size_one(a, b);
    REQUIRE(s.status == StepStatus::ok);
    const auto g = grid_maximize([&](double t) { return line_gain_one(a, b, t); }, -100, 100, 10000);
    CHECK(line_gain_one(a, b, s.tau) >= g.value - 1e-8);
  }
}

TEST_CASE("apply_step_one normalizes", "[estimator_one]") {
  const IteratePair next = apply_step_one({{1, 0}, {1, 0}, 0.0}, {{0, 1}, {0, 1}}, 1.0, 0.5);
  const double r = 1.0 / std::sqrt(2.0);
  CHECK_THAT(next.v[0], WithinAbs(r, 1e-15));
  CHECK_THAT(next.v[1], WithinAbs(r, 1e-15));
  CHECK(next.objective == 0.5);
}

TEST_CASE("one step from a hand-built configuration", "[estimator_one]") {
  BlackBoxPair pair = diag10();
  const IteratePair it{{0, 1}, {1, 0}, 0.0};
  const DirectionPair dir{{1, 0}, {0, 1}};
  const auto c = coefficients_one(pair, it, dir);
  const StepOne s = step_size_one(c);
  REQUIRE(s.tau == 1.0);
  const IteratePair next = apply_step_one(it, dir, s.tau, c.objective + 0.5 * s.tau * c.a);
  const double r = 1.0 / std::sqrt(2.0);
  CHECK_THAT(next.u[0], WithinAbs(r, 1e-15));
  CHECK_THAT(next.u[1], WithinAbs(r, 1e-15));
  CHECK_THAT(next.v[0], WithinAbs(r, 1e-15));
  CHECK_THAT(next.v[1], WithinAbs(r, 1e-15));
  CHECK(next.objective == 0.5);
  CHECK_THAT(testing::dense_bilinear(DenseMatrix::diagonal({1, 0}), next.u, next.v), WithinAbs(0.5, 1e-15));
}

TEST_CASE("s(t) from oracle calls agrees with the gain formula", "[estimator_one][property]") {
  const auto A = testing::gaussian(6, 5, 41);
  BlackBoxPair pair = BlackBoxPair::dense(A, DenseMatrix(6, 5));
  RngState rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const IteratePair it = testing::random_iterate(A, rng);
    const DirectionPair dir = sample_directions(rng, it);
    const auto c = coefficients_one(pair, it, dir);
    for (double t : {-3.0, -0.5, 0.25, 2.0}) {
      const Vec p = combine_normalized(it.u, t, dir.w), q = combine_normalized(it.v, t, dir.x);
      CHECK_THAT(testing::dense_bilinear(A, p, q), WithinAbs(c.objective + line_gain_one(c.a, c.b, t), 1e-12));
    }
  }
}

TEST_CASE("run_one on an adjoint pair", "[estimator_one]") {
  const auto M = testing::gaussian(4, 4, 5);
  BlackBoxPair pair = BlackBoxPair::dense(M, M);
  RngState rng(5);
  const auto rep = run_one(pair, {}, rng);
  CHECK(rep.stop_reason == StopReason::adjoint_pair);
  CHECK(std::abs(rep.estimate) <= 1e-12);
  CHECK(rep.iterations == 0);
}

TEST_CASE("run_one finds the norm of diag(1,0)", "[estimator_one]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    BlackBoxPair pair = diag10();
    RngState rng(seed);
    const auto rep = run_one(pair, {}, rng);
    CHECK_THAT(rep.estimate, WithinAbs(1.0, 1e-6));
    CHECK(rep.stop_reason == StopReason::tolerance);
  }
}

TEST_CASE("run_one invariants along a seeded run", "[estimator_one][property]") {
  const auto A = testing::gaussian(50, 50, 51);
  const double sigma1 = jacobi_svd(A).largest();
  BlackBoxPair pair = BlackBoxPair::dense(A, DenseMatrix(50, 50));
  EstimatorConfig cfg;
  cfg.max_iters = 400;
  std::optional<double> prev;
  std::size_t steps = 0;
  cfg.observer = [&](const IteratePair& it, TraceRecord& row) {
    CHECK(std::abs(norm2(it.u) - 1.0) <= 1e-12);
    CHECK(std::abs(norm2(it.v) - 1.0) <= 1e-12);
    const double direct = testing::dense_bilinear(A, it.u, it.v);
    CHECK(std::abs(direct - row.objective) <= 1e-9 * (1.0 + std::abs(row.objective)));
    CHECK(row.objective <= sigma1 + 1e-9);
    if (prev && row.tau && *row.tau != 0.0) {
      ++steps;
      CHECK(row.objective > *prev);
      CHECK(std::abs(row.objective - *prev - 0.5 * *row.tau * *row.a) <= 1e-9 * (1.0 + std::abs(row.objective)));
    }
    if (prev) CHECK(row.objective >= *prev);
    prev = row.objective;
  };
  RngState rng(6);
  const auto rep = run_one(pair, cfg, rng);
  CHECK(steps > 300);
  CHECK(rep.estimate == rep.trace.back().objective);
  CHECK(rep.estimate > 0.5 * sigma1);
}

TEST_CASE("run_one rejects bad configuration", "[estimator_one]") {
  BlackBoxPair pair = diag10();
  RngState rng(7);
  EstimatorConfig cfg;
  cfg.eps = 0.0;
  CHECK_THROWS_AS(run_one(pair, cfg, rng), ConfigError);
  cfg = {};
  cfg.max_iters = 0;
  CHECK_THROWS_AS(run_one(pair, cfg, rng), ConfigError);
  cfg = {};
  cfg.patience = 0;
  CHECK_THROWS_AS(run_one(pair, cfg, rng), ConfigError);
}
