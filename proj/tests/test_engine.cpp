#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "inertial_prox/engine.hpp"
#include "inertial_prox/operators.hpp"
#include "test_support.hpp"

using namespace iprox;
using iprox::testing::TestRng;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Vector scalar(double x) { return vec({x}); }

// x -> x / (1 + lambda), the resolvent of A(x) = x.
auto shrink(double lambda) {
  return [lambda](const Vector& x) -> Vector { return x / (1.0 + lambda); };
}

}  // namespace

TEST(InertialExtrapolate, ConstantHistoryIsFixed) {
  const Vector v = vec({1.5, -2.0, 3.0});
  EXPECT_EQ(inertial_extrapolate(v, v, v, {0.2, -0.1, 1.0, 1.0}), v);
}

TEST(InertialExtrapolate, NoInertiaReturnsCurrent) {
  EXPECT_EQ(inertial_extrapolate(vec({1, 2}), vec({5, 6}), vec({-1, 0}), {0.0, 0.0, 1.0, 1.0}), vec({1, 2}));
}

TEST(InertialExtrapolate, SymmetricCorrectionsCancel) {
  const Vector y = inertial_extrapolate(vec({2, 2}), vec({1, 1}), vec({0, 0}), {0.1, -0.1, 1.0, 1.0});
  EXPECT_NEAR((y - vec({2, 2})).norm(), 0.0, 1e-15);
}

TEST(InertialExtrapolate, DimensionMismatchThrows) {
  EXPECT_THROW(inertial_extrapolate(vec({1, 2}), vec({1}), vec({1, 2}), {}), InvalidArgument);
}

TEST(PpaStep, ScalarShrinkHandValues) {
  const InertialParams p{0.0, 0.0, 1.0, 1.0};
  auto s = EngineState::start_at(scalar(2.0));
  s = ppa_step(shrink(1.0), s, p);
  EXPECT_DOUBLE_EQ(s.x_curr[0], 1.0);
  s = ppa_step(shrink(1.0), s, p);
  EXPECT_DOUBLE_EQ(s.x_curr[0], 0.5);
  EXPECT_EQ(s.iter, 2u);
  EXPECT_DOUBLE_EQ(s.x_prev[0], 1.0);
  EXPECT_DOUBLE_EQ(s.x_prev2[0], 2.0);
}

TEST(PpaStep, IdentityResolventShiftsWindow) {
  const InertialParams p{0.2, -0.1, 1.0, 1.0};
  EngineState s{vec({0.0}), vec({1.0}), vec({3.0}), vec({3.5}), 4};
  const auto next = ppa_step(identity_resolvent(1), s, p);
  EXPECT_DOUBLE_EQ(next.x_curr[0], 3.5);
  EXPECT_DOUBLE_EQ(next.x_prev[0], 3.0);
  EXPECT_DOUBLE_EQ(next.x_prev2[0], 1.0);
  EXPECT_EQ(next.iter, 5u);
  // y is exactly the extrapolation formula of the new window
  EXPECT_EQ(next.y_curr, inertial_extrapolate(next.x_curr, next.x_prev, next.x_prev2, p));
}

TEST(PpaStep, RelaxationMixesExtrapolationAndResolvent) {
  const InertialParams p{0.0, 0.0, 1.0, 0.5};
  auto s = ppa_step(shrink(1.0), EngineState::start_at(scalar(2.0)), p);
  EXPECT_DOUBLE_EQ(s.x_curr[0], 0.5 * 2.0 + 0.5 * 1.0);
}

TEST(PpaStep, ResolventFailurePropagates) {
  auto bad = [](const Vector&) -> Vector { throw NumericalError("boom"); };
  EXPECT_THROW(ppa_step(bad, EngineState::start_at(scalar(1.0)), {}), NumericalError);
}

TEST(Run, ZeroOperatorConvergesImmediately) {
  RunConfig cfg;
  cfg.tol = 1e-12;
  const auto rec = run(identity_resolvent(3), vec({1, -2, 3}), {0.2, -0.1, 1.0, 1.0}, cfg);
  EXPECT_EQ(rec.status, RunStatus::Converged);
  EXPECT_EQ(rec.iterations_used, 1u);
  ASSERT_EQ(rec.residuals.size(), 1u);
  EXPECT_EQ(rec.residuals[0], 0.0);
}

TEST(Run, DiagonalSpdConvergesToOrigin) {
  Matrix q = Matrix::Zero(2, 2);
  q(0, 0) = 1.0;
  q(1, 1) = 2.0;
  RunConfig cfg;
  cfg.max_iter = 500;
  cfg.tol = 1e-10;
  const auto rec = run(resolvent_linear(LinearMonotoneProblem(q, 1.0)), vec({1, 1}), {0.1, -0.05, 1.0, 1.0}, cfg);
  EXPECT_EQ(rec.status, RunStatus::Converged);
  EXPECT_LE(rec.final_point.norm(), 1e-8);
  EXPECT_LE(rec.residuals.back(), 1e-10);
  EXPECT_EQ(rec.residuals.size(), rec.iterations_used);
}

TEST(Run, MaxIterMustBePositive) {
  RunConfig cfg;
  cfg.max_iter = 0;
  EXPECT_THROW(run(identity_resolvent(1), scalar(1.0), {}, cfg), InvalidArgument);
}

TEST(Run, SingleIterationRecord) {
  RunConfig cfg;
  cfg.max_iter = 1;
  cfg.tol = 1e-30;
  const auto rec = run(shrink(1.0), scalar(4.0), {}, cfg);
  EXPECT_EQ(rec.iterations_used, 1u);
  EXPECT_EQ(rec.status, RunStatus::MaxIterReached);
  EXPECT_DOUBLE_EQ(rec.final_point[0], 2.0);
}

TEST(Run, NonFiniteIterateStopsAsDiverged) {
  int calls = 0;
  auto blowup = [&calls](const Vector& x) -> Vector {
    if (++calls == 3) return Vector::Constant(x.size(), std::numeric_limits<double>::quiet_NaN());
    return 2.0 * x;
  };
  RunConfig cfg;
  cfg.max_iter = 100;
  const auto rec = run(blowup, scalar(1.0), {}, cfg);
  EXPECT_EQ(rec.status, RunStatus::Diverged);
  EXPECT_EQ(rec.iterations_used, 3u);
}

TEST(Run, StepNormAndCustomMetrics) {
  RunConfig cfg;
  cfg.max_iter = 3;
  cfg.tol = 1e-30;
  cfg.stop_metric = StopMetric::StepNorm;
  auto rec = run(shrink(1.0), scalar(8.0), {}, cfg);
  EXPECT_EQ(rec.residuals, (std::vector<double>{4.0, 2.0, 1.0}));

  cfg.stop_metric = StopMetric::Custom;
  cfg.custom_metric = [](const EngineState& s, const Vector& x_next) { return x_next[0] + s.x_curr[0]; };
  rec = run(shrink(1.0), scalar(8.0), {}, cfg);
  EXPECT_EQ(rec.residuals, (std::vector<double>{12.0, 6.0, 3.0}));

  cfg.custom_metric = nullptr;
  EXPECT_THROW(run(shrink(1.0), scalar(8.0), {}, cfg), InvalidArgument);
}

TEST(Run, LyapunovRequiresUnitRelaxation) {
  RunConfig cfg;
  cfg.record_lyapunov = scalar(0.0);
  EXPECT_THROW(run(shrink(1.0), scalar(1.0), {0.1, 0.0, 1.0, 0.5}, cfg), InvalidArgument);
}

// theta = delta = 0 must reproduce x_{n+1} = J(x_n) bit for bit.
TEST(Run, ReductionToClassicalPpaIsBitIdentical) {
  TestRng rng(11);
  const Matrix q = rng.spd(10);
  const auto j = resolvent_linear(LinearMonotoneProblem(q, 1.0));
  const Vector x0 = rng.vector(10);
  RunConfig cfg;
  cfg.max_iter = 200;
  cfg.tol = 1e-300;
  cfg.record_iterates = true;
  const auto rec = run(j, x0, {0.0, 0.0, 1.0, 1.0}, cfg);
  ASSERT_EQ(rec.iterates.size(), 200u);
  Vector x = x0;
  for (std::size_t n = 0; n < 200; ++n) {
    x = j(x);
    ASSERT_EQ(std::memcmp(x.data(), rec.iterates[n].data(), sizeof(double) * 10), 0) << "iteration " << n;
  }
}

TEST(RateBound, UnitFactors) {
  EXPECT_DOUBLE_EQ(rate_bound({0.0, 0.0, 1.0, 1.0}, vec({1.0, 0.0}), vec({0.0, 0.0}), 2), 3.0);
}

TEST(RateBound, FormulaValue) {
  // 3 (1.02)(1/0.36)(1.0)(4)/10
  EXPECT_NEAR(rate_bound({0.1, -0.1, 1.0, 1.0}, vec({2.0, 0.0}), vec({0.0, 0.0}), 11), 3.4, 1e-12);
}

TEST(RateBound, ZeroAtSolutionAndErrors) {
  for (long n : {2, 5, 100}) EXPECT_EQ(rate_bound({0.1, -0.1, 1.0, 1.0}, vec({1, 2}), vec({1, 2}), n), 0.0);
  EXPECT_THROW(rate_bound({}, vec({1}), vec({0}), 1), InvalidArgument);
  EXPECT_THROW(rate_bound({0.1, 0.0, 1.0, 0.5}, vec({1}), vec({0}), 3), InvalidArgument);
}

TEST(LyapunovValues, ZeroAtSolution) {
  const Vector s = vec({1, -1});
  auto v = lyapunov_values(s, s, s, s, {0.2, -0.1, 1.0, 1.0});
  EXPECT_EQ(v.gamma, 0.0);
  EXPECT_EQ(v.gamma_bar, 0.0);
}

TEST(LyapunovValues, DirectSubstitution) {
  auto v = lyapunov_values(vec({1, 0}), vec({0, 0}), vec({0, 0}), vec({0, 0}), {0.0, 0.0, 1.0, 1.0});
  EXPECT_DOUBLE_EQ(v.gamma, 2.0);
  EXPECT_DOUBLE_EQ(v.gamma_bar, 2.0);
  // nonzero x_prev - x_prev2 picks up c1 = 1
  v = lyapunov_values(vec({1, 0}), vec({0, 0}), vec({0, 3}), vec({0, 0}), {0.0, 0.0, 1.0, 1.0});
  EXPECT_DOUBLE_EQ(v.gamma_bar, v.gamma + 9.0);
}

TEST(LyapunovValues, DimensionMismatch) {
  EXPECT_THROW(lyapunov_values(vec({1}), vec({1, 2}), vec({1}), vec({1}), {}), InvalidArgument);
}

// The three-point expansion used to expand ||y_n - x*||^2.
TEST(Identities, ThreePointExpansion) {
  TestRng rng(3);
  for (int k = 0; k < 1000; ++k) {
    const Index d = rng.integer(1, 20);
    const Vector x = rng.vector(d), y = rng.vector(d), z = rng.vector(d);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    const double lhs = ((1 + a) * x - (a - b) * y - b * z).squaredNorm();
    const double rhs = (1 + a) * x.squaredNorm() - (a - b) * y.squaredNorm() - b * z.squaredNorm() +
                       (1 + a) * (a - b) * (x - y).squaredNorm() + b * (1 + a) * (x - z).squaredNorm() -
                       b * (a - b) * (y - z).squaredNorm();
    const double scale = std::max({1.0, std::abs(lhs), x.squaredNorm() + y.squaredNorm() + z.squaredNorm()});
    EXPECT_LE(std::abs(lhs - rhs), 1e-10 * scale);
  }
}

namespace {

struct CertifiedRun {
  RunRecord record;
  InertialParams params;
  Vector x0;
};

std::vector<CertifiedRun> random_certified_runs(unsigned seed, int count, std::size_t iters) {
  TestRng rng(seed);
  std::vector<CertifiedRun> out;
  for (int k = 0; k < count; ++k) {
    const Index d = rng.integer(2, 30);
    const double theta = rng.uniform(0.0, 0.33);
    const double delta = rng.uniform(0.999 * delta_lower_bound(theta), 0.0);
    const InertialParams p{theta, delta, 1.0, 1.0};
    const Vector x0 = rng.vector(d);
    RunConfig cfg;
    cfg.max_iter = iters;
    cfg.tol = 1e-300;
    cfg.record_lyapunov = Vector::Zero(d);
    cfg.record_iterates = true;
    auto rec = run(resolvent_linear(LinearMonotoneProblem(rng.spd(d), 1.0)), x0, p, cfg);
    out.push_back({std::move(rec), p, x0});
  }
  return out;
}

}  // namespace

TEST(Certificates, LyapunovMonotoneAndRateBoundHold) {
  for (const auto& r : random_certified_runs(21, 15, 300)) {
    const auto cert = check_certificates(r.record, r.params, r.x0);
    EXPECT_TRUE(cert.ok()) << "theta=" << r.params.theta << " delta=" << r.params.delta;
    EXPECT_GE(cert.min_gamma, -1e-12);
    // independent recomputation of the bound from rate_bound()
    double running = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j + 1 < r.record.residuals.size(); j += 37) {
      running = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i <= j; ++i) running = std::min(running, r.record.residuals[i] * r.record.residuals[i]);
      EXPECT_LE(running, rate_bound(r.params, r.x0, Vector::Zero(r.x0.size()), static_cast<long>(j + 2)));
    }
  }
}

TEST(Certificates, StepsVanishAlongConvergentRuns) {
  for (const auto& r : random_certified_runs(5, 8, 200)) {
    const auto& it = r.record.iterates;
    std::vector<double> steps;
    Vector prev = r.x0;
    for (const auto& x : it) {
      steps.push_back((x - prev).norm());
      prev = x;
    }
    const std::size_t q = steps.size() / 4;
    double first = 0, last = 0;
    for (std::size_t i = 0; i < q; ++i) {
      first += steps[i];
      last += steps[steps.size() - 1 - i];
    }
    EXPECT_LT(last / q, first / q);
  }
}

TEST(Certificates, DetectsOutOfRegionViolation) {
  // delta far below the admissible bound voids c2 > 0, so the rate check must fail.
  const InertialParams p{0.3, -0.9, 1.0, 1.0};
  RunConfig cfg;
  cfg.max_iter = 20;
  cfg.tol = 1e-300;
  cfg.record_lyapunov = Vector::Zero(2);
  Matrix q = Matrix::Identity(2, 2);
  const Vector x0 = vec({1.0, -1.0});
  const auto rec = run(resolvent_linear(LinearMonotoneProblem(q, 1.0)), x0, p, cfg);
  const auto cert = check_certificates(rec, p, x0);
  EXPECT_FALSE(cert.ok());
  ASSERT_TRUE(cert.rate_violation.has_value());
  EXPECT_EQ(*cert.rate_violation, 2u);
}

TEST(Certificates, RequiresExtrapolationResidualAndTrace) {
  RunConfig cfg;
  cfg.stop_metric = StopMetric::StepNorm;
  cfg.record_lyapunov = scalar(0.0);
  const auto rec = run(shrink(1.0), scalar(1.0), {}, cfg);
  EXPECT_THROW(check_certificates(rec, {}, scalar(1.0)), InvalidArgument);
  RunConfig plain;
  EXPECT_THROW(check_certificates(run(shrink(1.0), scalar(1.0), {}, plain), {}, scalar(1.0)), InvalidArgument);
}
