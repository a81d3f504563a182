#include <cmath>
#include <cstdlib>
#include <set>

#include <gtest/gtest.h>

#include "inertial_prox/bench.hpp"

using namespace iprox;

TEST(Rng, EngineMatchesReferenceSequence) {
  // 10000th output of the default-seeded mt19937_64 is fixed by the C++ standard.
  Rng rng(Seed{5489});
  std::uint64_t last = 0;
  for (int i = 0; i < 10000; ++i) last = rng.next_u64();
  EXPECT_EQ(last, 9981545732273789042ull);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(Seed{42}), b(Seed{42}), c(Seed{43});
  const Matrix ma = a.normal_matrix(4, 5);
  EXPECT_EQ(ma, b.normal_matrix(4, 5));
  EXPECT_NE(ma, c.normal_matrix(4, 5));
}

TEST(Rng, DistributionsLookRight) {
  Rng rng(Seed{1});
  const int n = 200000;
  double sum = 0, sq = 0, usum = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    usum += u;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
  EXPECT_NEAR(usum / n, 0.5, 0.005);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.below(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
  EXPECT_THROW(rng.below(0), InvalidArgument);
}

TEST(Rng, SampleWithoutReplacementIsDistinct) {
  Rng rng(Seed{3});
  const auto s = rng.sample_without_replacement(5, 20, 20);
  std::set<Index> uniq(s.begin(), s.end());
  EXPECT_EQ(uniq.size(), 20u);
  EXPECT_EQ(*uniq.begin(), 5);
  EXPECT_EQ(*uniq.rbegin(), 24);
  EXPECT_THROW(rng.sample_without_replacement(0, 3, 4), InvalidArgument);
}

TEST(Generators, DifferenceMatrix) {
  const Matrix d = difference_matrix(3);
  Matrix expect(2, 3);
  expect << 1, -1, 0, 0, 1, -1;
  EXPECT_EQ(d, expect);
  EXPECT_THROW(difference_matrix(1), InvalidArgument);
}

TEST(Generators, BasisPursuit) {
  const auto inst = gen_basis_pursuit(50, 20, 4, Seed{9});
  EXPECT_EQ(inst.a.rows(), 20);
  EXPECT_EQ(inst.a.cols(), 50);
  EXPECT_EQ((inst.u_true.array() != 0.0).count(), 4);
  EXPECT_EQ(inst.b, inst.a * inst.u_true);
  const auto again = gen_basis_pursuit(50, 20, 4, Seed{9});
  EXPECT_EQ(again.a, inst.a);
  EXPECT_EQ(again.u_true, inst.u_true);
  EXPECT_EQ(default_bp_sparsity(20), 4);
  EXPECT_EQ(default_bp_sparsity(2), 1);
  EXPECT_THROW(gen_basis_pursuit(10, 10, 1, Seed{1}), InvalidArgument);
  EXPECT_THROW(gen_basis_pursuit(10, 5, 0, Seed{1}), InvalidArgument);
}

TEST(Generators, TvLs) {
  const auto inst = gen_tv_ls(60, 59, 40, std::nullopt, 5, Seed{4});
  EXPECT_EQ(inst.f.rows(), 40);
  EXPECT_EQ(inst.d.rows(), 59);
  EXPECT_LE(((inst.d * inst.x_true).array() != 0.0).count(), 4);
  const double noise = (inst.b - inst.f * inst.x_true).norm();
  EXPECT_GT(noise, 0.0);
  EXPECT_LT(noise, 0.05 * (inst.f * inst.x_true).norm());
  const auto clean = gen_tv_ls(60, 59, 40, 0.0, 5, Seed{4});
  EXPECT_EQ(clean.b, clean.f * clean.x_true);
  EXPECT_THROW(gen_tv_ls(10, 10, 5, std::nullopt, 2, Seed{1}), InvalidArgument);
  EXPECT_THROW(gen_tv_ls(10, 9, 5, -1.0, 2, Seed{1}), InvalidArgument);
}

TEST(Generators, TwoSubspaceAndLinearMonotone) {
  const auto f = gen_two_subspace(std::numbers::pi / 6);
  EXPECT_EQ(f.v0, (Vector(2) << 1.0, 0.0).finished());
  EXPECT_THROW(gen_two_subspace(0.0), InvalidArgument);
  EXPECT_THROW(gen_two_subspace(std::numbers::pi / 2), InvalidArgument);

  const auto lm = gen_linear_monotone(8, 1.0, Seed{2});
  const auto eig = Eigen::SelfAdjointEigenSolver<Matrix>(lm.problem.q()).eigenvalues();
  EXPECT_GE(eig.minCoeff(), 0.1 - 1e-12);
  EXPECT_EQ(lm.x_star, Vector::Zero(8));
  EXPECT_EQ(gen_linear_monotone(8, 1.0, Seed{2}, true).x0, Vector::Zero(8));
}

namespace {

std::vector<MethodSpec> ppa_methods() {
  return {{"plain", {0.0, 0.0, 1.0, 1.0}, Family::GenericPPA},
          {"one-step", {0.2, 0.0, 1.0, 1.0}, Family::GenericPPA},
          {"two-step", {0.2, -0.05, 1.0, 1.0}, Family::GenericPPA},
          {"relaxed", {0.1, -0.02, 1.0, 0.8}, Family::GenericPPA}};
}

}  // namespace

TEST(Comparison, RowsFollowMethodOrderAndThreadCountDoesNotMatter) {
  const BenchInstance inst =
      std::make_shared<const LinearMonotoneInstance>(gen_linear_monotone(20, 1.0, Seed{6}));
  RunConfig cfg;
  cfg.tol = 1e-10;
  const auto serial = run_comparison(inst, ppa_methods(), cfg, Seed{6}, 1);
  const auto parallel = run_comparison(inst, ppa_methods(), cfg, Seed{6}, 4);
  ASSERT_EQ(serial.rows.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(serial.rows[i].method, ppa_methods()[i].name);
    EXPECT_EQ(parallel.rows[i].method, serial.rows[i].method);
    EXPECT_EQ(parallel.rows[i].iterations, serial.rows[i].iterations);
    EXPECT_EQ(parallel.rows[i].final_residual, serial.rows[i].final_residual);
    EXPECT_EQ(serial.rows[i].status, RunStatus::Converged);
  }
  EXPECT_EQ(serial.instance, "linear_monotone dim=20 lambda=1");
}

TEST(Comparison, InapplicableMethodRejectedUpFront) {
  const BenchInstance inst = std::make_shared<const FeasibilityInstance>(gen_two_subspace(0.5));
  EXPECT_THROW(run_comparison(inst, ppa_methods(), {}, Seed{0}), InvalidArgument);
  EXPECT_FALSE(applies(inst, Family::PMM));
  EXPECT_TRUE(applies(inst, Family::DR));
}

TEST(Comparison, FailingMethodIsReportedInItsRow) {
  const BenchInstance inst = std::make_shared<const TvLsInstance>(gen_tv_ls(10, 9, 8, std::nullopt, 2, Seed{1}));
  std::vector<MethodSpec> methods{{"ok", {0.1, -0.05, 1.0, 1.0}, Family::TvAdmm},
                                  {"bad", {0.5, 0.0, 1.0, 1.0}, Family::TvAdmm}};
  const auto rep = run_comparison(inst, methods, {}, Seed{1}, 2);
  EXPECT_TRUE(rep.rows[0].error.empty());
  EXPECT_EQ(rep.rows[1].status, RunStatus::Diverged);
  EXPECT_NE(rep.rows[1].error.find("theta"), std::string::npos);
}

TEST(Comparison, RunMethodCoversEveryFamily) {
  RunConfig cfg;
  cfg.max_iter = 50;
  const BenchInstance bp = std::make_shared<const BasisPursuitInstance>(gen_basis_pursuit(12, 6, 1, Seed{2}));
  EXPECT_GT(run_method(bp, {"pmm", {}, Family::PMM}, cfg).iterations_used, 0u);
  EXPECT_EQ(run_method(bp, {"pdhg", {}, Family::PDHG}, cfg).stop_metric, StopMetric::StepNorm);
  const BenchInstance dr = std::make_shared<const FeasibilityInstance>(gen_two_subspace(0.5));
  EXPECT_GT(run_method(dr, {"dr", {}, Family::DR}, cfg).iterations_used, 0u);
  EXPECT_THROW(run_method(dr, {"x", {}, Family::TvAdmm}, cfg), InvalidArgument);
}

TEST(Comparison, ThreadCountFromEnvironment) {
  setenv("INERTIAL_PROX_THREADS", "3", 1);
  EXPECT_EQ(bench_thread_count(), 3u);
  setenv("INERTIAL_PROX_THREADS", "zero", 1);
  EXPECT_GE(bench_thread_count(), 1u);
  unsetenv("INERTIAL_PROX_THREADS");
}
