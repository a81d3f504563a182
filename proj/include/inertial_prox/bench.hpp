#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "inertial_prox/engine.hpp"
#include "inertial_prox/operators.hpp"
#include "inertial_prox/random.hpp"
#include "inertial_prox/saddle.hpp"
#include "inertial_prox/splitting.hpp"

namespace iprox {

// ---------------------------------------------------------------------------
// Instance generators
// ---------------------------------------------------------------------------

/// (N-1) x N, row i = e_i - e_{i+1}.
inline Matrix difference_matrix(Index n) {
  if (n < 2) throw InvalidArgument("difference_matrix: N must be >= 2");
  Matrix d = Matrix::Zero(n - 1, n);
  for (Index i = 0; i + 1 < n; ++i) {
    d(i, i) = 1.0;
    d(i, i + 1) = -1.0;
  }
  return d;
}

/// Gaussian A (M x N), planted u* with `sparsity` standard-normal entries at
/// uniformly chosen positions, b = A u*.
inline BasisPursuitInstance gen_basis_pursuit(Index n, Index m, Index sparsity, Seed seed) {
  if (m < 1 || n < 1 || m >= n) throw InvalidArgument("gen_basis_pursuit: need 0 < M < N");
  if (sparsity < 1 || sparsity > n) throw InvalidArgument("gen_basis_pursuit: need 0 < sparsity <= N");
  Rng rng(seed);
  BasisPursuitInstance inst;
  inst.a = rng.normal_matrix(m, n);
  inst.u_true = Vector::Zero(n);
  for (Index pos : rng.sample_without_replacement(0, n, sparsity)) inst.u_true[pos] = rng.normal();
  inst.b = inst.a * inst.u_true;
  inst.sparsity = sparsity;
  return inst;
}

inline Index default_bp_sparsity(Index m) { return std::max<Index>(1, static_cast<Index>(std::lround(m / 5.0))); }

/// Piecewise-constant x* with `pieces` segments, Gaussian F (p x N) and
/// b = F x* + noise_scale * xi. A missing noise_scale means 0.01 ||F x*|| / sqrt(p).
inline TvLsInstance gen_tv_ls(Index n, Index m, Index p, std::optional<double> noise_scale, Index pieces, Seed seed,
                              double gamma = 0.01) {
  if (m != n - 1) throw InvalidArgument("gen_tv_ls: M must equal N - 1");
  if (n < 2 || p < 1) throw InvalidArgument("gen_tv_ls: need N >= 2 and p >= 1");
  if (pieces < 1 || pieces > n) throw InvalidArgument("gen_tv_ls: need 1 <= pieces <= N");
  if (noise_scale && !(*noise_scale >= 0.0)) throw InvalidArgument("gen_tv_ls: noise_scale must be >= 0");
  Rng rng(seed);

  auto breaks = rng.sample_without_replacement(1, n - 1, pieces - 1);
  std::sort(breaks.begin(), breaks.end());
  breaks.push_back(n);
  TvLsInstance inst;
  inst.x_true = Vector::Zero(n);
  Index start = 0;
  for (Index stop : breaks) {
    inst.x_true.segment(start, stop - start).setConstant(rng.normal());
    start = stop;
  }

  inst.f = rng.normal_matrix(p, n);
  const Vector clean = inst.f * inst.x_true;
  const double scale = noise_scale ? *noise_scale : 0.01 * clean.norm() / std::sqrt(static_cast<double>(p));
  const Vector noise = rng.normal_vector(p);
  inst.b = scale == 0.0 ? clean : Vector(clean + scale * noise);
  inst.d = difference_matrix(n);
  inst.gamma = gamma;
  return inst;
}

/// T1 = span{(1,0)}, T2 = span{(cos a, sin a)} in R^2; T1 ∩ T2 = {0}.
struct FeasibilityInstance {
  double angle = 0.0;
  Resolvent p1;
  Resolvent p2;
  Vector v0;
};

inline FeasibilityInstance gen_two_subspace(double angle) {
  if (!(angle > 0.0 && angle < std::numbers::pi / 2.0)) {
    throw InvalidArgument("gen_two_subspace: angle must lie in (0, pi/2)");
  }
  Vector e1(2), e2(2), v0(2);
  e1 << 1.0, 0.0;
  e2 << std::cos(angle), std::sin(angle);
  v0 << 1.0, 0.0;
  return {angle, SubspaceProjector({e1}).as_resolvent(), SubspaceProjector({e2}).as_resolvent(), v0};
}

/// A(x) = Qx with Q = BᵀB/d + 0.1 I (symmetric positive definite), x* = 0.
struct LinearMonotoneInstance {
  LinearMonotoneProblem problem;
  Vector x0;
  Vector x_star;
};

inline LinearMonotoneInstance gen_linear_monotone(Index dim, double lambda, Seed seed, bool zero_start = false) {
  if (dim < 1) throw InvalidArgument("gen_linear_monotone: dim must be >= 1");
  Rng rng(seed);
  const Matrix b = rng.normal_matrix(dim, dim);
  Matrix q = b.transpose() * b / static_cast<double>(dim);
  q.diagonal().array() += 0.1;
  Vector x0 = rng.normal_vector(dim);
  if (zero_start) x0.setZero();
  return {LinearMonotoneProblem(std::move(q), lambda), std::move(x0), Vector::Zero(dim)};
}

// ---------------------------------------------------------------------------
// Methods and comparisons
// ---------------------------------------------------------------------------

enum class Family { PMM, TvAdmm, DR, PDHG, GenericPPA };

constexpr std::string_view to_string(Family f) {
  switch (f) {
    case Family::PMM: return "PMM";
    case Family::TvAdmm: return "TvAdmm";
    case Family::DR: return "DR";
    case Family::PDHG: return "PDHG";
    case Family::GenericPPA: return "GenericPPA";
  }
  return "Unknown";
}

struct MethodSpec {
  std::string name;
  InertialParams params;
  Family family = Family::GenericPPA;
};

using BenchInstance = std::variant<std::shared_ptr<const BasisPursuitInstance>, std::shared_ptr<const TvLsInstance>,
                                   std::shared_ptr<const FeasibilityInstance>,
                                   std::shared_ptr<const LinearMonotoneInstance>>;

inline std::string describe(const BenchInstance& inst) {
  std::ostringstream os;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(*p)>;
        if constexpr (std::is_same_v<T, BasisPursuitInstance>) {
          os << "basis_pursuit N=" << p->n() << " M=" << p->m() << " sparsity=" << p->sparsity;
        } else if constexpr (std::is_same_v<T, TvLsInstance>) {
          os << "tv_ls N=" << p->n() << " M=" << p->m() << " p=" << p->f.rows() << " gamma=" << p->gamma;
        } else if constexpr (std::is_same_v<T, FeasibilityInstance>) {
          os << "feasibility angle=" << p->angle;
        } else {
          os << "linear_monotone dim=" << p->problem.dim() << " lambda=" << p->problem.lambda();
        }
      },
      inst);
  return os.str();
}

/// Basis pursuit as min ||u||_1 + max_v <Au, v> - <b, v>, tau = sigma = 0.99/||A||.
inline PdhgProblem bp_pdhg_problem(const BasisPursuitInstance& inst) {
  const double step = 0.99 / operator_norm(inst.a);
  return PdhgProblem([](const Vector& y, double tau) { return soft_threshold(y, tau); },
                     [b = inst.b](const Vector& y, double sigma) -> Vector { return y - sigma * b; }, inst.a, step,
                     step);
}

/// Runs one method on one instance. Throws when the family does not apply to the instance.
inline RunRecord run_method(const BenchInstance& instance, const MethodSpec& method, const RunConfig& config) {
  return std::visit(
      [&](const auto& p) -> RunRecord {
        using T = std::decay_t<decltype(*p)>;
        const auto fam = method.family;
        if constexpr (std::is_same_v<T, BasisPursuitInstance>) {
          if (fam == Family::PMM) return run_pmm_basis_pursuit(*p, method.params, config);
          if (fam == Family::PDHG) {
            RunConfig c = config;
            c.stop_metric = StopMetric::StepNorm;
            return run_pdhg(bp_pdhg_problem(*p), Vector::Zero(p->n()), Vector::Zero(p->m()), method.params, c);
          }
        } else if constexpr (std::is_same_v<T, TvLsInstance>) {
          if (fam == Family::TvAdmm) return run_tv_admm(p, method.params, config);
        } else if constexpr (std::is_same_v<T, FeasibilityInstance>) {
          if (fam == Family::DR) {
            RunConfig c = config;
            c.stop_metric = StopMetric::ExtrapolationResidual;
            return run_dr(p->p1, p->p2, p->v0, method.params, c);
          }
        } else {
          if (fam == Family::GenericPPA) {
            RunConfig c = config;
            c.stop_metric = StopMetric::ExtrapolationResidual;
            const LinearMonotoneProblem prob(p->problem.q(), method.params.lambda);
            return run(resolvent_linear(prob), p->x0, method.params, c);
          }
        }
        throw InvalidArgument("run_method: family " + std::string(to_string(fam)) + " does not apply to " +
                              describe(instance));
      },
      instance);
}

inline bool applies(const BenchInstance& instance, Family family) {
  switch (instance.index()) {
    case 0: return family == Family::PMM || family == Family::PDHG;
    case 1: return family == Family::TvAdmm;
    case 2: return family == Family::DR;
    default: return family == Family::GenericPPA;
  }
}

struct ComparisonRow {
  std::string method;
  std::size_t iterations = 0;
  double final_residual = 0.0;
  double wall_time = 0.0;
  RunStatus status = RunStatus::MaxIterReached;
  std::string error;  ///< non-empty when the run threw
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  std::string instance;
  Seed seed;
};

/// INERTIAL_PROX_THREADS when set to a positive integer, else the number of logical processors.
inline unsigned bench_thread_count() {
  if (const char* env = std::getenv("INERTIAL_PROX_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs every method against the same instance and starting point. Methods
/// may run concurrently; rows come back in method order. A method that throws
/// or diverges is reported in its row; an inapplicable method is rejected up front.
inline ComparisonReport run_comparison(const BenchInstance& instance, const std::vector<MethodSpec>& methods,
                                       const RunConfig& config, Seed seed, unsigned threads = 0) {
  for (const auto& m : methods) {
    if (!applies(instance, m.family)) {
      throw InvalidArgument("run_comparison: method '" + m.name + "' (" + std::string(to_string(m.family)) +
                            ") does not apply to " + describe(instance));
    }
  }
  ComparisonReport report;
  report.instance = describe(instance);
  report.seed = seed;
  report.rows.resize(methods.size());

  auto run_one = [&](std::size_t i) {
    ComparisonRow& row = report.rows[i];
    row.method = methods[i].name;
    try {
      const RunRecord rec = run_method(instance, methods[i], config);
      row.iterations = rec.iterations_used;
      row.final_residual = rec.residuals.empty() ? 0.0 : rec.residuals.back();
      row.wall_time = rec.wall_time;
      row.status = rec.status;
    } catch (const std::exception& e) {
      row.status = RunStatus::Diverged;
      row.error = e.what();
    }
  };

  if (threads == 0) threads = bench_thread_count();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, methods.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < methods.size(); ++i) run_one(i);
    return report;
  }
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < methods.size(); i = next++) run_one(i);
      });
    }
  }
  return report;
}

}  // namespace iprox
