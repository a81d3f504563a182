#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "inertial_prox/engine.hpp"
#include "inertial_prox/linalg.hpp"
#include "inertial_prox/operators.hpp"

namespace iprox {

// ---------------------------------------------------------------------------
// Generic saddle-point proximal step
// ---------------------------------------------------------------------------

/// Exact saddle prox: given (u_hat, v_hat, lambda) returns
///   argmin_u max_v { phi(u, v) + |u - u_hat|^2/(2 lambda) - |v - v_hat|^2/(2 lambda) }.
using SaddleOracle = std::function<std::pair<Vector, Vector>(const Vector&, const Vector&, double)>;

/// Proximal map of the saddle subdifferential acting on stacked (u, v).
class SaddleMap {
 public:
  SaddleMap(SaddleOracle oracle, Index n_u, Index n_v, double lambda)
      : oracle_(std::move(oracle)), n_u_(n_u), n_v_(n_v), lambda_(lambda) {
    if (!oracle_) throw InvalidArgument("SaddleMap: empty oracle");
    if (n_u_ < 1 || n_v_ < 0) throw InvalidArgument("SaddleMap: bad block sizes");
    if (!(lambda_ > 0.0)) throw InvalidArgument("SaddleMap: lambda must be > 0");
  }

  Vector operator()(const Vector& y) const {
    if (y.size() != n_u_ + n_v_) throw InvalidArgument("SaddleMap: stacked dimension mismatch");
    auto [u, v] = oracle_(y.head(n_u_), y.tail(n_v_), lambda_);
    if (u.size() != n_u_ || v.size() != n_v_) throw InvalidArgument("SaddleMap: oracle returned wrong sizes");
    return stack(u, v);
  }

 private:
  SaddleOracle oracle_;
  Index n_u_;
  Index n_v_;
  double lambda_;
};

/// One two-step inertial step on a saddle problem; the engine window holds stacked (u, v).
inline EngineState saddle_step(const SaddleOracle& oracle, Index n_u, EngineState state,
                               const InertialParams& params) {
  const Index n_v = state.dim() - n_u;
  return ppa_step(SaddleMap(oracle, n_u, n_v, params.lambda), std::move(state), params);
}

// ---------------------------------------------------------------------------
// Basis-pursuit u-subproblem
// ---------------------------------------------------------------------------

struct InnerSolution {
  Vector u;
  std::size_t iterations = 0;
  bool converged = false;
  double mapping_norm = 0.0;  ///< prox-gradient mapping norm at the last iterate
  std::vector<double> objective_trace;
};

struct BpInnerOptions {
  double tol = 1e-10;
  std::size_t max_iter = 2000;
  std::optional<double> a_norm;         ///< ||A||; estimated by power iteration when absent
  std::optional<Vector> warm_start;     ///< defaults to u_hat
  bool record_objective = false;
};

/// ||u||_1 + <v_hat, Au - b> + lambda/2 ||Au - b||^2 + 1/(2 lambda) ||u - u_hat||^2.
inline double bp_subproblem_objective(const Matrix& a, const Vector& b, const Vector& v_hat, const Vector& u_hat,
                                      double lambda, const Vector& u) {
  const Vector r = a * u - b;
  return u.lpNorm<1>() + v_hat.dot(r) + 0.5 * lambda * r.squaredNorm() +
         (u - u_hat).squaredNorm() / (2.0 * lambda);
}

/// Accelerated proximal gradient for the strongly convex basis-pursuit
/// u-subproblem. Step 1/L with L = lambda ||A||^2 + 1/lambda, modulus
/// mu = 1/lambda and constant momentum (sqrt L - sqrt mu)/(sqrt L + sqrt mu).
/// Stops when the prox-gradient mapping norm L ||w - u+|| drops to `tol`;
/// hitting max_iter is reported through `converged = false`.
inline InnerSolution solve_bp_subproblem(const Matrix& a, const Vector& b, const Vector& v_hat, const Vector& u_hat,
                                         double lambda, const BpInnerOptions& opts = {}) {
  if (!(lambda > 0.0)) throw InvalidArgument("solve_bp_subproblem: lambda must be > 0");
  if (a.rows() != b.size() || a.rows() != v_hat.size() || a.cols() != u_hat.size()) {
    throw InvalidArgument("solve_bp_subproblem: dimension mismatch");
  }
  const double a_norm = opts.a_norm ? *opts.a_norm : operator_norm(a);
  const double lip = lambda * a_norm * a_norm + 1.0 / lambda;
  const double mu = 1.0 / lambda;
  const double momentum = (std::sqrt(lip) - std::sqrt(mu)) / (std::sqrt(lip) + std::sqrt(mu));
  const Vector at_v = a.transpose() * v_hat;

  auto grad = [&](const Vector& w) -> Vector {
    return at_v + lambda * (a.transpose() * (a * w - b)) + (w - u_hat) / lambda;
  };

  InnerSolution sol;
  Vector u = opts.warm_start ? *opts.warm_start : u_hat;
  if (u.size() != u_hat.size()) throw InvalidArgument("solve_bp_subproblem: warm start has wrong dimension");
  Vector w = u;
  if (opts.record_objective) sol.objective_trace.push_back(bp_subproblem_objective(a, b, v_hat, u_hat, lambda, u));

  for (std::size_t k = 0;; ++k) {
    Vector u_next = soft_threshold(w - grad(w) / lip, 1.0 / lip);
    sol.mapping_norm = lip * (w - u_next).norm();
    if (sol.mapping_norm <= opts.tol) {
      sol.converged = true;
      sol.iterations = k;
      u = std::move(u_next);
      break;
    }
    if (k + 1 >= opts.max_iter) {
      sol.iterations = k + 1;
      u = std::move(u_next);
      break;
    }
    w = u_next + momentum * (u_next - u);
    u = std::move(u_next);
    if (opts.record_objective) sol.objective_trace.push_back(bp_subproblem_objective(a, b, v_hat, u_hat, lambda, u));
  }
  if (opts.record_objective) sol.objective_trace.push_back(bp_subproblem_objective(a, b, v_hat, u_hat, lambda, u));
  sol.u = std::move(u);
  return sol;
}

// ---------------------------------------------------------------------------
// Proximal method of multipliers
// ---------------------------------------------------------------------------

/// Inner solver failed to reach its tolerance while the caller demanded it.
class InnerSolverError : public std::runtime_error {
 public:
  InnerSolverError(const std::string& msg, std::size_t iterations, double mapping_norm)
      : std::runtime_error(msg), iterations_(iterations), mapping_norm_(mapping_norm) {}

  std::size_t iterations() const { return iterations_; }
  double mapping_norm() const { return mapping_norm_; }

 private:
  std::size_t iterations_;
  double mapping_norm_;
};

/// min f(u) s.t. Au = b through its Lagrangian f(u) + <v, Au - b>.
struct LagrangianProblem {
  Matrix a;
  Vector b;
  /// Solves argmin_u { f(u) + <v_hat, Au - b> + lambda/2 ||Au - b||^2 + 1/(2 lambda) ||u - u_hat||^2 }
  /// for arguments (v_hat, u_hat, lambda).
  std::function<InnerSolution(const Vector&, const Vector&, double)> objective_prox_solver;
  bool require_inner_convergence = false;

  Index n() const { return a.cols(); }
  Index m() const { return a.rows(); }
};

/// x_{n+1} = (u_{n+1}, v_hat + lambda (A u_{n+1} - b)) on stacked (u, v).
class PmmMap {
 public:
  PmmMap(std::shared_ptr<const LagrangianProblem> problem, double lambda)
      : problem_(std::move(problem)), lambda_(lambda) {
    if (!problem_ || !problem_->objective_prox_solver) throw InvalidArgument("PmmMap: missing subproblem solver");
    if (problem_->a.rows() != problem_->b.size()) throw InvalidArgument("PmmMap: A rows must match b");
    if (!(lambda_ > 0.0)) throw InvalidArgument("PmmMap: lambda must be > 0");
  }

  Vector operator()(const Vector& y) const {
    const Index n = problem_->n();
    const Index m = problem_->m();
    if (y.size() != n + m) throw InvalidArgument("PmmMap: stacked dimension mismatch");
    const Vector u_hat = y.head(n);
    const Vector v_hat = y.tail(m);
    InnerSolution sol = problem_->objective_prox_solver(v_hat, u_hat, lambda_);
    if (problem_->require_inner_convergence && !sol.converged) {
      throw InnerSolverError("pmm: u-subproblem did not reach tolerance after " + std::to_string(sol.iterations) +
                                 " iterations (mapping norm " + std::to_string(sol.mapping_norm) + ")",
                             sol.iterations, sol.mapping_norm);
    }
    Vector v = v_hat + lambda_ * (problem_->a * sol.u - problem_->b);
    return stack(sol.u, v);
  }

 private:
  std::shared_ptr<const LagrangianProblem> problem_;
  double lambda_;
};

inline EngineState pmm_step(std::shared_ptr<const LagrangianProblem> problem, EngineState state,
                            const InertialParams& params) {
  return ppa_step(PmmMap(std::move(problem), params.lambda), std::move(state), params);
}

struct BasisPursuitInstance {
  Matrix a;
  Vector b;
  Vector u_true;
  Index sparsity = 0;

  Index n() const { return a.cols(); }
  Index m() const { return a.rows(); }
};

/// Lagrangian of min ||u||_1 s.t. Au = b with the accelerated inner solver.
inline std::shared_ptr<const LagrangianProblem> make_bp_lagrangian(const BasisPursuitInstance& inst,
                                                                   BpInnerOptions inner = {}) {
  if (!inner.a_norm) inner.a_norm = operator_norm(inst.a);
  inner.warm_start.reset();
  inner.record_objective = false;
  auto p = std::make_shared<LagrangianProblem>();
  p->a = inst.a;
  p->b = inst.b;
  // The captured matrix copy keeps the solver valid independently of `p`.
  p->objective_prox_solver = [a = inst.a, b = inst.b, inner](const Vector& v_hat, const Vector& u_hat,
                                                             double lambda) {
    return solve_bp_subproblem(a, b, v_hat, u_hat, lambda, inner);
  };
  return p;
}

/// Two-step inertial PMM on basis pursuit from x_0 = 0, stopping on ||y_n - x_{n+1}||.
/// The final point is the stacked (u, v).
inline RunRecord run_pmm_basis_pursuit(const BasisPursuitInstance& inst, const InertialParams& params,
                                       RunConfig config, const BpInnerOptions& inner = {}) {
  if (auto v = validate_params(params); !v) throw InvalidArgument("run_pmm_basis_pursuit: " + *v.violation);
  config.stop_metric = StopMetric::ExtrapolationResidual;
  const Vector x0 = Vector::Zero(inst.n() + inst.m());
  return run(PmmMap(make_bp_lagrangian(inst, inner), params.lambda), x0, params, config);
}

}  // namespace iprox
