#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <utility>

#include "inertial_prox/engine.hpp"
#include "inertial_prox/linalg.hpp"
#include "inertial_prox/operators.hpp"

namespace iprox {

// ---------------------------------------------------------------------------
// Primal-dual hybrid gradient
// ---------------------------------------------------------------------------

/// min_u max_v f(u) + <Ku, v> - g(v), with prox_f(y, tau) and prox_g(y, sigma)
/// returning argmin f(u) + |u - y|^2/(2 tau) and argmin g(v) + |v - y|^2/(2 sigma).
class PdhgProblem {
 public:
  using Prox = std::function<Vector(const Vector&, double)>;

  PdhgProblem(Prox prox_f, Prox prox_g, Matrix k, double tau, double sigma)
      : prox_f_(std::move(prox_f)), prox_g_(std::move(prox_g)), k_(std::move(k)), tau_(tau), sigma_(sigma) {
    if (!prox_f_ || !prox_g_) throw InvalidArgument("PdhgProblem: missing prox");
    if (!(tau_ > 0.0) || !(sigma_ > 0.0)) throw InvalidArgument("PdhgProblem: tau and sigma must be > 0");
    k_norm_ = operator_norm(k_);
    if (!(tau_ * sigma_ * k_norm_ * k_norm_ < 1.0)) {
      throw InvalidArgument("PdhgProblem: step sizes violate tau*sigma*||K||^2 < 1");
    }
  }

  Index n_u() const { return k_.cols(); }
  Index n_v() const { return k_.rows(); }
  const Matrix& k() const { return k_; }
  double tau() const { return tau_; }
  double sigma() const { return sigma_; }
  double k_norm() const { return k_norm_; }

  /// (u_hat, v_hat) -> (u_{n+1}, v_{n+1}) on the stacked vector.
  Vector operator()(const Vector& y) const {
    if (y.size() != n_u() + n_v()) throw InvalidArgument("pdhg: stacked dimension mismatch");
    const Vector u_hat = y.head(n_u());
    const Vector v_hat = y.tail(n_v());
    Vector u = prox_f_(u_hat - tau_ * (k_.transpose() * v_hat), tau_);
    Vector v = prox_g_(v_hat + sigma_ * (k_ * (2.0 * u - u_hat)), sigma_);
    return stack(u, v);
  }

  /// [[I/tau, -Kᵀ], [-K, I/sigma]]
  Matrix preconditioner() const {
    const Index n = n_u();
    const Index m = n_v();
    Matrix p(n + m, n + m);
    p.topLeftCorner(n, n) = Matrix::Identity(n, n) / tau_;
    p.topRightCorner(n, m) = -k_.transpose();
    p.bottomLeftCorner(m, n) = -k_;
    p.bottomRightCorner(m, m) = Matrix::Identity(m, m) / sigma_;
    return p;
  }

 private:
  Prox prox_f_;
  Prox prox_g_;
  Matrix k_;
  double tau_;
  double sigma_;
  double k_norm_ = 0.0;
};

inline EngineState pdhg_step(const PdhgProblem& problem, EngineState state, const InertialParams& params) {
  return ppa_step(problem, std::move(state), params);
}

/// PDHG from (u0, v0); the default stop metric is the step norm.
inline RunRecord run_pdhg(const PdhgProblem& problem, const Vector& u0, const Vector& v0,
                          const InertialParams& params, const RunConfig& config) {
  return run(problem, stack(u0, v0), params, config);
}

// ---------------------------------------------------------------------------
// Douglas-Rachford
// ---------------------------------------------------------------------------

/// v_{n+1} = G(u_n), u_{n+1} = v_{n+1} + theta (v_{n+1} - v_n) + delta (v_n - v_{n-1}).
/// The engine's x-window holds v, its y holds u.
inline EngineState dr_step(const Resolvent& j_a, const Resolvent& j_b, EngineState state,
                           const InertialParams& params) {
  return ppa_step([&](const Vector& u) { return dr_operator(u, j_a, j_b); }, std::move(state), params);
}

inline RunRecord run_dr(const Resolvent& j_a, const Resolvent& j_b, const Vector& v0, const InertialParams& params,
                        const RunConfig& config) {
  return run([&](const Vector& u) { return dr_operator(u, j_a, j_b); }, v0, params, config);
}

// ---------------------------------------------------------------------------
// ADMM
// ---------------------------------------------------------------------------

/// min f(x) + g(z) s.t. Ax + Bz = c, given its two subproblem solvers.
struct AdmmProblem {
  /// (v_hat, z, lambda) -> argmin_x f(x) + <v_hat, Ax + Bz - c> + lambda/2 |Ax + Bz - c|^2
  std::function<Vector(const Vector&, const Vector&, double)> x_subproblem;
  /// (eta_hat, x, lambda) -> argmin_z g(z) + <eta_hat, Ax + Bz - c> + lambda/2 |Ax + Bz - c|^2
  std::function<Vector(const Vector&, const Vector&, double)> prox_g_composite;
  Matrix a;
  Matrix b;
  Vector c;

  void check() const {
    if (!x_subproblem || !prox_g_composite) throw InvalidArgument("AdmmProblem: missing subproblem solver");
    if (a.rows() != c.size() || b.rows() != c.size()) throw InvalidArgument("AdmmProblem: A, B, c disagree on G");
  }
};

struct AdmmState {
  Vector x;
  Vector z;
  Vector v_hat;
  Vector v_hat_prev;
  Vector v_hat_prev2;
  Vector x_prev;
  Vector eta_hat;  ///< eta_hat used by the last step
  std::size_t iter = 0;

  static AdmmState start(Vector x0, Vector z0, Vector v0) {
    AdmmState s;
    s.x_prev = x0;
    s.x = std::move(x0);
    s.z = std::move(z0);
    s.v_hat_prev = v0;
    s.v_hat_prev2 = v0;
    s.eta_hat = v0;
    s.v_hat = std::move(v0);
    return s;
  }
};

namespace detail {

/// eta_hat_n; the first two steps of a run (iter 0 and 1) use eta_hat = v_hat.
/// `a_dx_next` = A(x_{n+1} - x_n), `a_dx` = A(x_n - x_{n-1}).
inline Vector admm_eta(const AdmmState& s, const Vector& a_dx_next, const Vector& a_dx, double lambda,
                       const InertialParams& p) {
  if (s.iter < 2) return s.v_hat;
  return s.v_hat + p.theta * (s.v_hat - s.v_hat_prev + lambda * a_dx_next) +
         p.delta * (s.v_hat_prev - s.v_hat_prev2 + lambda * a_dx);
}

inline AdmmState admm_shift(AdmmState s, Vector x_next, Vector z_next, Vector eta, Vector v_next) {
  s.x_prev = std::move(s.x);
  s.x = std::move(x_next);
  s.z = std::move(z_next);
  s.v_hat_prev2 = std::move(s.v_hat_prev);
  s.v_hat_prev = std::move(s.v_hat);
  s.v_hat = std::move(v_next);
  s.eta_hat = std::move(eta);
  ++s.iter;
  return s;
}

}  // namespace detail

inline AdmmState admm_step(const AdmmProblem& problem, AdmmState state, const InertialParams& params) {
  const double lambda = params.lambda;
  Vector x_next = problem.x_subproblem(state.v_hat, state.z, lambda);
  Vector eta = detail::admm_eta(state, problem.a * (x_next - state.x), problem.a * (state.x - state.x_prev), lambda,
                                params);
  Vector z_next = problem.prox_g_composite(eta, x_next, lambda);
  Vector v_next = eta + lambda * (problem.a * x_next + problem.b * z_next - problem.c);
  return detail::admm_shift(std::move(state), std::move(x_next), std::move(z_next), std::move(eta),
                            std::move(v_next));
}

// ---------------------------------------------------------------------------
// Total-variation regularized least squares
// ---------------------------------------------------------------------------

/// min_x 1/2 |Fx - b|^2 + gamma |Dx|_1 with D the first-difference matrix.
struct TvLsInstance {
  Matrix f;
  Vector b;
  Matrix d;
  double gamma = 0.01;
  Vector x_true;

  Index n() const { return f.cols(); }
  Index m() const { return d.rows(); }
};

/// ADMM with A = D, B = -I, c = 0 and closed-form subproblems. The Cholesky
/// factor of FᵀF + lambda DᵀD is computed once per (instance, lambda).
class TvAdmmSolver {
 public:
  TvAdmmSolver(std::shared_ptr<const TvLsInstance> instance, double lambda)
      : inst_(std::move(instance)), lambda_(lambda) {
    if (!inst_) throw InvalidArgument("TvAdmmSolver: null instance");
    if (!(lambda_ > 0.0)) throw InvalidArgument("TvAdmmSolver: lambda must be > 0");
    if (!(inst_->gamma >= 0.0)) throw InvalidArgument("TvAdmmSolver: gamma must be >= 0");
    const auto& f = inst_->f;
    const auto& d = inst_->d;
    if (f.rows() != inst_->b.size() || d.cols() != f.cols()) throw InvalidArgument("TvAdmmSolver: dimension mismatch");
    Matrix normal = f.transpose() * f + lambda_ * (d.transpose() * d);
    llt_ = std::make_shared<const Eigen::LLT<Matrix>>(normal);
    if (llt_->info() != Eigen::Success) throw NumericalError("TvAdmmSolver: FᵀF + lambda DᵀD is singular");
    ftb_ = f.transpose() * inst_->b;
  }

  const TvLsInstance& instance() const { return *inst_; }
  double lambda() const { return lambda_; }

  AdmmState start() const {
    return AdmmState::start(Vector::Zero(inst_->n()), Vector::Zero(inst_->m()), Vector::Zero(inst_->m()));
  }

  AdmmState step(AdmmState s, const InertialParams& params) const {
    if (params.lambda != lambda_) throw InvalidArgument("tv_admm_step: lambda differs from the factorized one");
    const auto& d = inst_->d;
    Vector x_next = llt_->solve(d.transpose() * (lambda_ * s.z - s.v_hat) + ftb_);
    Vector eta = detail::admm_eta(s, d * (x_next - s.x), d * (s.x - s.x_prev), lambda_, params);
    const Vector dx = d * x_next;
    Vector z_next = soft_threshold(dx + eta / lambda_, inst_->gamma / lambda_);
    Vector v_next = eta + lambda_ * (dx - z_next);
    return detail::admm_shift(std::move(s), std::move(x_next), std::move(z_next), std::move(eta),
                              std::move(v_next));
  }

 private:
  std::shared_ptr<const TvLsInstance> inst_;
  double lambda_;
  std::shared_ptr<const Eigen::LLT<Matrix>> llt_;
  Vector ftb_;
};

inline AdmmState tv_admm_step(const TvAdmmSolver& solver, AdmmState state, const InertialParams& params) {
  return solver.step(std::move(state), params);
}

namespace detail {

template <class Step, class Residual>
RunRecord run_admm_loop(const Step& step, const Residual& residual_of, AdmmState state, const RunConfig& config) {
  if (config.max_iter < 1) throw InvalidArgument("run: max_iter must be >= 1");
  if (!(config.tol > 0.0)) throw InvalidArgument("run: tol must be > 0");
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord record;
  record.stop_metric = StopMetric::Custom;
  record.status = RunStatus::MaxIterReached;
  for (std::size_t k = 0; k < config.max_iter; ++k) {
    state = step(std::move(state));
    const double r = residual_of(state);
    record.residuals.push_back(r);
    if (config.record_iterates) record.iterates.push_back(state.x);
    if (!std::isfinite(r) || !all_finite(state.x) || !all_finite(state.v_hat)) {
      record.status = RunStatus::Diverged;
      break;
    }
    if (r <= config.tol) {
      record.status = RunStatus::Converged;
      break;
    }
  }
  record.iterations_used = record.residuals.size();
  record.final_point = state.x;
  record.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return record;
}

}  // namespace detail

/// Generic two-step inertial ADMM; the residual is |Ax_n + Bz_n - c|^2.
inline RunRecord run_admm(const AdmmProblem& problem, AdmmState start, const InertialParams& params,
                          const RunConfig& config) {
  problem.check();
  return detail::run_admm_loop([&](AdmmState s) { return admm_step(problem, std::move(s), params); },
                               [&](const AdmmState& s) {
                                 return (problem.a * s.x + problem.b * s.z - problem.c).squaredNorm();
                               },
                               std::move(start), config);
}

/// TV-regularized least squares from x_0 = z_0 = v_0 = 0, residual |Dx_n - z_n|^2.
inline RunRecord run_tv_admm(std::shared_ptr<const TvLsInstance> instance, const InertialParams& params,
                             const RunConfig& config) {
  if (auto v = validate_params(params); !v) throw InvalidArgument("run_tv_admm: " + *v.violation);
  const TvAdmmSolver solver(std::move(instance), params.lambda);
  const Matrix& d = solver.instance().d;
  return detail::run_admm_loop([&](AdmmState s) { return solver.step(std::move(s), params); },
                               [&](const AdmmState& s) { return (d * s.x - s.z).squaredNorm(); }, solver.start(),
                               config);
}

}  // namespace iprox
