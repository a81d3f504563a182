#pragma once

#include <algorithm>
#include <chrono>
#include <concepts>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "inertial_prox/linalg.hpp"
#include "inertial_prox/params.hpp"

namespace iprox {

/// Anything that maps a point to a point of the same dimension. Resolvents,
/// the Douglas-Rachford operator and the saddle/PDHG proximal maps all fit.
template <class F>
concept PointMap = requires(const F& f, const Vector& x) {
  { f(x) } -> std::convertible_to<Vector>;
};

/// Rolling window of the two-step scheme: (x_{n-2}, x_{n-1}, x_n, y_n).
struct EngineState {
  Vector x_prev2;
  Vector x_prev;
  Vector x_curr;
  Vector y_curr;
  std::size_t iter = 0;

  /// Window with x_{-2} = x_{-1} = x_0 = y_0.
  static EngineState start_at(const Vector& x0) { return {x0, x0, x0, x0, 0}; }

  Index dim() const { return x_curr.size(); }
};

enum class StopMetric {
  ExtrapolationResidual,  ///< ||y_n - x_{n+1}||
  StepNorm,               ///< ||x_{n+1} - x_n||
  Custom,
};

enum class RunStatus { Converged, MaxIterReached, Diverged };

constexpr std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Converged: return "Converged";
    case RunStatus::MaxIterReached: return "MaxIterReached";
    case RunStatus::Diverged: return "Diverged";
  }
  return "Unknown";
}

constexpr std::string_view to_string(StopMetric m) {
  switch (m) {
    case StopMetric::ExtrapolationResidual: return "ExtrapolationResidual";
    case StopMetric::StepNorm: return "StepNorm";
    case StopMetric::Custom: return "Custom";
  }
  return "Unknown";
}

struct RunConfig {
  std::size_t max_iter = 1000;
  double tol = 1e-8;
  StopMetric stop_metric = StopMetric::ExtrapolationResidual;
  /// Used when stop_metric == Custom. Receives the state before the step and x_{n+1}.
  std::function<double(const EngineState&, const Vector&)> custom_metric;
  bool record_iterates = false;
  /// Reference solution; when set the run records the Lyapunov trace.
  std::optional<Vector> record_lyapunov;
};

/// Gamma_n and Gamma-bar_n, indexed n = 0 .. iterations (the starting window included).
struct LyapunovTrace {
  std::vector<double> gamma;
  std::vector<double> gamma_bar;
  Vector x_star;
};

struct RunRecord {
  std::vector<double> residuals;
  std::size_t iterations_used = 0;
  RunStatus status = RunStatus::MaxIterReached;
  double wall_time = 0.0;
  Vector final_point;
  StopMetric stop_metric = StopMetric::ExtrapolationResidual;
  std::optional<LyapunovTrace> lyapunov;
  /// x_1 .. x_k when RunConfig::record_iterates is set.
  std::vector<Vector> iterates;
};

/// x_curr + theta (x_curr - x_prev) + delta (x_prev - x_prev2).
inline Vector inertial_extrapolate(const Vector& x_curr, const Vector& x_prev, const Vector& x_prev2,
                                   const InertialParams& params) {
  require_same_size(x_curr, x_prev, "inertial_extrapolate");
  require_same_size(x_curr, x_prev2, "inertial_extrapolate");
  if (params.theta == 0.0 && params.delta == 0.0) return x_curr;
  return x_curr + params.theta * (x_curr - x_prev) + params.delta * (x_prev - x_prev2);
}

namespace detail {

template <PointMap Map>
Vector relaxed_update(const Map& map, const Vector& y, double rho) {
  Vector j = map(y);
  require_same_size(y, j, "ppa_step: resolvent output");
  if (rho == 1.0) return j;
  return (1.0 - rho) * y + rho * j;
}

inline EngineState shift(EngineState state, Vector x_next, const InertialParams& params) {
  state.x_prev2 = std::move(state.x_prev);
  state.x_prev = std::move(state.x_curr);
  state.x_curr = std::move(x_next);
  state.y_curr = inertial_extrapolate(state.x_curr, state.x_prev, state.x_prev2, params);
  ++state.iter;
  return state;
}

}  // namespace detail

/// One iteration: x_{n+1} = (1 - rho) y_n + rho J(y_n), then the window
/// shifts and y_{n+1} is extrapolated.
template <PointMap Map>
EngineState ppa_step(const Map& resolvent, EngineState state, const InertialParams& params) {
  require_same_size(state.x_curr, state.y_curr, "ppa_step");
  Vector x_next = detail::relaxed_update(resolvent, state.y_curr, params.rho);
  return detail::shift(std::move(state), std::move(x_next), params);
}

/// Gamma_n and Gamma-bar_n for the window (x_n, x_{n-1}, x_{n-2}) against x*.
struct LyapunovValues {
  double gamma = 0.0;
  double gamma_bar = 0.0;
};

namespace detail {

inline LyapunovValues lyapunov_with(const Coefficients& c, const Vector& x_n, const Vector& x_prev,
                                    const Vector& x_prev2, const Vector& x_star, const InertialParams& p) {
  const double gamma = (x_n - x_star).squaredNorm() - p.theta * (x_prev - x_star).squaredNorm() -
                       p.delta * (x_prev2 - x_star).squaredNorm() +
                       (1.0 - std::abs(p.delta) - p.theta) * (x_n - x_prev).squaredNorm();
  return {gamma, gamma + c.c1 * (x_prev - x_prev2).squaredNorm()};
}

}  // namespace detail

inline LyapunovValues lyapunov_values(const Vector& x_n, const Vector& x_prev, const Vector& x_prev2,
                                      const Vector& x_star, const InertialParams& params) {
  require_same_size(x_n, x_prev, "lyapunov_values");
  require_same_size(x_n, x_prev2, "lyapunov_values");
  require_same_size(x_n, x_star, "lyapunov_values");
  return detail::lyapunov_with(coefficients(params.theta, params.delta), x_n, x_prev, x_prev2, x_star,
                               params);
}

/// Right-hand side of the O(1/n) bound on min_{0<=j<=n-2} ||x_{j+1} - y_j||^2,
/// valid for runs started with x_{-2} = x_{-1} = x_0 and rho = 1.
inline double rate_bound(const InertialParams& params, const Vector& x0, const Vector& x_star, long n) {
  if (n < 2) throw InvalidArgument("rate_bound: n must be >= 2");
  if (params.rho != 1.0) throw InvalidArgument("rate_bound: certificates require rho = 1");
  require_same_size(x0, x_star, "rate_bound");
  const auto c = coefficients(params.theta, params.delta);
  const double th = params.theta;
  const double de = params.delta;
  return 3.0 * (1.0 + th * th + de * de) * (1.0 / c.c2) * (1.0 - th - de) * (x0 - x_star).squaredNorm() /
         static_cast<double>(n - 1);
}

namespace detail {

struct LyapunovRecorder {
  Coefficients coeffs;
  LyapunovTrace trace;

  void push(const EngineState& s, const InertialParams& p) {
    auto v = lyapunov_with(coeffs, s.x_curr, s.x_prev, s.x_prev2, trace.x_star, p);
    trace.gamma.push_back(v.gamma);
    trace.gamma_bar.push_back(v.gamma_bar);
  }
};

}  // namespace detail

/// Runs the two-step inertial proximal point iteration from x0.
///
/// The residual is recorded before the stopping test, so a converged record
/// ends with the value that satisfied the tolerance. A non-finite iterate or
/// residual stops the run with status Diverged and keeps what was recorded.
/// Lyapunov recording (config.record_lyapunov) requires rho = 1; the region
/// check is the caller's job, so out-of-region parameters still produce a
/// trace computed with the raw c1 formula.
template <PointMap Map>
RunRecord run(const Map& resolvent, const Vector& x0, const InertialParams& params, const RunConfig& config) {
  if (config.max_iter < 1) throw InvalidArgument("run: max_iter must be >= 1");
  if (!(config.tol > 0.0)) throw InvalidArgument("run: tol must be > 0");
  if (!all_finite(x0)) throw InvalidArgument("run: x0 must be finite");
  if (config.stop_metric == StopMetric::Custom && !config.custom_metric) {
    throw InvalidArgument("run: custom stop metric requested without a metric function");
  }

  const auto t0 = std::chrono::steady_clock::now();
  RunRecord record;
  record.stop_metric = config.stop_metric;
  record.residuals.reserve(std::min<std::size_t>(config.max_iter, 1u << 16));

  std::optional<detail::LyapunovRecorder> lyap;
  if (config.record_lyapunov) {
    if (params.rho != 1.0) throw InvalidArgument("run: Lyapunov certificates require rho = 1");
    require_same_size(x0, *config.record_lyapunov, "run: x_star");
    lyap.emplace(detail::LyapunovRecorder{detail::raw_coefficients(params.theta, params.delta),
                                          LyapunovTrace{{}, {}, *config.record_lyapunov}});
  }

  EngineState state = EngineState::start_at(x0);
  if (lyap) lyap->push(state, params);

  record.status = RunStatus::MaxIterReached;
  for (std::size_t k = 0; k < config.max_iter; ++k) {
    Vector x_next = detail::relaxed_update(resolvent, state.y_curr, params.rho);

    double residual = 0.0;
    switch (config.stop_metric) {
      case StopMetric::ExtrapolationResidual: residual = (state.y_curr - x_next).norm(); break;
      case StopMetric::StepNorm: residual = (x_next - state.x_curr).norm(); break;
      case StopMetric::Custom: residual = config.custom_metric(state, x_next); break;
    }
    record.residuals.push_back(residual);

    const bool finite = std::isfinite(residual) && all_finite(x_next);
    if (config.record_iterates) record.iterates.push_back(x_next);
    state = detail::shift(std::move(state), std::move(x_next), params);
    if (lyap && finite) lyap->push(state, params);

    if (!finite) {
      record.status = RunStatus::Diverged;
      break;
    }
    if (residual <= config.tol) {
      record.status = RunStatus::Converged;
      break;
    }
  }

  record.iterations_used = record.residuals.size();
  record.final_point = state.x_curr;
  if (lyap) record.lyapunov = std::move(lyap->trace);
  record.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return record;
}

/// Worst margins of the two runtime certificates over one recorded run.
struct CertificateReport {
  /// max_n (Gamma-bar_{n+1} - Gamma-bar_n) - tol * max(1, Gamma-bar_0); <= 0 means monotone.
  double lyapunov_margin = -std::numeric_limits<double>::infinity();
  std::optional<std::size_t> lyapunov_violation;  ///< first n with Gamma-bar_{n+1} above tolerance
  /// max_n (min_{j<=n-2} D_j^2 - bound(n)); <= 0 means the rate bound held.
  double rate_margin = -std::numeric_limits<double>::infinity();
  std::optional<std::size_t> rate_violation;  ///< first offending n
  double min_gamma = std::numeric_limits<double>::infinity();

  bool ok() const { return !lyapunov_violation && !rate_violation; }
};

/// Checks Gamma-bar monotonicity and the O(1/n) bound on a run recorded with
/// ExtrapolationResidual and a Lyapunov trace. Parameters are not re-validated,
/// so deliberately out-of-region runs can be audited; a non-positive c2 makes
/// the rate bound vacuous and every n >= 2 is reported as a violation.
inline CertificateReport check_certificates(const RunRecord& record, const InertialParams& params,
                                            const Vector& x0, double rel_tol = 1e-10) {
  if (!record.lyapunov) throw InvalidArgument("check_certificates: run has no Lyapunov trace");
  if (record.stop_metric != StopMetric::ExtrapolationResidual) {
    throw InvalidArgument("check_certificates: residuals must be ||y_n - x_{n+1}||");
  }
  if (params.rho != 1.0) throw InvalidArgument("check_certificates: certificates require rho = 1");

  CertificateReport rep;
  const auto& gb = record.lyapunov->gamma_bar;
  for (double g : record.lyapunov->gamma) rep.min_gamma = std::min(rep.min_gamma, g);
  if (!gb.empty()) {
    const double slack = rel_tol * std::max(1.0, gb.front());
    for (std::size_t n = 0; n + 1 < gb.size(); ++n) {
      const double m = gb[n + 1] - gb[n] - slack;
      rep.lyapunov_margin = std::max(rep.lyapunov_margin, m);
      if (m > 0.0 && !rep.lyapunov_violation) rep.lyapunov_violation = n + 1;
    }
  }

  const auto c = detail::raw_coefficients(params.theta, params.delta);
  const double th = params.theta;
  const double de = params.delta;
  const double scale = 3.0 * (1.0 + th * th + de * de) * (1.0 - th - de) *
                       (x0 - record.lyapunov->x_star).squaredNorm();
  double running_min = std::numeric_limits<double>::infinity();
  // The bound at n covers D_0 .. D_{n-2}; residuals D_0 .. D_{k-1} cover n = 2 .. k+1.
  for (std::size_t j = 0; j < record.residuals.size(); ++j) {
    const double d = record.residuals[j];
    running_min = std::min(running_min, d * d);
    const std::size_t n = j + 2;
    double margin;
    if (c.c2 > 0.0) {
      margin = running_min - scale / c.c2 / static_cast<double>(n - 1);
    } else {
      margin = std::numeric_limits<double>::infinity();
    }
    rep.rate_margin = std::max(rep.rate_margin, margin);
    if (margin > 0.0 && !rep.rate_violation) rep.rate_violation = n;
  }
  return rep;
}

}  // namespace iprox
