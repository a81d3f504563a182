#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "inertial_prox/linalg.hpp"

namespace iprox {

/// Inertial weights, proximal parameter and relaxation of the two-step scheme
///   y_n     = x_n + theta (x_n - x_{n-1}) + delta (x_{n-1} - x_{n-2})
///   x_{n+1} = (1 - rho) y_n + rho J(y_n).
struct InertialParams {
  double theta = 0.0;
  double delta = 0.0;
  double lambda = 1.0;
  double rho = 1.0;
};

/// Outcome of a region check; `ok()` when no inequality failed.
struct ValidationResult {
  std::optional<std::string> violation;

  bool ok() const { return !violation.has_value(); }
  explicit operator bool() const { return ok(); }
};

/// Lower end of the admissible delta interval for a given theta.
inline double delta_lower_bound(double theta) { return (3.0 * theta - 1.0) / (3.0 + 4.0 * theta); }

/// Checks 0 <= theta < 1/3 and (3 theta - 1)/(3 + 4 theta) < delta <= 0.
/// The lower delta boundary itself is rejected: c2 vanishes there.
inline ValidationResult validate_params(double theta, double delta) {
  if (!std::isfinite(theta) || !std::isfinite(delta)) {
    throw InvalidArgument("validate_params: theta and delta must be finite");
  }
  if (theta < 0.0) return {"theta must be >= 0"};
  if (!(theta < 1.0 / 3.0)) return {"theta must be < 1/3"};
  if (delta > 0.0) return {"delta must be <= 0"};
  if (!(delta > delta_lower_bound(theta))) {
    return {"delta below lower bound (3*theta-1)/(3+4*theta) = " + std::to_string(delta_lower_bound(theta))};
  }
  return {};
}

/// Full check of an InertialParams, including lambda and rho.
inline ValidationResult validate_params(const InertialParams& p) {
  if (!std::isfinite(p.lambda) || !std::isfinite(p.rho)) {
    throw InvalidArgument("validate_params: lambda and rho must be finite");
  }
  auto region = validate_params(p.theta, p.delta);
  if (!region) return region;
  if (!(p.lambda > 0.0)) return {"lambda must be > 0"};
  if (!(p.rho > 0.0) || p.rho > 1.0) return {"rho must lie in (0, 1]"};
  return {};
}

struct Coefficients {
  double c1 = 0.0;
  double c2 = 0.0;
};

namespace detail {

// No region check; also used when a caller deliberately bypasses validation.
inline Coefficients raw_coefficients(double theta, double delta) {
  const double ad = std::abs(delta);
  Coefficients c;
  c.c1 = -(3.0 * theta - 1.0 + (1.0 + theta) * (ad - delta));
  c.c2 = 1.0 - 3.0 * theta - 2.0 * ad - 2.0 * theta * ad + 2.0 * theta * delta + delta;
  return c;
}

}  // namespace detail

/// Lyapunov coefficients c1, c2 for an admissible (theta, delta).
inline Coefficients coefficients(double theta, double delta) {
  auto v = validate_params(theta, delta);
  if (!v) throw InvalidArgument("coefficients: " + *v.violation);
  return detail::raw_coefficients(theta, delta);
}

}  // namespace iprox
