#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace iprox {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Raised when inputs violate a documented precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a linear system or factorization cannot be trusted.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require_same_size(const Vector& a, const Vector& b, const char* what) {
  if (a.size() != b.size()) {
    throw InvalidArgument(std::string(what) + ": dimension mismatch (" +
                          std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
}

inline Vector stack(const Vector& top, const Vector& bottom) {
  Vector out(top.size() + bottom.size());
  out << top, bottom;
  return out;
}

/// Largest singular value of `a` by power iteration on aᵀa.
///
/// Stops after `max_iter` sweeps or when the estimate changes by less than
/// `rel_tol` relative. The start vector is a fixed deterministic pattern that
/// is not orthogonal to constant or alternating vectors, so difference
/// operators are handled.
inline double operator_norm(const Matrix& a, int max_iter = 100, double rel_tol = 1e-12) {
  if (a.size() == 0) return 0.0;
  Vector v(a.cols());
  for (Index i = 0; i < v.size(); ++i) {
    v[i] = 1.0 + std::sin(1.0 + 0.7 * static_cast<double>(i));
  }
  v.normalize();
  double sigma = 0.0;
  for (int k = 0; k < max_iter; ++k) {
    Vector w = a.transpose() * (a * v);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    const double next = std::sqrt(wn);
    v = w / wn;
    if (k > 0 && std::abs(next - sigma) <= rel_tol * next) {
      sigma = next;
      break;
    }
    sigma = next;
  }
  return sigma;
}

}  // namespace iprox
