#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "inertial_prox/linalg.hpp"

namespace iprox {

/// Type-erased single-valued map x -> J(x) on R^dim.
///
/// Resolvents are immutable after construction and may be evaluated from
/// several threads at once; any cached factorization lives behind a
/// shared_ptr<const ...>.
class Resolvent {
 public:
  using Fn = std::function<Vector(const Vector&)>;

  Resolvent(Index dim, Fn fn, std::string name = "resolvent")
      : dim_(dim), fn_(std::move(fn)), name_(std::move(name)) {
    if (dim_ < 1) throw InvalidArgument("Resolvent: dimension must be positive");
    if (!fn_) throw InvalidArgument("Resolvent: empty map");
  }

  Vector evaluate(const Vector& x) const {
    if (x.size() != dim_) {
      throw InvalidArgument(name_ + ": expected dimension " + std::to_string(dim_) + ", got " +
                            std::to_string(x.size()));
    }
    return fn_(x);
  }

  Vector operator()(const Vector& x) const { return evaluate(x); }

  Index dimension() const { return dim_; }
  const std::string& name() const { return name_; }

 private:
  Index dim_;
  Fn fn_;
  std::string name_;
};

/// J of the zero operator.
inline Resolvent identity_resolvent(Index dim) {
  return Resolvent(dim, [](const Vector& x) { return x; }, "identity");
}

/// Elementwise max(|z_i| - tau, 0) * sign(z_i), with sign(0) = 0.
inline Vector soft_threshold(const Vector& z, double tau) {
  if (!(tau >= 0.0)) throw InvalidArgument("soft_threshold: tau must be >= 0");
  Vector out(z.size());
  for (Index i = 0; i < z.size(); ++i) {
    const double a = std::abs(z[i]) - tau;
    out[i] = a > 0.0 ? std::copysign(a, z[i]) : 0.0;
  }
  return out;
}

/// Resolvent of lambda * d||.||_1, i.e. soft thresholding at lambda.
inline Resolvent l1_resolvent(Index dim, double lambda) {
  if (!(lambda > 0.0)) throw InvalidArgument("l1_resolvent: lambda must be > 0");
  return Resolvent(dim, [lambda](const Vector& x) { return soft_threshold(x, lambda); }, "l1");
}

/// x -> Qx with Q + Qᵀ positive semidefinite, paired with a proximal parameter.
class LinearMonotoneProblem {
 public:
  LinearMonotoneProblem(Matrix q, double lambda, unsigned probes = 16) : q_(std::move(q)), lambda_(lambda) {
    if (q_.rows() != q_.cols() || q_.rows() < 1) throw InvalidArgument("LinearMonotoneProblem: Q must be square");
    if (!(lambda_ > 0.0)) throw InvalidArgument("LinearMonotoneProblem: lambda must be > 0");
    if (!q_.allFinite()) throw InvalidArgument("LinearMonotoneProblem: Q must be finite");
    const Matrix sym = q_ + q_.transpose();
    const double scale = std::max(1.0, sym.cwiseAbs().maxCoeff());
    for (unsigned k = 0; k < probes; ++k) {
      Vector x(q_.rows());
      for (Index i = 0; i < x.size(); ++i) x[i] = std::cos(1.3 * (i + 1) * (k + 1) + 0.4 * k);
      const double quad = x.dot(sym * x);
      if (quad < -1e-12 * scale * x.squaredNorm()) {
        throw InvalidArgument("LinearMonotoneProblem: Q is not monotone (x'(Q+Q')x < 0)");
      }
    }
  }

  const Matrix& q() const { return q_; }
  double lambda() const { return lambda_; }
  Index dim() const { return q_.rows(); }
  Vector apply(const Vector& x) const { return q_ * x; }

 private:
  Matrix q_;
  double lambda_;
};

/// x -> (I + lambda Q)^{-1} x with the factorization computed once.
/// Symmetric Q uses Cholesky; otherwise partial-pivot LU.
inline Resolvent resolvent_linear(const LinearMonotoneProblem& problem) {
  const Index n = problem.dim();
  Matrix m = Matrix::Identity(n, n) + problem.lambda() * problem.q();
  const bool symmetric = problem.q().isApprox(problem.q().transpose(), 0.0);
  if (symmetric) {
    auto llt = std::make_shared<const Eigen::LLT<Matrix>>(m);
    if (llt->info() != Eigen::Success) throw NumericalError("resolvent_linear: I + lambda Q not positive definite");
    return Resolvent(n, [llt](const Vector& x) -> Vector { return llt->solve(x); }, "linear");
  }
  auto lu = std::make_shared<const Eigen::PartialPivLU<Matrix>>(m);
  if (!(lu->rcond() > 1e-14)) throw NumericalError("resolvent_linear: I + lambda Q numerically singular");
  return Resolvent(n, [lu](const Vector& x) -> Vector { return lu->solve(x); }, "linear");
}

/// argmin_x 0.5||Fx - b||^2 + (1/(2 weight))||x - y||^2 with a cached
/// Cholesky factor of weight FᵀF + I.
class QuadraticProx {
 public:
  QuadraticProx(const Matrix& f, Vector b, double weight) : f_(f), b_(std::move(b)), weight_(weight) {
    if (!(weight_ > 0.0)) throw InvalidArgument("prox_quadratic: weight must be > 0");
    if (f_.rows() != b_.size()) throw InvalidArgument("prox_quadratic: F rows must match b");
    Matrix m = weight_ * (f_.transpose() * f_);
    m.diagonal().array() += 1.0;
    llt_ = std::make_shared<const Eigen::LLT<Matrix>>(m);
    if (llt_->info() != Eigen::Success) throw NumericalError("prox_quadratic: system not positive definite");
    ftb_ = weight_ * (f_.transpose() * b_);
  }

  Vector operator()(const Vector& y) const {
    if (y.size() != f_.cols()) throw InvalidArgument("prox_quadratic: y has wrong dimension");
    return llt_->solve(y + ftb_);
  }

  Index dim() const { return f_.cols(); }

  Resolvent as_resolvent() const {
    auto self = std::make_shared<const QuadraticProx>(*this);
    return Resolvent(dim(), [self](const Vector& y) { return (*self)(y); }, "prox_quadratic");
  }

 private:
  Matrix f_;
  Vector b_;
  double weight_;
  Vector ftb_;
  std::shared_ptr<const Eigen::LLT<Matrix>> llt_;
};

inline Vector prox_quadratic(const Vector& y, const Matrix& f, const Vector& b, double weight) {
  return QuadraticProx(f, b, weight)(y);
}

/// Projection onto {x : Ax = b} for full-row-rank A.
class AffineProjector {
 public:
  AffineProjector(Matrix a, Vector b) : a_(std::move(a)), b_(std::move(b)) {
    if (a_.rows() != b_.size()) throw InvalidArgument("project_affine: A rows must match b");
    if (a_.rows() == 0 || a_.rows() > a_.cols()) {
      throw InvalidArgument("project_affine: A must have full row rank");
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(a_.transpose());
    qr.setThreshold(1e-12);
    if (qr.rank() < a_.rows()) throw InvalidArgument("project_affine: A is rank deficient");
    llt_ = std::make_shared<const Eigen::LLT<Matrix>>(a_ * a_.transpose());
    if (llt_->info() != Eigen::Success) throw NumericalError("project_affine: AAᵀ not positive definite");
  }

  Vector operator()(const Vector& x) const {
    if (x.size() != a_.cols()) throw InvalidArgument("project_affine: x has wrong dimension");
    return x - a_.transpose() * llt_->solve(a_ * x - b_);
  }

  Index dim() const { return a_.cols(); }

  Resolvent as_resolvent() const {
    auto self = std::make_shared<const AffineProjector>(*this);
    return Resolvent(dim(), [self](const Vector& x) { return (*self)(x); }, "project_affine");
  }

 private:
  Matrix a_;
  Vector b_;
  std::shared_ptr<const Eigen::LLT<Matrix>> llt_;
};

inline Vector project_affine(const Vector& x, const Matrix& a, const Vector& b) { return AffineProjector(a, b)(x); }

/// Orthogonal projection onto span(basis); the basis must be orthonormal.
class SubspaceProjector {
 public:
  explicit SubspaceProjector(std::vector<Vector> basis, double tol = 1e-10) {
    if (basis.empty()) throw InvalidArgument("project_subspace: empty basis");
    const Index d = basis.front().size();
    basis_.resize(d, static_cast<Index>(basis.size()));
    for (std::size_t k = 0; k < basis.size(); ++k) {
      if (basis[k].size() != d) throw InvalidArgument("project_subspace: basis vectors differ in dimension");
      basis_.col(static_cast<Index>(k)) = basis[k];
    }
    const Matrix gram = basis_.transpose() * basis_;
    const Index k = gram.rows();
    if (!((gram - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() <= tol)) {
      throw InvalidArgument("project_subspace: basis is not orthonormal");
    }
  }

  Vector operator()(const Vector& x) const {
    if (x.size() != basis_.rows()) throw InvalidArgument("project_subspace: x has wrong dimension");
    return basis_ * (basis_.transpose() * x);
  }

  Index dim() const { return basis_.rows(); }

  Resolvent as_resolvent() const {
    auto self = std::make_shared<const SubspaceProjector>(*this);
    return Resolvent(dim(), [self](const Vector& x) { return (*self)(x); }, "project_subspace");
  }

 private:
  Matrix basis_;  // columns are the basis vectors
};

inline Vector project_subspace(const Vector& x, std::vector<Vector> basis) {
  return SubspaceProjector(std::move(basis))(x);
}

/// Douglas-Rachford operator J_A(2 J_B(x) - x) + x - J_B(x).
inline Vector dr_operator(const Vector& x, const Resolvent& j_a, const Resolvent& j_b) {
  const Vector jb = j_b(x);
  return j_a(2.0 * jb - x) + x - jb;
}

/// The DR operator packaged as a resolvent (of a maximal monotone operator).
inline Resolvent dr_resolvent(Resolvent j_a, Resolvent j_b) {
  if (j_a.dimension() != j_b.dimension()) throw InvalidArgument("dr_resolvent: dimension mismatch");
  const Index d = j_a.dimension();
  return Resolvent(
      d, [ja = std::move(j_a), jb = std::move(j_b)](const Vector& x) { return dr_operator(x, ja, jb); },
      "douglas_rachford");
}

}  // namespace iprox
