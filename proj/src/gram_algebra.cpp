#include "roma/gram_algebra.hpp"

#include "roma/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

namespace roma {

Eigen::MatrixXd center(const Eigen::MatrixXd& k) {
  if (k.rows() != k.cols()) throw DimensionError("matrix to center is not square");
  const Eigen::VectorXd r = k.rowwise().mean();
  const Eigen::RowVectorXd c = k.colwise().mean();
  const double grand = r.mean();
  Eigen::MatrixXd g = k;
  g.colwise() -= r;
  g.rowwise() -= c;
  g.array() += grand;
  return g;
}

double eps_floor(const Eigen::MatrixXd& g) { return 1e-12 * g.trace() / static_cast<double>(g.rows()); }

namespace {

const Eigen::MatrixXd& require_symmetric(const Eigen::MatrixXd& k) {
  if (k.rows() != k.cols()) throw DimensionError("gram matrix is not square");
  const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
  if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) throw SymmetryError("gram matrix is not symmetric");
  return k;
}

}  // namespace

GramSystem::GramSystem(const Eigen::MatrixXd& k, double eps, Basis basis)
    : GramSystem(center(require_symmetric(k)), eps, basis, true) {}

GramSystem::GramSystem(Eigen::MatrixXd g, double eps, Basis basis, bool)
    : g_(std::move(g)), eps_(eps), basis_(basis) {
  if (g_.rows() < 1) throw EmptyInputError("empty gram matrix");
  g_ = 0.5 * (g_ + g_.transpose()).eval();
  factorize();
}

void GramSystem::factorize() {
  if (!std::isfinite(eps_) || !(eps_ > 0.0) || eps_ <= eps_floor(g_)) {
    throw RegularizationTooSmall("regularization " + std::to_string(eps_) + " is at or below the floor " +
                                 std::to_string(eps_floor(g_)));
  }
  if (!g_.allFinite()) throw NumericalError("gram matrix has non-finite entries");
  Eigen::MatrixXd a = g_;
  a.diagonal().array() += eps_;
  llt_.compute(a);
  if (llt_.info() != Eigen::Success) throw NumericalError("G + eps I is not positive definite");
}

Eigen::VectorXd GramSystem::solve(const Eigen::VectorXd& v) const {
  if (v.size() != n()) throw DimensionError("vector length does not match the gram system");
  Eigen::VectorXd x = llt_.solve(v);
  const Eigen::VectorXd r = v - g_ * x - eps_ * x;
  x += llt_.solve(r);
  return x;
}

Eigen::MatrixXd GramSystem::solve(const Eigen::MatrixXd& v) const {
  if (v.rows() != n()) throw DimensionError("matrix rows do not match the gram system");
  Eigen::MatrixXd x = llt_.solve(v);
  const Eigen::MatrixXd r = v - g_ * x - eps_ * x;
  x += llt_.solve(r);
  return x;
}

Eigen::VectorXd GramSystem::smooth(const Eigen::VectorXd& v) const { return g_ * solve(v); }

Eigen::MatrixXd GramSystem::smooth(const Eigen::MatrixXd& v) const { return g_ * solve(v); }

double GramSystem::hat_trace() const {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g_, Eigen::EigenvaluesOnly);
  // The smallest eigenvalue belongs to the constant vector and is exactly zero.
  double s = 0.0;
  for (Eigen::Index j = 1; j < n(); ++j) {
    const double l = std::max(es.eigenvalues()[j], 0.0);
    s += l / (l + eps_);
  }
  return s;
}

GramSystem GramSystem::with_eps(double eps) const { return GramSystem(g_, eps, basis_, true); }

Eigen::VectorXd tikhonov_apply(const GramSystem& sys, const Eigen::VectorXd& v) { return sys.solve(v); }

Eigen::VectorXd eval_vector(const KernelSpec& spec, std::span<const ObjectPoint> train, const ObjectPoint& x,
                            const Eigen::VectorXd& column_means) {
  const auto n = static_cast<Eigen::Index>(train.size());
  if (column_means.size() != n) throw DimensionError("column means do not match the training set");
  Eigen::VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    try {
      d[i] = kernel_eval(spec, x, train[static_cast<std::size_t>(i)]) - column_means[i];
    } catch (Error& e) {
      e.add_context("training point " + std::to_string(i));
      throw;
    }
  }
  return d;
}

Eigen::VectorXd eval_vector(const KernelSpec& spec, std::span<const ObjectPoint> train, const ObjectPoint& x) {
  const Eigen::VectorXd means = gram(spec, train).entries.colwise().mean().transpose();
  return eval_vector(resolve_anchor(spec, train), train, x, means);
}

CoordVector coord_of(const GramSystem& sys, const Eigen::VectorXd& d) {
  if (d.size() != sys.n()) throw DimensionError("evaluation vector length does not match the gram system");
  // Q commutes with (G + eps I)^{-1}; centering first keeps the constant
  // direction, which the solve scales by 1/eps, out of the rounding.
  Eigen::VectorXd c = d;
  c.array() -= c.mean();
  c = sys.solve(c);
  c.array() -= c.mean();
  return CoordVector{std::move(c), sys.basis()};
}

SymEigen sym_eigs(const Eigen::MatrixXd& a, Eigen::Index top_l, bool with_vectors) {
  if (a.rows() != a.cols()) throw DimensionError("matrix is not square");
  const Eigen::Index n = a.rows();
  if (top_l < 1 || top_l > n) throw DimensionError("top_l must lie in [1, " + std::to_string(n) + "]");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) throw SymmetryError("matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, with_vectors ? Eigen::ComputeEigenvectors
                                                                    : Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition did not converge");
  SymEigen out;
  out.values = es.eigenvalues().reverse().head(top_l);
  if (with_vectors) out.vectors = es.eigenvectors().rowwise().reverse().leftCols(top_l);
  return out;
}

}  // namespace roma
