#pragma once

#include "roma/kernels.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <optional>
#include <span>

namespace roma {

enum class Basis { X, M, Z };

// QKQ with Q = I - 11'/n.
Eigen::MatrixXd center(const Eigen::MatrixXd& k);

// Centered Gram matrix G with a cached factorization of G + eps I.
class GramSystem {
 public:
  GramSystem(const Eigen::MatrixXd& k, double eps, Basis basis);

  Eigen::Index n() const { return g_.rows(); }
  const Eigen::MatrixXd& centered() const { return g_; }
  double eps() const { return eps_; }
  Basis basis() const { return basis_; }

  // (G + eps I)^{-1} v
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& v) const;
  // G (G + eps I)^{-1} v
  Eigen::VectorXd smooth(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd smooth(const Eigen::MatrixXd& v) const;
  // tr(G (G + eps I)^{-1})
  double hat_trace() const;

  GramSystem with_eps(double eps) const;

 private:
  GramSystem(Eigen::MatrixXd g, double eps, Basis basis, bool);
  void factorize();

  Eigen::MatrixXd g_;
  double eps_;
  Basis basis_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

// Smallest admissible regularization for a centered Gram matrix.
double eps_floor(const Eigen::MatrixXd& g);

Eigen::VectorXd tikhonov_apply(const GramSystem& sys, const Eigen::VectorXd& v);

// (d_x)_i = k(x, X_i) - mean_k k(X_k, X_i)
Eigen::VectorXd eval_vector(const KernelSpec& spec, std::span<const ObjectPoint> train, const ObjectPoint& x);
// Same, with the column means of the training Gram matrix precomputed.
Eigen::VectorXd eval_vector(const KernelSpec& spec, std::span<const ObjectPoint> train, const ObjectPoint& x,
                            const Eigen::VectorXd& column_means);

struct CoordVector {
  Eigen::VectorXd coords;
  Basis basis;
};

// Q (G + eps I)^{-1} d
CoordVector coord_of(const GramSystem& sys, const Eigen::VectorXd& d);

struct SymEigen {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // columns match values; empty unless requested
};

SymEigen sym_eigs(const Eigen::MatrixXd& a, Eigen::Index top_l, bool with_vectors = false);

}  // namespace roma
