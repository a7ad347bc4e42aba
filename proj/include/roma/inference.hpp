#pragma once

#include "roma/estimator.hpp"
#include "roma/weighted_chisq.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace roma {

// n ||G (G + eps I)^{-1} Q (G + eps I)^{-1} d||^2 in the joint and exposure systems.
double variance_functional_z(const MediationFit& fit, const Eigen::VectorXd& d_f);
double variance_functional_x(const MediationFit& fit, const Eigen::VectorXd& d_g);

struct ResidualCovariances {
  Eigen::MatrixXd sigma_w_hat;    // H' W / (n - df), not symmetric in general
  Eigen::MatrixXd sigma_w_check;  // W' W / n
  Eigen::MatrixXd sigma_r_hat;    // R R' / n
  double df;
  Eigen::MatrixXd residuals;         // n x d, rows are outcome residuals
  Eigen::MatrixXd mediator_effects;  // d x n, columns are R_VZ applied to mediator residuals
};

ResidualCovariances residual_covariances(const MediationFit& fit);

struct Interval {
  double center;
  double halfwidth;
  double q;
  // Set when the residual quadratic form was negative beyond 1e-6 ||Sigma_W||
  // and had to be floored at zero.
  bool variance_warning = false;

  double lower() const { return center - halfwidth; }
  double upper() const { return center + halfwidth; }
  bool contains(double y) const { return y >= lower() && y <= upper(); }
};

struct TestResult {
  double statistic;
  Eigen::VectorXd spectrum;
  double p_value;
  ChisqMethod method;
  int davies_fault;
};

struct EffectInference {
  EffectVector effect;
  std::vector<Eigen::VectorXd> directions;
  std::vector<Interval> intervals;
  double theta_z = 0.0;  // variance functional of the joint-system contrast
  double theta_x = 0.0;  // exposure-system term, NIE only
  double variance = 0.0;  // theta_z for NDE, theta_z + theta_x for NIE
  TestResult test;
};

struct InferenceOptions {
  double q = 0.05;
  std::optional<Eigen::Index> truncation;  // default min(n, d)
  // Empty means one direction per coordinate, scaled to read off function
  // values on a quadrature grid.
  std::vector<Eigen::VectorXd> directions;
  bool run_tests = true;
};

// Two-sided standard normal quantile for level q.
double normal_critical_value(double q);

// Caches the residual covariances of one fit.
class MediationInference {
 public:
  explicit MediationInference(const MediationFit& fit);

  const MediationFit& fit() const { return *fit_; }
  const ResidualCovariances& covariances() const { return cov_; }

  Interval ci_nde(const EffectEstimates& est, const Eigen::VectorXd& v, double q) const;
  Interval ci_nie(const EffectEstimates& est, const Eigen::VectorXd& v, double q) const;
  TestResult test_nde(const EffectEstimates& est, std::optional<Eigen::Index> l = std::nullopt) const;
  TestResult test_nie(const EffectEstimates& est, std::optional<Eigen::Index> l = std::nullopt) const;

  EffectInference infer_nde(const EffectEstimates& est, const InferenceOptions& options) const;
  EffectInference infer_nie(const EffectEstimates& est, const InferenceOptions& options) const;

  std::vector<Eigen::VectorXd> default_directions() const;

 private:
  double theta_z_nde(const EffectEstimates& est) const;
  double theta_z_nie(const EffectEstimates& est) const;
  double theta_x(const EffectEstimates& est) const;
  Interval interval(double center, double theta_w, const Eigen::VectorXd& v, double theta_r, double q) const;
  Eigen::Index truncation(std::optional<Eigen::Index> l) const;
  TestResult finish_test(double statistic, Eigen::VectorXd spectrum) const;

  const MediationFit* fit_;
  ResidualCovariances cov_;
  double sigma_w_norm_;
};

Interval ci_nde(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& x_star, const Eigen::VectorXd& v,
                double q);
Interval ci_nie(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& x_star, const Eigen::VectorXd& v,
                double q);
EffectInference test_nde(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& x_star,
                         std::optional<Eigen::Index> l = std::nullopt);
EffectInference test_nie(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& x_star,
                         std::optional<Eigen::Index> l = std::nullopt);

}  // namespace roma
