#include "roma/inference.hpp"

#include "roma/errors.hpp"
#include "roma/gram_algebra.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace roma {

namespace {

double theta(const GramSystem& sys, const Eigen::VectorXd& d) {
  const Eigen::VectorXd s = sys.smooth(coord_of(sys, d).coords);
  return static_cast<double>(sys.n()) * s.squaredNorm();
}

Eigen::VectorXd top_spectrum(const Eigen::MatrixXd& inner, Eigen::Index l) {
  Eigen::VectorXd v = sym_eigs(0.5 * (inner + inner.transpose()), l).values;
  return v.cwiseMax(0.0);
}

}  // namespace

double variance_functional_z(const MediationFit& fit, const Eigen::VectorXd& d_f) { return theta(fit.sys_z(), d_f); }

double variance_functional_x(const MediationFit& fit, const Eigen::VectorXd& d_g) { return theta(fit.sys_x(), d_g); }

ResidualCovariances residual_covariances(const MediationFit& fit) {
  const auto n = static_cast<double>(fit.n());
  ResidualCovariances cov;
  cov.df = fit.sys_z().hat_trace() + 1.0;
  if (!(cov.df < n)) {
    throw SaturatedModelError("effective degrees of freedom " + std::to_string(cov.df) + " reach the sample size");
  }
  const Eigen::MatrixXd s = fit.sys_z().solve(fit.sys_z().centered());
  const Eigen::MatrixXd& h = fit.centered_outcomes();
  cov.residuals = h - s.transpose() * (s * h);
  cov.sigma_w_hat = fit.centered_outcomes().transpose() * cov.residuals / (n - cov.df);
  cov.sigma_w_check = cov.residuals.transpose() * cov.residuals / n;
  cov.mediator_effects = mediator_residual_effects(fit);
  cov.sigma_r_hat = cov.mediator_effects * cov.mediator_effects.transpose() / n;
  return cov;
}

double normal_critical_value(double q) {
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("confidence level q must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal(), 1.0 - 0.5 * q);
}

MediationInference::MediationInference(const MediationFit& fit)
    : fit_(&fit), cov_(residual_covariances(fit)), sigma_w_norm_(cov_.sigma_w_hat.norm()) {}

double MediationInference::theta_z_nde(const EffectEstimates& est) const {
  return variance_functional_z(*fit_, est.coords.d);
}

double MediationInference::theta_z_nie(const EffectEstimates& est) const {
  return variance_functional_z(*fit_, est.coords.d_phi);
}

double MediationInference::theta_x(const EffectEstimates& est) const {
  return variance_functional_x(*fit_, est.coords.d);
}

Interval MediationInference::interval(double center, double theta_w, const Eigen::VectorXd& v, double theta_r,
                                      double q) const {
  if (v.size() != fit_->dim()) throw DimensionError("direction length does not match the outcome dimension");
  const double vv = v.squaredNorm();
  if (!(vv > 0.0)) throw ConfigError("direction must be nonzero");
  const double n = static_cast<double>(fit_->n());
  Interval out{center, 0.0, q};
  double w = v.dot(cov_.sigma_w_hat * v);
  if (w < 0.0) {
    out.variance_warning = -w > 1e-6 * sigma_w_norm_ * vv;
    w = 0.0;
  }
  double var = theta_w / n * w;
  if (theta_r != 0.0) var += theta_r / n * std::max(0.0, v.dot(cov_.sigma_r_hat * v));
  out.halfwidth = normal_critical_value(q) * std::sqrt(var);
  return out;
}

Interval MediationInference::ci_nde(const EffectEstimates& est, const Eigen::VectorXd& v, double q) const {
  return interval(est.nde.value.coords.dot(v), theta_z_nde(est), v, 0.0, q);
}

Interval MediationInference::ci_nie(const EffectEstimates& est, const Eigen::VectorXd& v, double q) const {
  return interval(est.nie.value.coords.dot(v), theta_z_nie(est), v, theta_x(est), q);
}

Eigen::Index MediationInference::truncation(std::optional<Eigen::Index> l) const {
  const Eigen::Index cap = std::min(fit_->n(), fit_->dim());
  const Eigen::Index v = l.value_or(cap);
  if (v < 1 || v > cap) throw ConfigError("truncation must lie in [1, " + std::to_string(cap) + "]");
  return v;
}

TestResult MediationInference::finish_test(double statistic, Eigen::VectorXd spectrum) const {
  std::vector<double> lambdas(spectrum.data(), spectrum.data() + spectrum.size());
  const ChisqResult r = weighted_chisq(lambdas, statistic);
  return TestResult{statistic, std::move(spectrum), std::clamp(1.0 - r.cdf, 0.0, 1.0), r.method, r.davies_fault};
}

TestResult MediationInference::test_nde(const EffectEstimates& est, std::optional<Eigen::Index> l) const {
  const Eigen::Index ll = truncation(l);
  const double t = theta_z_nde(est);
  if (!(t > 0.0)) throw DegenerateContrastError("the exposure contrast has zero variance functional");
  const double n = static_cast<double>(fit_->n());
  const double statistic = n * est.nde.value.coords.squaredNorm() / t;
  const Eigen::MatrixXd inner = cov_.residuals * cov_.residuals.transpose() / n;
  return finish_test(statistic, top_spectrum(inner, ll));
}

TestResult MediationInference::test_nie(const EffectEstimates& est, std::optional<Eigen::Index> l) const {
  const Eigen::Index ll = truncation(l);
  const double tz = theta_z_nie(est);
  const double tx = theta_x(est);
  const double var = tz + tx;
  if (!(var > 0.0)) throw DegenerateContrastError("the exposure contrast has zero variance functional");
  const double n = static_cast<double>(fit_->n());
  const double statistic = n * est.nie.value.coords.squaredNorm() / var;
  const Eigen::Index nn = fit_->n();
  Eigen::MatrixXd factor(fit_->dim(), 2 * nn);
  factor.leftCols(nn) = std::sqrt(tz / var / n) * cov_.residuals.transpose();
  factor.rightCols(nn) = std::sqrt(tx / var / n) * cov_.mediator_effects;
  const Eigen::MatrixXd inner = factor.transpose() * factor;
  return finish_test(statistic, top_spectrum(inner, ll));
}

std::vector<Eigen::VectorXd> MediationInference::default_directions() const {
  const Eigen::Index d = fit_->dim();
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(d));
  for (Eigen::Index k = 0; k < d; ++k) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
    v[k] = fit_->grid() ? 1.0 / std::sqrt(fit_->grid()->weights[static_cast<std::size_t>(k)]) : 1.0;
    out.push_back(std::move(v));
  }
  return out;
}

EffectInference MediationInference::infer_nde(const EffectEstimates& est, const InferenceOptions& options) const {
  EffectInference out{est.nde, options.directions.empty() ? default_directions() : options.directions, {}, 0.0, 0.0, 0.0, {}};
  out.theta_z = theta_z_nde(est);
  out.variance = out.theta_z;
  for (const auto& v : out.directions) out.intervals.push_back(interval(est.nde.value.coords.dot(v), out.theta_z, v, 0.0, options.q));
  if (options.run_tests) out.test = test_nde(est, options.truncation);
  return out;
}

EffectInference MediationInference::infer_nie(const EffectEstimates& est, const InferenceOptions& options) const {
  EffectInference out{est.nie, options.directions.empty() ? default_directions() : options.directions, {}, 0.0, 0.0, 0.0, {}};
  out.theta_z = theta_z_nie(est);
  out.theta_x = theta_x(est);
  out.variance = out.theta_z + out.theta_x;
  for (const auto& v : out.directions) {
    out.intervals.push_back(interval(est.nie.value.coords.dot(v), out.theta_z, v, out.theta_x, options.q));
  }
  if (options.run_tests) out.test = test_nie(est, options.truncation);
  return out;
}

Interval ci_nde(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& x_star, const Eigen::VectorXd& v,
                double q) {
  return MediationInference(fit).ci_nde(estimate_effects(fit, x, x_star), v, q);
}

Interval ci_nie(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& x_star, const Eigen::VectorXd& v,
                double q) {
  return MediationInference(fit).ci_nie(estimate_effects(fit, x, x_star), v, q);
}

EffectInference test_nde(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& x_star,
                         std::optional<Eigen::Index> l) {
  InferenceOptions options;
  options.truncation = l;
  return MediationInference(fit).infer_nde(estimate_effects(fit, x, x_star), options);
}

EffectInference test_nie(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& x_star,
                         std::optional<Eigen::Index> l) {
  InferenceOptions options;
  options.truncation = l;
  return MediationInference(fit).infer_nie(estimate_effects(fit, x, x_star), options);
}

}  // namespace roma
