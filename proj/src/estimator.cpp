#include "roma/estimator.hpp"

#include "roma/errors.hpp"

#include <string>

namespace roma {

namespace {

void center_in_place(Eigen::VectorXd& v) { v.array() -= v.mean(); }

void center_columns(Eigen::MatrixXd& a) { a.rowwise() -= a.colwise().mean(); }

Eigen::MatrixXd stack_outcomes(const std::vector<HilbertVector>& v) {
  if (v.empty()) throw EmptyInputError("no outcomes");
  const Eigen::Index d = v.front().coords.size();
  if (d < 1) throw DimensionError("outcomes have no coordinates");
  Eigen::MatrixXd h(static_cast<Eigen::Index>(v.size()), d);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i].coords.size() != d) {
      throw DimensionError("outcome " + std::to_string(i) + " has " + std::to_string(v[i].coords.size()) +
                           " coordinates, expected " + std::to_string(d));
    }
    check_quantile_embedding(v[i]);
    h.row(static_cast<Eigen::Index>(i)) = v[i].coords.transpose();
  }
  return h;
}

void check_sizes(std::size_t nx, std::size_t nm, std::size_t ny) {
  if (nx != nm || nx != ny) {
    throw DimensionError("sample sizes differ: " + std::to_string(nx) + " exposures, " + std::to_string(nm) +
                         " mediators, " + std::to_string(ny) + " outcomes");
  }
  if (nx < 3) throw EmptyInputError("at least three observations are required");
}

}  // namespace

MediationFit::MediationFit(std::vector<ObjectPoint> x, std::vector<ObjectPoint> m, Eigen::MatrixXd outcomes,
                           GridPtr grid, GramMatrix gram_x, GramMatrix gram_m, double eps, double eps_tilde)
    : x_(std::move(x)),
      m_(std::move(m)),
      kernel_x_(gram_x.kernel),
      kernel_m_(gram_m.kernel),
      k_x_(std::move(gram_x.entries)),
      k_m_(std::move(gram_m.entries)),
      g_m_(center(k_m_)),
      mean_k_x_(k_x_.colwise().mean().transpose()),
      mean_k_m_(k_m_.colwise().mean().transpose()),
      sys_x_(k_x_, eps, Basis::X),
      sys_z_(k_x_ + k_m_, eps_tilde, Basis::Z),
      outcomes_(std::move(outcomes)),
      grid_(std::move(grid)) {
  mean_ = outcomes_.colwise().mean().transpose();
  centered_ = outcomes_;
  center_columns(centered_);
}

MediationFit MediationFit::from_grams(std::vector<ObjectPoint> x, std::vector<ObjectPoint> m,
                                      Eigen::MatrixXd outcomes, GridPtr grid, GramMatrix gram_x, GramMatrix gram_m,
                                      double eps, double eps_tilde) {
  check_sizes(x.size(), m.size(), static_cast<std::size_t>(outcomes.rows()));
  const auto n = static_cast<Eigen::Index>(x.size());
  if (outcomes.cols() < 1) throw DimensionError("outcomes have no coordinates");
  if (!outcomes.allFinite()) throw InvalidObjectError("outcomes have non-finite coordinates");
  if (gram_x.entries.rows() != n || gram_x.entries.cols() != n || gram_m.entries.rows() != n ||
      gram_m.entries.cols() != n) {
    throw DimensionError("gram matrices do not match the sample size");
  }
  const Eigen::MatrixXd gx = center(gram_x.entries);
  const double scale = std::max(1.0, gram_x.entries.cwiseAbs().maxCoeff());
  if (gx.cwiseAbs().maxCoeff() <= 1e-12 * scale) {
    throw DegenerateDataError("exposures are indistinguishable under the exposure kernel");
  }
  return MediationFit(std::move(x), std::move(m), std::move(outcomes), std::move(grid), std::move(gram_x),
                      std::move(gram_m), eps, eps_tilde);
}

MediationFit MediationFit::fit(std::vector<ObjectPoint> x, std::vector<ObjectPoint> m,
                               const std::vector<HilbertVector>& v, const KernelSpec& kernel_x,
                               const KernelSpec& kernel_m, double eps, double eps_tilde) {
  check_sizes(x.size(), m.size(), v.size());
  Eigen::MatrixXd h = stack_outcomes(v);
  GramMatrix kx = gram(kernel_x, x);
  GramMatrix km = gram(kernel_m, m);
  return from_grams(std::move(x), std::move(m), std::move(h), v.front().grid, std::move(kx), std::move(km), eps,
                    eps_tilde);
}

MediationFit MediationFit::fit(std::vector<ObjectPoint> x, std::vector<ObjectPoint> m,
                               const std::vector<ObjectPoint>& y, const KernelSpec& kernel_x,
                               const KernelSpec& kernel_m, double eps, double eps_tilde, const QuadratureGrid& grid) {
  const auto g = std::make_shared<const QuadratureGrid>(grid);
  std::vector<HilbertVector> v;
  v.reserve(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    try {
      v.push_back(embed_outcome(y[i], g));
    } catch (Error& e) {
      e.add_context("outcome " + std::to_string(i));
      throw;
    }
  }
  return fit(std::move(x), std::move(m), v, kernel_x, kernel_m, eps, eps_tilde);
}

Eigen::VectorXd MediationFit::eval_x(const ObjectPoint& x) const { return eval_vector(kernel_x_, x_, x, mean_k_x_); }

Eigen::VectorXd MediationFit::eval_m(const ObjectPoint& m) const { return eval_vector(kernel_m_, m_, m, mean_k_m_); }

Eigen::VectorXd MediationFit::joint_effect(const Eigen::VectorXd& c) const {
  return centered_.transpose() * sys_z_.smooth(c);
}

Eigen::MatrixXd MediationFit::joint_effect(const Eigen::MatrixXd& c) const {
  return centered_.transpose() * sys_z_.smooth(c);
}

HilbertVector MediationFit::as_vector(Eigen::VectorXd coords) const { return HilbertVector{std::move(coords), grid_}; }

PhiPrediction predict_phi(const MediationFit& fit, const ObjectPoint& x) {
  const CoordVector c = coord_of(fit.sys_x(), fit.eval_x(x));
  Eigen::VectorXd w = fit.sys_x().smooth(c.coords);
  w.array() += 1.0 / static_cast<double>(fit.n());
  return PhiPrediction{std::move(w)};
}

double evaluate_phi(const MediationFit& fit, const PhiPrediction& phi, const ObjectPoint& m) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < fit.n(); ++i) s += phi.weights[i] * kernel_eval(fit.kernel_m(), m, fit.train_m()[i]);
  return s;
}

HilbertVector predict_outcome(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& m) {
  const CoordVector c = coord_of(fit.sys_z(), fit.eval_x(x) + fit.eval_m(m));
  Eigen::VectorXd v = fit.outcome_mean() + fit.joint_effect(c.coords);
  return fit.as_vector(std::move(v));
}

ContrastCoords contrast_coords(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& x_star) {
  ContrastCoords c;
  c.d = fit.eval_x(x) - fit.eval_x(x_star);
  c.c_exposure = coord_of(fit.sys_x(), c.d).coords;
  c.c_joint = coord_of(fit.sys_z(), c.d).coords;
  c.phi_weights = fit.sys_x().smooth(c.c_exposure);
  center_in_place(c.phi_weights);
  c.d_phi = fit.gram_m() * c.phi_weights;
  c.c_phi = coord_of(fit.sys_z(), c.d_phi).coords;
  return c;
}

std::string_view to_string(EffectKind kind) {
  switch (kind) {
    case EffectKind::NDE: return "NDE";
    case EffectKind::NIE: return "NIE";
    case EffectKind::TE: return "TE";
  }
  return "unknown";
}

EffectEstimates estimate_effects(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& x_star) {
  ContrastCoords c = contrast_coords(fit, x, x_star);
  Eigen::VectorXd nde = fit.joint_effect(c.c_joint);
  Eigen::VectorXd nie = fit.joint_effect(c.c_phi);
  Eigen::VectorXd te = nde + nie;
  return EffectEstimates{EffectVector{fit.as_vector(std::move(nde)), x, x_star, EffectKind::NDE},
                         EffectVector{fit.as_vector(std::move(nie)), x, x_star, EffectKind::NIE},
                         EffectVector{fit.as_vector(std::move(te)), x, x_star, EffectKind::TE}, std::move(c)};
}

EffectVector estimate_nde(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& x_star) {
  return estimate_effects(fit, x, x_star).nde;
}

EffectVector estimate_nie(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& x_star) {
  return estimate_effects(fit, x, x_star).nie;
}

EffectVector estimate_te(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& x_star) {
  return estimate_effects(fit, x, x_star).te;
}

Eigen::MatrixXd mediator_residual_coords(const MediationFit& fit) {
  const Eigen::Index n = fit.n();
  const Eigen::MatrixXd s = fit.sys_x().solve(fit.sys_x().centered());
  Eigen::MatrixXd rho = -(s.transpose() * s);
  rho.diagonal().array() += 1.0;
  rho.array() -= 1.0 / static_cast<double>(n);
  Eigen::MatrixXd d = fit.gram_m() * rho;
  center_columns(d);
  Eigen::MatrixXd c = fit.sys_z().solve(d);
  center_columns(c);
  return c;
}

Eigen::MatrixXd mediator_residual_effects(const MediationFit& fit) {
  return fit.joint_effect(mediator_residual_coords(fit));
}

}  // namespace roma
