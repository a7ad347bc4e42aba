#pragma once

#include "roma/gram_algebra.hpp"
#include "roma/kernels.hpp"
#include "roma/object_spaces.hpp"

#include <Eigen/Dense>

#include <vector>

namespace roma {

class MediationFit {
 public:
  static MediationFit fit(std::vector<ObjectPoint> x, std::vector<ObjectPoint> m, const std::vector<ObjectPoint>& y,
                          const KernelSpec& kernel_x, const KernelSpec& kernel_m, double eps, double eps_tilde,
                          const QuadratureGrid& grid);
  static MediationFit fit(std::vector<ObjectPoint> x, std::vector<ObjectPoint> m, const std::vector<HilbertVector>& v,
                          const KernelSpec& kernel_x, const KernelSpec& kernel_m, double eps, double eps_tilde);
  // Rows of `outcomes` are the embedded outcomes. The Gram matrices must have
  // been assembled on `x` and `m`.
  static MediationFit from_grams(std::vector<ObjectPoint> x, std::vector<ObjectPoint> m, Eigen::MatrixXd outcomes,
                                 GridPtr grid, GramMatrix gram_x, GramMatrix gram_m, double eps, double eps_tilde);

  Eigen::Index n() const { return outcomes_.rows(); }
  Eigen::Index dim() const { return outcomes_.cols(); }
  const KernelSpec& kernel_x() const { return kernel_x_; }
  const KernelSpec& kernel_m() const { return kernel_m_; }
  const GramSystem& sys_x() const { return sys_x_; }
  const GramSystem& sys_z() const { return sys_z_; }
  double eps() const { return sys_x_.eps(); }
  double eps_tilde() const { return sys_z_.eps(); }
  const Eigen::MatrixXd& gram_x() const { return k_x_; }
  const Eigen::MatrixXd& gram_m() const { return k_m_; }
  const Eigen::MatrixXd& centered_m() const { return g_m_; }
  const Eigen::MatrixXd& outcomes() const { return outcomes_; }
  // Outcomes with their column means removed.
  const Eigen::MatrixXd& centered_outcomes() const { return centered_; }
  const Eigen::VectorXd& outcome_mean() const { return mean_; }
  const GridPtr& grid() const { return grid_; }
  const std::vector<ObjectPoint>& train_x() const { return x_; }
  const std::vector<ObjectPoint>& train_m() const { return m_; }

  Eigen::VectorXd eval_x(const ObjectPoint& x) const;
  Eigen::VectorXd eval_m(const ObjectPoint& m) const;
  // H_V' G_Z (G_Z + eps~ I)^{-1} c for joint-basis coordinates c.
  Eigen::VectorXd joint_effect(const Eigen::VectorXd& c) const;
  Eigen::MatrixXd joint_effect(const Eigen::MatrixXd& c) const;

  HilbertVector as_vector(Eigen::VectorXd coords) const;

 private:
  MediationFit(std::vector<ObjectPoint> x, std::vector<ObjectPoint> m, Eigen::MatrixXd outcomes, GridPtr grid,
               GramMatrix gram_x, GramMatrix gram_m, double eps, double eps_tilde);

  std::vector<ObjectPoint> x_, m_;
  KernelSpec kernel_x_, kernel_m_;
  Eigen::MatrixXd k_x_, k_m_, g_m_;
  Eigen::VectorXd mean_k_x_, mean_k_m_;
  GramSystem sys_x_, sys_z_;
  Eigen::MatrixXd outcomes_, centered_;
  Eigen::VectorXd mean_;
  GridPtr grid_;
};

// Phi(x) = sum_i weights_i tau_M(M_i).
struct PhiPrediction {
  Eigen::VectorXd weights;
};

PhiPrediction predict_phi(const MediationFit& fit, const ObjectPoint& x);
double evaluate_phi(const MediationFit& fit, const PhiPrediction& phi, const ObjectPoint& m);
HilbertVector predict_outcome(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& m);

// Coordinates shared by the effect estimates and their inference.
struct ContrastCoords {
  Eigen::VectorXd d;            // d_x - d_x*
  Eigen::VectorXd c_exposure;   // Q (G_X + eps I)^{-1} d
  Eigen::VectorXd c_joint;      // Q (G_Z + eps~ I)^{-1} d
  Eigen::VectorXd phi_weights;  // Phi(x) - Phi(x*) over tau_M(M_i)
  Eigen::VectorXd d_phi;        // K_M phi_weights
  Eigen::VectorXd c_phi;        // Q (G_Z + eps~ I)^{-1} d_phi
};

ContrastCoords contrast_coords(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& x_star);

enum class EffectKind { NDE, NIE, TE };
std::string_view to_string(EffectKind kind);

struct EffectVector {
  HilbertVector value;
  ObjectPoint x, x_star;
  EffectKind kind;
};

EffectVector estimate_nde(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& x_star);
EffectVector estimate_nie(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& x_star);
EffectVector estimate_te(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& x_star);

struct EffectEstimates {
  EffectVector nde, nie, te;
  ContrastCoords coords;
};

EffectEstimates estimate_effects(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& x_star);

// Column i holds the joint-basis coordinates of tau_M(M_i) - Phi(X_i).
Eigen::MatrixXd mediator_residual_coords(const MediationFit& fit);
// Column i holds R_VZ (tau_M(M_i) - Phi(X_i)).
Eigen::MatrixXd mediator_residual_effects(const MediationFit& fit);

}  // namespace roma
