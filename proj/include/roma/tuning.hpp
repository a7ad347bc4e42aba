#pragma once

#include "roma/kernels.hpp"
#include "roma/object_spaces.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace roma {

enum class KernelFamilyKind { Linear, Gaussian, DistanceInduced };

// A kernel together with the bandwidths to search. An empty bandwidth list
// on a Gaussian family means the median-heuristic grid.
struct KernelFamily {
  KernelFamilyKind kind = KernelFamilyKind::Gaussian;
  MetricKind metric = MetricKind::Euclidean;
  std::vector<double> bandwidths;
  double offset = 0.0;
  std::optional<ObjectPoint> anchor;

  static KernelFamily linear(MetricKind metric, double offset = 0.0);
  static KernelFamily gaussian(MetricKind metric, std::vector<double> bandwidths = {});
  static KernelFamily distance_induced(MetricKind metric, std::optional<ObjectPoint> anchor = std::nullopt);
};

// Candidate regularizations. Relative values are multiplied by trace(G)/n.
struct EpsGrid {
  std::vector<double> values;
  bool relative = true;

  static EpsGrid log_relative(std::size_t size = 20, double lo = 1e-6, double hi = 1.0);
  static EpsGrid absolute(std::vector<double> values);
};

enum class TuningMode {
  // Bandwidths and eps~ on the outcome criterion, then eps with kernels fixed.
  Staged,
  // Bandwidths and eps on the mediator criterion, then eps~ with kernels fixed.
  MediatorFirst,
};

struct TuningOptions {
  EpsGrid eps = EpsGrid::log_relative();
  EpsGrid eps_tilde = EpsGrid::log_relative();
  std::size_t bandwidth_grid_size = 9;
  TuningMode mode = TuningMode::Staged;
};

struct GcvCandidate {
  double eps;
  double gamma_x;  // NaN for kernels without a bandwidth
  double gamma_m;
  double score;
};

struct GcvTrace {
  std::vector<GcvCandidate> candidates;
  std::size_t argmin = 0;
  std::size_t rejected = 0;

  const GcvCandidate& best() const { return candidates.at(argmin); }
};

struct Selection {
  GramMatrix gram_x, gram_m;
  double eps, eps_tilde;
  GcvTrace phi, outcome;
};

// Mediator criterion: mean squared RKHS residual of M given X over the
// squared effective-degrees-of-freedom deflation.
double gcv_phi(const GramMatrix& kx, const GramMatrix& km, double eps);
double gcv_phi(std::span<const ObjectPoint> x, std::span<const ObjectPoint> m, const KernelSpec& kernel_x,
               const KernelSpec& kernel_m, double eps);

// Outcome criterion on the embedded outcomes (rows of hv).
double gcv_outcome(const GramMatrix& kx, const GramMatrix& km, const Eigen::MatrixXd& hv, double eps_tilde);
double gcv_outcome(std::span<const ObjectPoint> x, std::span<const ObjectPoint> m, const Eigen::MatrixXd& hv,
                   const KernelSpec& kernel_x, const KernelSpec& kernel_m, double eps_tilde);

// Evaluates a criterion for many regularizations from one eigendecomposition.
class SpectralGcv {
 public:
  // Mediator criterion on G_X with residual geometry G_M.
  static SpectralGcv mediator(const Eigen::MatrixXd& kx, const Eigen::MatrixXd& km);
  // Outcome criterion on G_Z = center(K_X + K_M).
  static SpectralGcv outcome(const Eigen::MatrixXd& kz, const Eigen::MatrixXd& hv);

  // Throws RegularizationTooSmall or SaturatedModelError for inadmissible eps.
  double score(double eps) const;
  double scale() const { return trace_ / static_cast<double>(values_.size()); }
  double floor() const;

 private:
  SpectralGcv(Eigen::VectorXd values, Eigen::VectorXd weights, double trace)
      : values_(std::move(values)), weights_(std::move(weights)), trace_(trace) {}
  Eigen::VectorXd values_;   // eigenvalues of G
  Eigen::VectorXd weights_;  // residual mass per eigendirection
  double trace_;
};

Selection select(std::span<const ObjectPoint> x, std::span<const ObjectPoint> m, const Eigen::MatrixXd& hv,
                 const KernelFamily& family_x, const KernelFamily& family_m, const TuningOptions& options = {});

}  // namespace roma
