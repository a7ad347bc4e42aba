#pragma once

#include "roma/object_spaces.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace roma {

struct LinearKernel {
  double offset = 0.0;
};

struct GaussianKernel {
  double bandwidth = 1.0;
};

// 0.5 [d(a,o) + d(b,o) - d(a,b)] for an anchor o.
struct DistanceKernel {
  std::optional<ObjectPoint> anchor;
};

struct KernelSpec {
  std::variant<LinearKernel, GaussianKernel, DistanceKernel> kind;
  MetricKind metric = MetricKind::Euclidean;

  static KernelSpec linear(MetricKind metric = MetricKind::Euclidean, double offset = 0.0);
  static KernelSpec gaussian(MetricKind metric, double bandwidth);
  static KernelSpec distance_induced(MetricKind metric, std::optional<ObjectPoint> anchor = std::nullopt);

  bool is_linear() const { return std::holds_alternative<LinearKernel>(kind); }
  bool is_gaussian() const { return std::holds_alternative<GaussianKernel>(kind); }
  bool is_distance_induced() const { return std::holds_alternative<DistanceKernel>(kind); }
  double bandwidth() const;
  std::string_view kind_name() const;
};

// Fills in the default anchor (first training point) of a distance-induced kernel.
KernelSpec resolve_anchor(const KernelSpec& spec, std::span<const ObjectPoint> train);

double kernel_eval(const KernelSpec& spec, const ObjectPoint& a, const ObjectPoint& b);

struct GramMatrix {
  Eigen::MatrixXd entries;
  KernelSpec kernel;
};

GramMatrix gram(const KernelSpec& spec, std::span<const ObjectPoint> points);
GramMatrix joint_gram(const GramMatrix& kx, const GramMatrix& km);

Eigen::MatrixXd pairwise_sq_distances(MetricKind metric, std::span<const ObjectPoint> points);
// exp(-gamma d2) entrywise.
GramMatrix gaussian_gram(MetricKind metric, double bandwidth, const Eigen::MatrixXd& sq_distances);

std::vector<double> bandwidth_grid(std::span<const ObjectPoint> points, MetricKind metric, std::size_t size);
std::vector<double> bandwidth_grid(const Eigen::MatrixXd& sq_distances, std::size_t size);

// Single-threaded reference versions of the parallel assembly routines.
namespace serial {
GramMatrix gram(const KernelSpec& spec, std::span<const ObjectPoint> points);
Eigen::MatrixXd pairwise_sq_distances(MetricKind metric, std::span<const ObjectPoint> points);
}  // namespace serial

}  // namespace roma
