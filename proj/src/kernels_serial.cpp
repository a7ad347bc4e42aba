#include "roma/errors.hpp"
#include "roma/kernels.hpp"

namespace roma::serial {

GramMatrix gram(const KernelSpec& spec, std::span<const ObjectPoint> points) {
  const std::size_t n = points.size();
  if (n < 2) throw EmptyInputError("gram matrix needs at least two points");
  const KernelSpec k = resolve_anchor(spec, points);
  Eigen::MatrixXd out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = kernel_eval(k, points[i], points[j]);
  return GramMatrix{std::move(out), k};
}

Eigen::MatrixXd pairwise_sq_distances(MetricKind metric, std::span<const ObjectPoint> points) {
  const std::size_t n = points.size();
  Eigen::MatrixXd d2(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d2(i, j) = squared_distance(metric, points[i], points[j]);
  return d2;
}

}  // namespace roma::serial
