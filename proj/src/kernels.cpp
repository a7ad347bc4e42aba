#include "roma/kernels.hpp"

#include "roma/errors.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>

namespace roma {

namespace {

// Runs f(i, j) for all j >= i across threads. The first failure in row-major
// order is rethrown with its index pair attached.
template <typename F>
void for_upper_pairs(std::size_t n, F&& f) {
  std::exception_ptr failure;
  std::size_t failed_at = n * n;
  const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t ii = 0; ii < nn; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = i; j < n; ++j) {
      try {
        f(i, j);
      } catch (Error& e) {
#pragma omp critical(roma_pair_failure)
        {
          if (i * n + j < failed_at) {
            failed_at = i * n + j;
            e.add_context("pair (" + std::to_string(i) + ", " + std::to_string(j) + ")");
            failure = std::current_exception();
          }
        }
        break;
      } catch (...) {
#pragma omp critical(roma_pair_failure)
        {
          if (i * n + j < failed_at) {
            failed_at = i * n + j;
            failure = std::current_exception();
          }
        }
        break;
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

KernelSpec KernelSpec::linear(MetricKind metric, double offset) {
  if (!(offset >= 0.0) || !std::isfinite(offset)) throw ConfigError("linear kernel offset must be finite and >= 0");
  return KernelSpec{LinearKernel{offset}, metric};
}

KernelSpec KernelSpec::gaussian(MetricKind metric, double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw ConfigError("gaussian bandwidth must be positive");
  return KernelSpec{GaussianKernel{bandwidth}, metric};
}

KernelSpec KernelSpec::distance_induced(MetricKind metric, std::optional<ObjectPoint> anchor) {
  return KernelSpec{DistanceKernel{std::move(anchor)}, metric};
}

double KernelSpec::bandwidth() const {
  if (const auto* g = std::get_if<GaussianKernel>(&kind)) return g->bandwidth;
  throw ConfigError("kernel has no bandwidth");
}

std::string_view KernelSpec::kind_name() const {
  switch (kind.index()) {
    case 0: return "linear";
    case 1: return "gaussian";
    default: return "distance_induced";
  }
}

KernelSpec resolve_anchor(const KernelSpec& spec, std::span<const ObjectPoint> train) {
  const auto* d = std::get_if<DistanceKernel>(&spec.kind);
  if (!d || d->anchor) return spec;
  if (train.empty()) throw EmptyInputError("no training point to anchor the distance-induced kernel");
  return KernelSpec::distance_induced(spec.metric, train.front());
}

double kernel_eval(const KernelSpec& spec, const ObjectPoint& a, const ObjectPoint& b) {
  return std::visit(
      [&](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, LinearKernel>) {
          return native_inner(a, b) + k.offset;
        } else if constexpr (std::is_same_v<T, GaussianKernel>) {
          return std::exp(-k.bandwidth * squared_distance(spec.metric, a, b));
        } else {
          if (!k.anchor) throw ConfigError("distance-induced kernel has no anchor");
          return 0.5 * (metric_distance(spec.metric, a, *k.anchor) + metric_distance(spec.metric, b, *k.anchor) -
                        metric_distance(spec.metric, a, b));
        }
      },
      spec.kind);
}

GramMatrix gram(const KernelSpec& spec, std::span<const ObjectPoint> points) {
  const std::size_t n = points.size();
  if (n < 2) throw EmptyInputError("gram matrix needs at least two points");
  const KernelSpec k = resolve_anchor(spec, points);
  Eigen::MatrixXd out(n, n);
  if (const auto* d = std::get_if<DistanceKernel>(&k.kind)) {
    std::vector<double> to_anchor(n);
    for (std::size_t i = 0; i < n; ++i) {
      try {
        to_anchor[i] = metric_distance(k.metric, points[i], *d->anchor);
      } catch (Error& e) {
        e.add_context("point " + std::to_string(i) + " against anchor");
        throw;
      }
    }
    for_upper_pairs(n, [&](std::size_t i, std::size_t j) {
      const double dij = i == j ? 0.0 : metric_distance(k.metric, points[i], points[j]);
      const double v = 0.5 * (to_anchor[i] + to_anchor[j] - dij);
      out(i, j) = v;
      out(j, i) = v;
    });
  } else {
    for_upper_pairs(n, [&](std::size_t i, std::size_t j) {
      const double v = kernel_eval(k, points[i], points[j]);
      out(i, j) = v;
      out(j, i) = v;
    });
  }
  return GramMatrix{std::move(out), k};
}

GramMatrix joint_gram(const GramMatrix& kx, const GramMatrix& km) {
  if (kx.entries.rows() != km.entries.rows() || kx.entries.cols() != km.entries.cols()) {
    throw DimensionError("gram matrices differ in size");
  }
  return GramMatrix{kx.entries + km.entries, kx.kernel};
}

Eigen::MatrixXd pairwise_sq_distances(MetricKind metric, std::span<const ObjectPoint> points) {
  const std::size_t n = points.size();
  Eigen::MatrixXd d2(n, n);
  for_upper_pairs(n, [&](std::size_t i, std::size_t j) {
    const double v = i == j ? 0.0 : squared_distance(metric, points[i], points[j]);
    d2(i, j) = v;
    d2(j, i) = v;
  });
  return d2;
}

GramMatrix gaussian_gram(MetricKind metric, double bandwidth, const Eigen::MatrixXd& sq_distances) {
  const KernelSpec spec = KernelSpec::gaussian(metric, bandwidth);
  Eigen::MatrixXd k = (-bandwidth * sq_distances.array()).exp().matrix();
  return GramMatrix{std::move(k), spec};
}

std::vector<double> bandwidth_grid(const Eigen::MatrixXd& sq_distances, std::size_t size) {
  if (size == 0) throw ConfigError("bandwidth grid size must be at least 1");
  const auto n = sq_distances.rows();
  std::vector<double> upper;
  upper.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) upper.push_back(sq_distances(i, j));
  auto median_of = [](std::vector<double> v) {
    const std::size_t h = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h), v.end());
    double med = v[h];
    if (v.size() % 2 == 0) med = 0.5 * (med + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h)));
    return med;
  };
  std::vector<double> positive;
  for (double v : upper)
    if (v > 0.0) positive.push_back(v);
  if (positive.empty()) throw DegenerateDataError("all pairwise distances are zero");
  double med = median_of(upper);
  if (!(med > 0.0)) med = median_of(positive);
  const double center = 1.0 / med;
  std::vector<double> grid(size);
  for (std::size_t k = 0; k < size; ++k) {
    const double e = size == 1 ? 0.0 : -2.0 + 4.0 * static_cast<double>(k) / static_cast<double>(size - 1);
    grid[k] = center * std::pow(10.0, e);
  }
  if (size % 2 == 1) grid[size / 2] = center;
  return grid;
}

std::vector<double> bandwidth_grid(std::span<const ObjectPoint> points, MetricKind metric, std::size_t size) {
  if (points.size() < 2) throw EmptyInputError("bandwidth grid needs at least two points");
  return bandwidth_grid(pairwise_sq_distances(metric, points), size);
}

}  // namespace roma
