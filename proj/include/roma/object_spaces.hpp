#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace roma {

enum class MetricKind { Euclidean, Wasserstein, Spherical, Frobenius };

std::string_view to_string(MetricKind kind);
MetricKind metric_from_string(std::string_view name);

struct Euclidean {
  std::vector<double> coords;
};

// Univariate law observed through a sample; stored sorted.
class EmpiricalDistribution {
 public:
  static EmpiricalDistribution from_samples(std::vector<double> samples);
  static EmpiricalDistribution from_sorted(std::vector<double> sorted);

  const std::vector<double>& sorted() const { return sorted_; }
  std::size_t size() const { return sorted_.size(); }
  // Left-continuous inverse of the empirical CDF: x_(ceil(m t)).
  double quantile(double t) const;

 private:
  explicit EmpiricalDistribution(std::vector<double> sorted) : sorted_(std::move(sorted)) {}
  std::vector<double> sorted_;
};

// Quantile function tabulated at fixed levels in (0,1).
class QuantileGrid {
 public:
  static QuantileGrid make(std::vector<double> levels, std::vector<double> values);

  const std::vector<double>& levels() const { return levels_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  // Piecewise constant on the cells of the quadrature rule for `levels`.
  double quantile(double t) const;

 private:
  QuantileGrid(std::vector<double> levels, std::vector<double> values)
      : levels_(std::move(levels)), values_(std::move(values)) {}
  std::vector<double> levels_;
  std::vector<double> values_;
};

class Composition {
 public:
  static Composition make(std::vector<double> parts);
  const std::vector<double>& parts() const { return parts_; }

 private:
  explicit Composition(std::vector<double> parts) : parts_(std::move(parts)) {}
  std::vector<double> parts_;
};

class SpdMatrix {
 public:
  // entries are row-major, p*p of them.
  static SpdMatrix make(std::size_t p, std::vector<double> entries);
  std::size_t dim() const { return p_; }
  const std::vector<double>& entries() const { return entries_; }

 private:
  SpdMatrix(std::size_t p, std::vector<double> entries) : p_(p), entries_(std::move(entries)) {}
  std::size_t p_;
  std::vector<double> entries_;
};

using ObjectPoint = std::variant<Euclidean, EmpiricalDistribution, QuantileGrid, Composition, SpdMatrix>;

std::string_view variant_name(const ObjectPoint& point);
MetricKind natural_metric(const ObjectPoint& point);

// Quadrature rule on [0,1]; weights sum to one.
struct QuadratureGrid {
  std::vector<double> levels;
  std::vector<double> weights;

  static QuadratureGrid midpoint(std::size_t m);
  // Weights are the lengths of the cells between neighbouring midpoints.
  static QuadratureGrid from_levels(std::vector<double> levels);
  std::size_t size() const { return levels.size(); }
  bool operator==(const QuadratureGrid&) const = default;
};

using GridPtr = std::shared_ptr<const QuadratureGrid>;

// Coordinates of an embedded outcome or effect. When `grid` is set the
// coordinates are function values scaled by sqrt(weight).
struct HilbertVector {
  Eigen::VectorXd coords;
  GridPtr grid;
};

double wasserstein2_empirical(const EmpiricalDistribution& a, const EmpiricalDistribution& b);

HilbertVector embed_outcome(const ObjectPoint& y, const GridPtr& grid);
HilbertVector embed_outcome(const ObjectPoint& y, const QuadratureGrid& grid);

// Throws InvalidObjectError unless the function values of an embedded
// quantile function are nondecreasing.
void check_quantile_embedding(const HilbertVector& v);

double metric_distance(MetricKind space, const ObjectPoint& a, const ObjectPoint& b);
double squared_distance(MetricKind space, const ObjectPoint& a, const ObjectPoint& b);

// Native inner product used by the linear kernel.
double native_inner(const ObjectPoint& a, const ObjectPoint& b);

// Undo the sqrt(weight) scaling of grid-backed coordinates.
std::vector<double> function_values(const HilbertVector& v);

// Weighted least-squares projection onto nondecreasing sequences.
std::vector<double> isotonic_projection(std::span<const double> values, std::span<const double> weights);

}  // namespace roma
