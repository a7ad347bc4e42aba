#include "roma/object_spaces.hpp"

#include "roma/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace roma {

namespace {

void require_finite(const std::vector<double>& values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidObjectError(std::string(what) + " has a non-finite entry");
  }
}

std::vector<double> cell_weights(const std::vector<double>& levels) {
  const std::size_t m = levels.size();
  std::vector<double> w(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double lo = k == 0 ? 0.0 : 0.5 * (levels[k - 1] + levels[k]);
    const double hi = k + 1 == m ? 1.0 : 0.5 * (levels[k] + levels[k + 1]);
    w[k] = hi - lo;
  }
  return w;
}

void check_levels(const std::vector<double>& levels) {
  if (levels.empty()) throw GridError("quantile grid is empty");
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const double t = levels[k];
    if (!(t > 0.0 && t < 1.0)) throw GridError("grid level outside (0,1) at index " + std::to_string(k));
    if (k > 0 && !(t > levels[k - 1])) throw GridError("grid levels not strictly increasing at index " + std::to_string(k));
  }
}

double quantile_of(const ObjectPoint& p, double t) {
  if (const auto* e = std::get_if<EmpiricalDistribution>(&p)) return e->quantile(t);
  return std::get<QuantileGrid>(p).quantile(t);
}

std::size_t distribution_size(const ObjectPoint& p) {
  if (const auto* e = std::get_if<EmpiricalDistribution>(&p)) return e->size();
  return std::get<QuantileGrid>(p).size();
}

bool is_distribution(const ObjectPoint& p) {
  return std::holds_alternative<EmpiricalDistribution>(p) || std::holds_alternative<QuantileGrid>(p);
}

// L2[0,1] inner product of two quantile functions, or of their difference
// when `difference` is set.
double quantile_l2(const ObjectPoint& a, const ObjectPoint& b, bool difference) {
  const auto* ea = std::get_if<EmpiricalDistribution>(&a);
  const auto* eb = std::get_if<EmpiricalDistribution>(&b);
  if (ea && eb && ea->size() == eb->size()) {
    const auto& x = ea->sorted();
    const auto& y = eb->sorted();
    double s = 0.0;
    if (difference) {
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double r = x[j] - y[j];
        s += r * r;
      }
    } else {
      for (std::size_t j = 0; j < x.size(); ++j) s += x[j] * y[j];
    }
    return s / static_cast<double>(x.size());
  }
  const auto* qa = std::get_if<QuantileGrid>(&a);
  const auto* qb = std::get_if<QuantileGrid>(&b);
  if (qa && qb && qa->levels() == qb->levels()) {
    const auto w = cell_weights(qa->levels());
    double s = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double u = qa->values()[k];
      const double v = qb->values()[k];
      s += w[k] * (difference ? (u - v) * (u - v) : u * v);
    }
    return s;
  }
  const std::size_t m = std::max(distribution_size(a), distribution_size(b));
  double s = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double t = (static_cast<double>(k) + 0.5) / static_cast<double>(m);
    const double u = quantile_of(a, t);
    const double v = quantile_of(b, t);
    s += difference ? (u - v) * (u - v) : u * v;
  }
  return s / static_cast<double>(m);
}

// Angle between the points on the unit sphere, 2 atan2(|u - v|, |u + v|),
// which stays accurate for nearby points.
double sphere_angle(const ObjectPoint& a, const ObjectPoint& b) {
  std::vector<double> u, v;
  if (const auto* ca = std::get_if<Composition>(&a)) {
    const auto& pa = ca->parts();
    const auto& pb = std::get<Composition>(b).parts();
    if (pa.size() != pb.size()) throw DimensionError("composition lengths differ");
    for (std::size_t i = 0; i < pa.size(); ++i) {
      u.push_back(std::sqrt(pa[i]));
      v.push_back(std::sqrt(pb[i]));
    }
  } else {
    u = std::get<Euclidean>(a).coords;
    v = std::get<Euclidean>(b).coords;
    if (u.size() != v.size()) throw DimensionError("vector lengths differ");
  }
  double nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  nu = std::sqrt(nu);
  nv = std::sqrt(nv);
  if (!(nu > 0.0) || !(nv > 0.0)) throw InvalidObjectError("zero vector has no direction on the sphere");
  double minus = 0.0, plus = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double x = u[i] / nu, y = v[i] / nv;
    minus += (x - y) * (x - y);
    plus += (x + y) * (x + y);
  }
  return 2.0 * std::atan2(std::sqrt(minus), std::sqrt(plus));
}

void check_pair(MetricKind space, const ObjectPoint& a, const ObjectPoint& b) {
  if (a.index() != b.index()) {
    throw TypeMismatchError(std::string("cannot compare ") + std::string(variant_name(a)) + " with " +
                            std::string(variant_name(b)));
  }
  bool ok = false;
  switch (space) {
    case MetricKind::Euclidean: ok = std::holds_alternative<Euclidean>(a); break;
    case MetricKind::Wasserstein: ok = is_distribution(a); break;
    case MetricKind::Spherical:
      ok = std::holds_alternative<Composition>(a) || std::holds_alternative<Euclidean>(a);
      break;
    case MetricKind::Frobenius: ok = std::holds_alternative<SpdMatrix>(a); break;
  }
  if (!ok) {
    throw TypeMismatchError(std::string(to_string(space)) + " metric does not apply to " +
                            std::string(variant_name(a)));
  }
}

}  // namespace

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::Euclidean: return "euclidean";
    case MetricKind::Wasserstein: return "wasserstein";
    case MetricKind::Spherical: return "spherical";
    case MetricKind::Frobenius: return "frobenius";
  }
  return "unknown";
}

MetricKind metric_from_string(std::string_view name) {
  if (name == "euclidean") return MetricKind::Euclidean;
  if (name == "wasserstein") return MetricKind::Wasserstein;
  if (name == "spherical") return MetricKind::Spherical;
  if (name == "frobenius") return MetricKind::Frobenius;
  throw ConfigError("unknown metric '" + std::string(name) + "'");
}

EmpiricalDistribution EmpiricalDistribution::from_samples(std::vector<double> samples) {
  if (samples.empty()) throw EmptyInputError("empirical distribution needs at least one sample");
  require_finite(samples, "sample");
  std::sort(samples.begin(), samples.end());
  return EmpiricalDistribution(std::move(samples));
}

EmpiricalDistribution EmpiricalDistribution::from_sorted(std::vector<double> sorted) {
  if (sorted.empty()) throw EmptyInputError("empirical distribution needs at least one sample");
  require_finite(sorted, "sample");
  if (!std::is_sorted(sorted.begin(), sorted.end())) throw InvalidObjectError("sample is not sorted");
  return EmpiricalDistribution(std::move(sorted));
}

double EmpiricalDistribution::quantile(double t) const {
  const double m = static_cast<double>(sorted_.size());
  auto k = static_cast<std::ptrdiff_t>(std::ceil(m * t));
  k = std::clamp<std::ptrdiff_t>(k, 1, static_cast<std::ptrdiff_t>(sorted_.size()));
  return sorted_[static_cast<std::size_t>(k - 1)];
}

QuantileGrid QuantileGrid::make(std::vector<double> levels, std::vector<double> values) {
  check_levels(levels);
  if (levels.size() != values.size()) throw DimensionError("quantile grid has mismatched levels and values");
  require_finite(values, "quantile grid");
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] < values[k - 1]) throw InvalidObjectError("quantile values decrease at index " + std::to_string(k));
  }
  return QuantileGrid(std::move(levels), std::move(values));
}

double QuantileGrid::quantile(double t) const {
  const std::size_t m = levels_.size();
  std::size_t k = 0;
  while (k + 1 < m && t > 0.5 * (levels_[k] + levels_[k + 1])) ++k;
  return values_[k];
}

Composition Composition::make(std::vector<double> parts) {
  if (parts.empty()) throw EmptyInputError("composition has no parts");
  require_finite(parts, "composition");
  double total = 0.0;
  for (double p : parts) {
    if (p < 0.0) throw InvalidObjectError("composition has a negative part");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidObjectError("composition parts do not sum to one");
  return Composition(std::move(parts));
}

SpdMatrix SpdMatrix::make(std::size_t p, std::vector<double> entries) {
  if (p == 0) throw EmptyInputError("matrix dimension is zero");
  if (entries.size() != p * p) throw DimensionError("expected " + std::to_string(p * p) + " matrix entries");
  require_finite(entries, "matrix");
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> a(entries.data(),
                                                                                             p, p);
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-9) throw InvalidObjectError("matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-9) throw InvalidObjectError("matrix is not positive semidefinite");
  return SpdMatrix(p, std::move(entries));
}

std::string_view variant_name(const ObjectPoint& point) {
  switch (point.index()) {
    case 0: return "euclidean";
    case 1: return "empirical distribution";
    case 2: return "quantile grid";
    case 3: return "composition";
    case 4: return "spd matrix";
  }
  return "unknown";
}

MetricKind natural_metric(const ObjectPoint& point) {
  switch (point.index()) {
    case 1:
    case 2: return MetricKind::Wasserstein;
    case 3: return MetricKind::Spherical;
    case 4: return MetricKind::Frobenius;
    default: return MetricKind::Euclidean;
  }
}

QuadratureGrid QuadratureGrid::midpoint(std::size_t m) {
  if (m == 0) throw GridError("quantile grid is empty");
  QuadratureGrid g;
  g.levels.resize(m);
  g.weights.assign(m, 1.0 / static_cast<double>(m));
  for (std::size_t k = 0; k < m; ++k) g.levels[k] = (static_cast<double>(k) + 0.5) / static_cast<double>(m);
  return g;
}

QuadratureGrid QuadratureGrid::from_levels(std::vector<double> levels) {
  check_levels(levels);
  QuadratureGrid g;
  g.weights = cell_weights(levels);
  g.levels = std::move(levels);
  return g;
}

double wasserstein2_empirical(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
  if (a.size() == 0 || b.size() == 0) throw EmptyInputError("empty sample");
  if (a.size() != b.size()) {
    throw DimensionError("sample sizes differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double r = a.sorted()[j] - b.sorted()[j];
    s += r * r;
  }
  return std::sqrt(s / static_cast<double>(a.size()));
}

HilbertVector embed_outcome(const ObjectPoint& y, const GridPtr& grid) {
  HilbertVector v;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Euclidean>) {
          v.coords = Eigen::Map<const Eigen::VectorXd>(p.coords.data(), static_cast<Eigen::Index>(p.coords.size()));
        } else if constexpr (std::is_same_v<T, Composition>) {
          v.coords = Eigen::Map<const Eigen::VectorXd>(p.parts().data(), static_cast<Eigen::Index>(p.parts().size()));
        } else if constexpr (std::is_same_v<T, SpdMatrix>) {
          v.coords =
              Eigen::Map<const Eigen::VectorXd>(p.entries().data(), static_cast<Eigen::Index>(p.entries().size()));
        } else {
          if (!grid) throw GridError("distributional outcome needs a quantile grid");
          check_levels(grid->levels);
          const auto m = static_cast<Eigen::Index>(grid->size());
          v.coords.resize(m);
          for (Eigen::Index k = 0; k < m; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            v.coords[k] = p.quantile(grid->levels[ku]) * std::sqrt(grid->weights[ku]);
          }
          v.grid = grid;
        }
      },
      y);
  return v;
}

HilbertVector embed_outcome(const ObjectPoint& y, const QuadratureGrid& grid) {
  return embed_outcome(y, std::make_shared<const QuadratureGrid>(grid));
}

void check_quantile_embedding(const HilbertVector& v) {
  if (!v.coords.allFinite()) throw InvalidObjectError("embedded outcome has a non-finite coordinate");
  if (!v.grid) return;
  const auto f = function_values(v);
  for (std::size_t k = 1; k < f.size(); ++k) {
    if (f[k] < f[k - 1]) throw InvalidObjectError("embedded quantile function decreases at index " + std::to_string(k));
  }
}

double squared_distance(MetricKind space, const ObjectPoint& a, const ObjectPoint& b) {
  check_pair(space, a, b);
  switch (space) {
    case MetricKind::Euclidean: {
      const auto& x = std::get<Euclidean>(a).coords;
      const auto& y = std::get<Euclidean>(b).coords;
      if (x.size() != y.size()) throw DimensionError("vector lengths differ");
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
      return s;
    }
    case MetricKind::Wasserstein: return quantile_l2(a, b, true);
    case MetricKind::Spherical: {
      const double d = sphere_angle(a, b);
      return d * d;
    }
    case MetricKind::Frobenius: {
      const auto& x = std::get<SpdMatrix>(a).entries();
      const auto& y = std::get<SpdMatrix>(b).entries();
      if (x.size() != y.size()) throw DimensionError("matrix sizes differ");
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
      return s;
    }
  }
  return 0.0;
}

double metric_distance(MetricKind space, const ObjectPoint& a, const ObjectPoint& b) {
  if (space == MetricKind::Spherical) {
    check_pair(space, a, b);
    return sphere_angle(a, b);
  }
  return std::sqrt(squared_distance(space, a, b));
}

double native_inner(const ObjectPoint& a, const ObjectPoint& b) {
  if (a.index() != b.index()) {
    throw TypeMismatchError(std::string("cannot pair ") + std::string(variant_name(a)) + " with " +
                            std::string(variant_name(b)));
  }
  if (const auto* x = std::get_if<Euclidean>(&a)) {
    const auto& y = std::get<Euclidean>(b).coords;
    if (x->coords.size() != y.size()) throw DimensionError("vector lengths differ");
    return std::inner_product(y.begin(), y.end(), x->coords.begin(), 0.0);
  }
  if (is_distribution(a)) return quantile_l2(a, b, false);
  if (const auto* s = std::get_if<SpdMatrix>(&a)) {
    const auto& y = std::get<SpdMatrix>(b).entries();
    if (s->entries().size() != y.size()) throw DimensionError("matrix sizes differ");
    return std::inner_product(y.begin(), y.end(), s->entries().begin(), 0.0);
  }
  throw TypeMismatchError("linear kernel has no native inner product on compositions");
}

std::vector<double> function_values(const HilbertVector& v) {
  std::vector<double> f(v.coords.data(), v.coords.data() + v.coords.size());
  if (v.grid) {
    if (v.grid->size() != f.size()) throw DimensionError("grid size does not match coordinates");
    for (std::size_t k = 0; k < f.size(); ++k) f[k] /= std::sqrt(v.grid->weights[k]);
  }
  return f;
}

std::vector<double> isotonic_projection(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size()) throw DimensionError("values and weights differ in length");
  struct Block {
    double mean, weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  blocks.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    blocks.push_back({values[i], weights[i], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
      Block top = blocks.back();
      blocks.pop_back();
      Block& prev = blocks.back();
      const double w = prev.weight + top.weight;
      prev.mean = w > 0.0 ? (prev.mean * prev.weight + top.mean * top.weight) / w : 0.5 * (prev.mean + top.mean);
      prev.weight = w;
      prev.count += top.count;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& b : blocks) out.insert(out.end(), b.count, b.mean);
  return out;
}

}  // namespace roma
