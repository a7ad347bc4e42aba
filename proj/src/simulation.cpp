#include "roma/simulation.hpp"

#include "roma/errors.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace roma {

namespace {

constexpr std::array<std::string_view, 12> kScenarioNames = {"I.1",  "I.2",  "I.3",  "I.4",  "II.1", "II.2",
                                                             "II.3", "II.4", "II.5", "II.6", "II.7", "II.8"};

bool scenario_one(Scenario s) { return static_cast<int>(s) <= static_cast<int>(Scenario::I4); }

// Midpoint-rule moments of the standard normal quantile function.
struct NormalRule {
  double mean_z = 0.0;
  double mean_z2 = 0.0;

  explicit NormalRule(std::size_t g) {
    const boost::math::normal nd;
    for (std::size_t k = 0; k < g; ++k) {
      const double z = boost::math::quantile(nd, (static_cast<double>(k) + 0.5) / static_cast<double>(g));
      mean_z += z;
      mean_z2 += z * z;
    }
    mean_z /= static_cast<double>(g);
    mean_z2 /= static_cast<double>(g);
  }

  double pairing(double mu, double sigma, double a, double b) const {
    return mu * a + (mu * b + sigma * a) * mean_z + sigma * b * mean_z2;
  }
};

// Unit-level randomness that does not depend on the exposure.
struct Primitives {
  double x = 0.0;
  double location_noise = 0.0;  // U, Laplace(0,1) or N(0, 0.2^2) depending on the setting
  double sigma_m = 0.5;
  double outcome_noise = 0.0;  // standard normal
  double ig = 1.0;
  std::vector<double> m_z;  // standard normals for the mediator sample
  std::vector<double> y_z;  // standard normals for the outcome sample, sorted
};

double laplace(std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::bernoulli_distribution sign(0.5);
  const double v = e(rng);
  return sign(rng) ? v : -v;
}

double inverse_gamma(std::mt19937_64& rng, double shape, double scale) {
  std::gamma_distribution<double> g(shape, 1.0 / scale);
  return 1.0 / g(rng);
}

Primitives draw(const ScenarioSpec& spec, std::mt19937_64& rng, bool with_mediator_sample) {
  std::normal_distribution<double> z(0.0, 1.0);
  Primitives p;
  p.x = z(rng);
  if (scenario_one(spec.id)) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    p.location_noise = u(rng);
    p.sigma_m = 0.5;
  } else {
    p.location_noise = (spec.id == Scenario::II4 || spec.id == Scenario::II8) ? 0.2 * z(rng) : laplace(rng);
    p.sigma_m = 0.5 * inverse_gamma(rng, 4.0, 3.0);
  }
  p.outcome_noise = z(rng);
  if (spec.id == Scenario::I3) p.ig = inverse_gamma(rng, 16.0, 15.0);
  if (with_mediator_sample) {
    p.m_z.resize(spec.m);
    for (double& v : p.m_z) v = z(rng);
  }
  if (distributional_outcome(spec.id)) {
    p.y_z.resize(spec.m);
    for (double& v : p.y_z) v = z(rng);
    std::sort(p.y_z.begin(), p.y_z.end());
  }
  return p;
}

struct Law {
  double mu, sigma;
};

Law mediator_law(Scenario s, double x, const Primitives& p) {
  switch (s) {
    case Scenario::I1:
    case Scenario::I2:
    case Scenario::I3: return {scenario_one_g(x) + p.location_noise, p.sigma_m};
    case Scenario::I4: return {p.location_noise, p.sigma_m};
    case Scenario::II1: return {2.0 * x + p.location_noise, p.sigma_m};
    case Scenario::II2:
    case Scenario::II3: return {x + p.location_noise, p.sigma_m};
    case Scenario::II4:
    case Scenario::II8: return {p.location_noise, p.sigma_m};
    case Scenario::II5:
    case Scenario::II7: return {scenario_two_h(x) + p.location_noise, p.sigma_m};
    case Scenario::II6: return {scenario_one_g(x) + p.location_noise, p.sigma_m};
  }
  return {0.0, 0.0};
}

// Outcome law (Scenario I) or scalar outcome (Scenario II, sigma = 0).
Law outcome_law(const ScenarioSpec& spec, const NormalRule& rule, double x, Law med, const Primitives& p) {
  const double sd = spec.direct_scale;
  const double si = spec.indirect_scale;
  auto pair = [&](double a, double b) { return rule.pairing(med.mu, med.sigma, a, b); };
  const double e = p.outcome_noise;
  // Direct term interpolates between the constant h(0) = 1 and h(x).
  const double h1 = 1.0 + sd * (scenario_one_h(x) - 1.0);
  switch (spec.id) {
    case Scenario::I1: return {h1 + 0.1 * e, h1 + si * pair(0.7, 0.5)};
    case Scenario::I2: return {-si * pair(0.25, 1.0) + 0.1 * e, si * pair(0.25, 1.0)};
    case Scenario::I3: return {h1 + 0.1 * e, h1 * p.ig};
    case Scenario::I4: return {si * pair(0.7, 0.5) + 0.1 * e, h1};
    case Scenario::II1: return {-2.0 * sd * x + si * pair(0.7, 0.5) + 1.0 + 0.1 * e, 0.0};
    case Scenario::II2: return {si * pair(1.0, 1.0) + 0.5 * e, 0.0};
    case Scenario::II3: return {-sd * x + 0.5 * e, 0.0};
    case Scenario::II4: return {-2.0 * sd * x + si * pair(0.7, 0.5) + 1.0 + 0.5 * e, 0.0};
    case Scenario::II5: return {sd * scenario_two_g(x) + si * pair(0.7, 0.5) + 0.1 * e, 0.0};
    case Scenario::II6: return {si * pair(1.0, 1.0) + e, 0.0};
    case Scenario::II7: return {sd * scenario_two_g(x) + 0.5 * e, 0.0};
    case Scenario::II8: return {sd * scenario_two_g(x) + si * pair(0.7, 0.5) + 0.5 * e, 0.0};
  }
  return {0.0, 0.0};
}

// Embedded observed outcome: the empirical quantile function of the outcome
// sample on the grid, or the scalar itself.
void embed_into(const ScenarioSpec& spec, const QuadratureGrid& grid, Law y, const Primitives& p,
                Eigen::Ref<Eigen::VectorXd> out) {
  if (!distributional_outcome(spec.id)) {
    out[0] = y.mu;
    return;
  }
  const std::size_t m = p.y_z.size();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    auto j = static_cast<std::ptrdiff_t>(std::ceil(static_cast<double>(m) * grid.levels[k]));
    j = std::clamp<std::ptrdiff_t>(j, 1, static_cast<std::ptrdiff_t>(m)) - 1;
    const auto ju = static_cast<std::size_t>(j);
    const double z = y.sigma >= 0.0 ? p.y_z[ju] : p.y_z[m - 1 - ju];
    out[static_cast<Eigen::Index>(k)] = (y.mu + y.sigma * z) * std::sqrt(grid.weights[k]);
  }
}

}  // namespace

std::string_view to_string(Scenario s) { return kScenarioNames[static_cast<std::size_t>(s)]; }

Scenario scenario_from_string(std::string_view id) {
  for (std::size_t i = 0; i < kScenarioNames.size(); ++i)
    if (kScenarioNames[i] == id) return static_cast<Scenario>(i);
  throw ConfigError("unknown scenario '" + std::string(id) + "'");
}

std::string_view to_string(KernelMode mode) { return mode == KernelMode::Linear ? "linear" : "nonlinear"; }

KernelMode kernel_mode_from_string(std::string_view name) {
  if (name == "linear") return KernelMode::Linear;
  if (name == "nonlinear") return KernelMode::Nonlinear;
  throw ConfigError("unknown kernel mode '" + std::string(name) + "'");
}

bool distributional_outcome(Scenario s) { return scenario_one(s); }

void ScenarioSpec::validate() const {
  if (static_cast<int>(id) < 0 || static_cast<int>(id) > static_cast<int>(Scenario::II8)) {
    throw ConfigError("invalid scenario");
  }
  if (n < 10) throw ConfigError("scenario sample size must be at least 10");
  if (m < 10) throw ConfigError("per-distribution sample size must be at least 10");
  if (grid_size < 1) throw ConfigError("quantile grid must have at least one level");
  if (!std::isfinite(direct_scale) || !std::isfinite(indirect_scale)) throw ConfigError("effect scales must be finite");
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double scenario_one_g(double x) { return std::numbers::e / (1.0 + std::exp(-x * x)); }

double scenario_one_h(double x) { return -std::exp(-x * x) + 2.0; }

double scenario_two_g(double x) { return 2.0 * std::sin(std::numbers::pi * x) + std::exp(-x * x); }

double scenario_two_h(double x) { return 0.5 * std::sin(x) + std::exp(-x * x) + scenario_one_g(x); }

double normal_pairing(double mu, double sigma, double a, double b, std::size_t grid_size) {
  if (grid_size == 0) throw GridError("quantile grid is empty");
  return NormalRule(grid_size).pairing(mu, sigma, a, b);
}

Eigen::MatrixXd Dataset::outcome_matrix() const {
  if (v.empty()) throw EmptyInputError("dataset has no outcomes");
  Eigen::MatrixXd h(static_cast<Eigen::Index>(v.size()), v.front().coords.size());
  for (std::size_t i = 0; i < v.size(); ++i) h.row(static_cast<Eigen::Index>(i)) = v[i].coords.transpose();
  return h;
}

Dataset generate(const ScenarioSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(stream_seed(spec.seed, 0));
  const NormalRule rule(spec.grid_size);
  Dataset data;
  data.grid = std::make_shared<const QuadratureGrid>(QuadratureGrid::midpoint(spec.grid_size));
  const bool dist_y = distributional_outcome(spec.id);
  const Eigen::Index d = dist_y ? static_cast<Eigen::Index>(spec.grid_size) : 1;
  data.x.reserve(spec.n);
  data.m.reserve(spec.n);
  data.y.reserve(spec.n);
  data.v.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    Primitives p = draw(spec, rng, true);
    const Law med = mediator_law(spec.id, p.x, p);
    const Law y = outcome_law(spec, rule, p.x, med, p);
    std::vector<double> ms(spec.m);
    for (std::size_t j = 0; j < spec.m; ++j) ms[j] = med.mu + med.sigma * p.m_z[j];
    data.x.emplace_back(Euclidean{{p.x}});
    data.m.emplace_back(EmpiricalDistribution::from_samples(std::move(ms)));
    HilbertVector v;
    v.coords.resize(d);
    embed_into(spec, *data.grid, y, p, v.coords);
    if (dist_y) {
      std::vector<double> ys(spec.m);
      for (std::size_t j = 0; j < spec.m; ++j) ys[j] = y.mu + y.sigma * p.y_z[j];
      data.y.emplace_back(EmpiricalDistribution::from_samples(std::move(ys)));
      v.grid = data.grid;
    } else {
      data.y.emplace_back(Euclidean{{y.mu}});
    }
    data.v.push_back(std::move(v));
  }
  return data;
}

TrueEffects true_effects(const ScenarioSpec& spec, double x, double x_star, std::size_t oracle_size) {
  spec.validate();
  if (oracle_size < 2) throw ConfigError("oracle size must be at least 2");
  std::mt19937_64 rng(stream_seed(0x0DDBA11ULL, static_cast<std::uint64_t>(spec.id)));
  const NormalRule rule(spec.grid_size);
  const auto grid = std::make_shared<const QuadratureGrid>(QuadratureGrid::midpoint(spec.grid_size));
  const Eigen::Index d = distributional_outcome(spec.id) ? static_cast<Eigen::Index>(spec.grid_size) : 1;

  // Welford accumulators for the three differences.
  Eigen::VectorXd mean[3], m2[3];
  for (int k = 0; k < 3; ++k) {
    mean[k] = Eigen::VectorXd::Zero(d);
    m2[k] = Eigen::VectorXd::Zero(d);
  }
  Eigen::VectorXd v_xx(d), v_xs(d), v_ss(d);
  for (std::size_t r = 0; r < oracle_size; ++r) {
    const Primitives p = draw(spec, rng, false);
    const Law med_x = mediator_law(spec.id, x, p);
    const Law med_s = mediator_law(spec.id, x_star, p);
    embed_into(spec, *grid, outcome_law(spec, rule, x, med_x, p), p, v_xx);
    embed_into(spec, *grid, outcome_law(spec, rule, x, med_s, p), p, v_xs);
    embed_into(spec, *grid, outcome_law(spec, rule, x_star, med_s, p), p, v_ss);
    const Eigen::VectorXd diff[3] = {v_xs - v_ss, v_xx - v_xs, v_xx - v_ss};
    const double cnt = static_cast<double>(r + 1);
    for (int k = 0; k < 3; ++k) {
      const Eigen::VectorXd delta = diff[k] - mean[k];
      mean[k] += delta / cnt;
      m2[k] += delta.cwiseProduct(diff[k] - mean[k]);
    }
  }
  const double nn = static_cast<double>(oracle_size);
  auto se = [&](int k) -> Eigen::VectorXd { return (m2[k] / (nn - 1.0) / nn).cwiseSqrt(); };
  TrueEffects t;
  t.nde = HilbertVector{mean[0], distributional_outcome(spec.id) ? grid : nullptr};
  t.nie = HilbertVector{mean[1], t.nde.grid};
  t.te = HilbertVector{mean[2], t.nde.grid};
  t.nde_se = se(0);
  t.nie_se = se(1);
  t.te_se = se(2);
  t.oracle_size = oracle_size;
  return t;
}

}  // namespace roma
