#include "roma/errors.hpp"
#include "roma/estimator.hpp"
#include "roma/gram_algebra.hpp"
#include "roma/inference.hpp"
#include "roma/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace roma {

namespace {

KernelFamily family_for(KernelMode mode, MetricKind metric) {
  return mode == KernelMode::Linear ? KernelFamily::linear(metric) : KernelFamily::gaussian(metric);
}

GramMatrix fixed_gram(KernelMode mode, MetricKind metric, std::span<const ObjectPoint> points) {
  if (mode == KernelMode::Linear) return gram(KernelSpec::linear(metric), points);
  const Eigen::MatrixXd d2 = pairwise_sq_distances(metric, points);
  return gaussian_gram(metric, bandwidth_grid(d2, 1).front(), d2);
}

double relative_eps(const Eigen::MatrixXd& k, double rel) {
  return rel * center(k).trace() / static_cast<double>(k.rows());
}

double gamma_of(const KernelSpec& k) {
  return k.is_gaussian() ? k.bandwidth() : std::numeric_limits<double>::quiet_NaN();
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

MseSummary summarize(const std::vector<double>& v) {
  MseSummary s;
  if (v.empty()) return s;
  const double n = static_cast<double>(v.size());
  for (double e : v) s.mean += e;
  s.mean /= n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double e : v) ss += (e - s.mean) * (e - s.mean);
    s.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return s;
}

}  // namespace

ReplicateResult run_replicate(const CampaignConfig& config, const TrueEffects& truth, std::size_t index) {
  ReplicateResult r;
  try {
    ScenarioSpec spec = config.spec;
    spec.seed = stream_seed(config.spec.seed, index + 1);
    Dataset data = generate(spec);
    Eigen::MatrixXd hv = data.outcome_matrix();

    GramMatrix kx, km;
    double eps = 0.0, eps_tilde = 0.0;
    if (config.tune) {
      Selection sel = select(data.x, data.m, hv, family_for(spec.mode, MetricKind::Euclidean),
                             family_for(spec.mode, MetricKind::Wasserstein), config.tuning);
      kx = std::move(sel.gram_x);
      km = std::move(sel.gram_m);
      eps = sel.eps;
      eps_tilde = sel.eps_tilde;
    } else {
      kx = fixed_gram(spec.mode, MetricKind::Euclidean, data.x);
      km = fixed_gram(spec.mode, MetricKind::Wasserstein, data.m);
      eps = relative_eps(kx.entries, config.fixed_eps);
      eps_tilde = relative_eps(kx.entries + km.entries, config.fixed_eps);
    }
    r.gamma_x = gamma_of(kx.kernel);
    r.gamma_m = gamma_of(km.kernel);
    r.eps = eps;
    r.eps_tilde = eps_tilde;

    const MediationFit fit = MediationFit::from_grams(std::move(data.x), std::move(data.m), std::move(hv), data.grid,
                                                      std::move(kx), std::move(km), eps, eps_tilde);
    const ObjectPoint x = Euclidean{{config.x}};
    const ObjectPoint xs = Euclidean{{config.x_star}};
    const EffectEstimates est = estimate_effects(fit, x, xs);
    r.se_te = (est.te.value.coords - truth.te.coords).squaredNorm();
    r.se_nde = (est.nde.value.coords - truth.nde.coords).squaredNorm();
    r.se_nie = (est.nie.value.coords - truth.nie.coords).squaredNorm();

    if (config.inference.intervals || config.inference.tests) {
      const MediationInference inf(fit);
      if (config.inference.intervals) {
        const auto dirs = inf.default_directions();
        std::size_t hit_nde = 0, hit_nie = 0;
        for (const auto& v : dirs) {
          const Interval a = inf.ci_nde(est, v, config.inference.q);
          const Interval b = inf.ci_nie(est, v, config.inference.q);
          hit_nde += a.contains(truth.nde.coords.dot(v));
          hit_nie += b.contains(truth.nie.coords.dot(v));
          r.variance_warnings += a.variance_warning + b.variance_warning;
        }
        r.cover_nde = static_cast<double>(hit_nde) / static_cast<double>(dirs.size());
        r.cover_nie = static_cast<double>(hit_nie) / static_cast<double>(dirs.size());
      }
      if (config.inference.tests) {
        const TestResult a = inf.test_nde(est, config.inference.truncation);
        const TestResult b = inf.test_nie(est, config.inference.truncation);
        r.p_nde = a.p_value;
        r.p_nie = b.p_value;
        r.fallbacks = (a.method != ChisqMethod::Davies) + (b.method != ChisqMethod::Davies);
      }
    }
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.failure = "replicate " + std::to_string(index) + ": " + e.what();
  }
  return r;
}

ReplicationReport aggregate(const CampaignConfig& config, const TrueEffects& truth,
                            const std::vector<ReplicateResult>& results) {
  ReplicationReport rep;
  const ScenarioSpec& s = config.spec;
  rep.scenario = std::string(to_string(s.id));
  rep.mode = std::string(to_string(s.mode));
  rep.n = s.n;
  rep.m = s.m;
  rep.grid_size = s.grid_size;
  rep.reps = config.reps;
  rep.oracle_size = truth.oracle_size;
  rep.seed = s.seed;
  rep.x = config.x;
  rep.x_star = config.x_star;
  rep.q = config.inference.q;
  rep.direct_scale = s.direct_scale;
  rep.indirect_scale = s.indirect_scale;
  rep.tuned = config.tune;

  std::vector<double> te, nde, nie, cov_nde, cov_nie, eps, eps_t;
  for (const auto& r : results) {
    if (!r.ok) {
      ++rep.failures;
      rep.failure_messages.push_back(r.failure);
      continue;
    }
    ++rep.completed;
    te.push_back(r.se_te);
    nde.push_back(r.se_nde);
    nie.push_back(r.se_nie);
    cov_nde.push_back(r.cover_nde);
    cov_nie.push_back(r.cover_nie);
    eps.push_back(r.eps);
    eps_t.push_back(r.eps_tilde);
    if (config.inference.tests) {
      rep.p_nde.push_back(r.p_nde);
      rep.p_nie.push_back(r.p_nie);
    }
    rep.chisq_fallbacks += static_cast<std::size_t>(r.fallbacks);
    rep.variance_warnings += static_cast<std::size_t>(r.variance_warnings);
  }
  rep.mse_te = summarize(te);
  rep.mse_nde = summarize(nde);
  rep.mse_nie = summarize(nie);
  if (config.inference.intervals) {
    rep.coverage_nde = summarize(cov_nde).mean;
    rep.coverage_nie = summarize(cov_nie).mean;
  }
  auto rejection = [&](const std::vector<double>& p) {
    if (p.empty()) return 0.0;
    const auto k = std::count_if(p.begin(), p.end(), [&](double v) { return v < config.inference.q; });
    return static_cast<double>(k) / static_cast<double>(p.size());
  };
  rep.rejection_nde = rejection(rep.p_nde);
  rep.rejection_nie = rejection(rep.p_nie);
  rep.true_te = function_values(truth.te);
  rep.true_nde = function_values(truth.nde);
  rep.true_nie = function_values(truth.nie);
  rep.true_mc_se = std::max({truth.te_se.maxCoeff(), truth.nde_se.maxCoeff(), truth.nie_se.maxCoeff()});
  rep.median_eps = median(eps);
  rep.median_eps_tilde = median(eps_t);
  return rep;
}

ReplicationReport run_campaign(const CampaignConfig& config) {
  return run_campaign(config, true_effects(config.spec, config.x, config.x_star, config.oracle_size));
}

ReplicationReport run_campaign(const CampaignConfig& config, const TrueEffects& truth) {
  config.spec.validate();
  if (config.reps == 0) throw ConfigError("campaign needs at least one replicate");
  std::vector<ReplicateResult> results(config.reps);
  const auto reps = static_cast<std::ptrdiff_t>(config.reps);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < reps; ++i) {
    results[static_cast<std::size_t>(i)] = run_replicate(config, truth, static_cast<std::size_t>(i));
  }
  return aggregate(config, truth, results);
}

namespace serial {

ReplicationReport run_campaign(const CampaignConfig& config, const TrueEffects& truth) {
  config.spec.validate();
  if (config.reps == 0) throw ConfigError("campaign needs at least one replicate");
  std::vector<ReplicateResult> results;
  results.reserve(config.reps);
  for (std::size_t i = 0; i < config.reps; ++i) results.push_back(run_replicate(config, truth, i));
  return aggregate(config, truth, results);
}

}  // namespace serial

}  // namespace roma
