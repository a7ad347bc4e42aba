#pragma once

#include "roma/object_spaces.hpp"
#include "roma/tuning.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace roma {

enum class Scenario { I1, I2, I3, I4, II1, II2, II3, II4, II5, II6, II7, II8 };
enum class KernelMode { Linear, Nonlinear };

std::string_view to_string(Scenario s);
Scenario scenario_from_string(std::string_view id);
std::string_view to_string(KernelMode mode);
KernelMode kernel_mode_from_string(std::string_view name);
bool distributional_outcome(Scenario s);

struct ScenarioSpec {
  Scenario id = Scenario::I1;
  std::size_t n = 100;
  std::size_t m = 100;          // draws per observed distribution
  std::size_t grid_size = 100;  // midpoint quantile levels for embeddings and pairings
  std::uint64_t seed = 1;
  KernelMode mode = KernelMode::Nonlinear;
  // Multipliers on the exposure-driven and mediator-driven outcome terms.
  double direct_scale = 1.0;
  double indirect_scale = 1.0;

  void validate() const;
};

// Counter-based stream splitting: independent generator seeds per index.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

struct Dataset {
  std::vector<ObjectPoint> x, m, y;
  std::vector<HilbertVector> v;  // embedded outcomes
  GridPtr grid;

  Eigen::MatrixXd outcome_matrix() const;
};

Dataset generate(const ScenarioSpec& spec);

// L2[0,1] pairing of the quantile functions of N(mu, sigma^2) and N(a, b^2)
// on the midpoint rule with `grid_size` levels.
double normal_pairing(double mu, double sigma, double a, double b, std::size_t grid_size);

// Setting-specific functions of the exposure.
double scenario_one_g(double x);
double scenario_one_h(double x);
double scenario_two_g(double x);
double scenario_two_h(double x);

struct TrueEffects {
  HilbertVector nde, nie, te;
  Eigen::VectorXd nde_se, nie_se, te_se;  // Monte Carlo standard errors per coordinate
  std::size_t oracle_size;
};

TrueEffects true_effects(const ScenarioSpec& spec, double x, double x_star, std::size_t oracle_size = 100000);

struct InferenceConfig {
  double q = 0.05;
  std::optional<Eigen::Index> truncation;
  bool intervals = true;
  bool tests = true;
};

struct CampaignConfig {
  ScenarioSpec spec;
  std::size_t reps = 100;
  double x = 1.0;
  double x_star = 0.0;
  InferenceConfig inference;
  bool tune = true;  // false: fixed hyperparameters
  TuningOptions tuning;
  double fixed_eps = 1e-3;  // relative to trace(G)/n when not tuning
  std::size_t oracle_size = 100000;
};

struct MseSummary {
  double mean = 0.0;
  double se = 0.0;

  bool operator==(const MseSummary&) const = default;
};

struct ReplicateResult {
  bool ok = false;
  std::string failure;
  double se_te = 0.0, se_nde = 0.0, se_nie = 0.0;
  double cover_nde = 0.0, cover_nie = 0.0;  // fraction of grid points covered
  double p_nde = 1.0, p_nie = 1.0;
  double eps = 0.0, eps_tilde = 0.0;
  double gamma_x = 0.0, gamma_m = 0.0;
  int fallbacks = 0;
  int variance_warnings = 0;
};

struct ReplicationReport {
  std::string scenario;
  std::string mode;
  std::size_t n = 0, m = 0, grid_size = 0, reps = 0, oracle_size = 0;
  std::uint64_t seed = 0;
  double x = 0.0, x_star = 0.0, q = 0.0;
  double direct_scale = 1.0, indirect_scale = 1.0;
  bool tuned = true;
  std::size_t completed = 0, failures = 0;
  std::vector<std::string> failure_messages;
  MseSummary mse_te, mse_nde, mse_nie;
  double coverage_nde = 0.0, coverage_nie = 0.0;
  double rejection_nde = 0.0, rejection_nie = 0.0;
  std::vector<double> p_nde, p_nie;
  std::vector<double> true_te, true_nde, true_nie;  // function values on the grid
  double true_mc_se = 0.0;                          // largest coordinate standard error
  double median_eps = 0.0, median_eps_tilde = 0.0;
  std::size_t chisq_fallbacks = 0, variance_warnings = 0;
  std::optional<double> runtime_seconds;

  bool operator==(const ReplicationReport&) const = default;
};

ReplicateResult run_replicate(const CampaignConfig& config, const TrueEffects& truth, std::size_t index);
ReplicationReport aggregate(const CampaignConfig& config, const TrueEffects& truth,
                            const std::vector<ReplicateResult>& results);

// Replicates run across OpenMP threads; results are aggregated in index order.
ReplicationReport run_campaign(const CampaignConfig& config);
ReplicationReport run_campaign(const CampaignConfig& config, const TrueEffects& truth);

namespace serial {
ReplicationReport run_campaign(const CampaignConfig& config, const TrueEffects& truth);
}  // namespace serial

}  // namespace roma
