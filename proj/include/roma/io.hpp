#pragma once

#include "roma/estimator.hpp"
#include "roma/inference.hpp"
#include "roma/kernels.hpp"
#include "roma/object_spaces.hpp"
#include "roma/simulation.hpp"
#include "roma/tuning.hpp"

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace roma::io {

using Json = nlohmann::json;

inline constexpr std::string_view kConfigSchema = "roma.config/1";
inline constexpr std::string_view kFitSchema = "roma.fit/1";
inline constexpr std::string_view kEffectsSchema = "roma.effects/1";
inline constexpr std::string_view kReportSchema = "roma.report/1";

// Shortest decimal that parses back to the same double.
std::string format_double(double v);

// ---- dataset ingestion ----

enum class ColumnType { Euclidean, DistributionSamples, DistributionQuantiles, Composition, Spd };

std::string_view to_string(ColumnType t);
ColumnType column_type_from_string(std::string_view name);

// One object-valued variable spread over `arity()` consecutive CSV fields.
struct ColumnDecl {
  ColumnType type = ColumnType::Euclidean;
  std::size_t width = 1;       // k, m or p
  std::vector<double> levels;  // quantile levels; empty means midpoints

  std::size_t arity() const { return type == ColumnType::Spd ? width * width : width; }
  MetricKind natural_metric() const;
  ObjectPoint parse(std::span<const double> fields) const;
  bool operator==(const ColumnDecl&) const = default;
};

struct DatasetSchema {
  ColumnDecl exposure, mediator, outcome;
  bool operator==(const DatasetSchema&) const = default;
};

struct DatasetTable {
  std::vector<ObjectPoint> x, m, y;
};

// Rows hold exposure, mediator and outcome fields in that order. A leading
// line with any non-numeric field is treated as a header. Errors name the
// 1-based line and field.
DatasetTable read_dataset(std::istream& in, const DatasetSchema& schema);
DatasetTable read_dataset_file(const std::string& path, const DatasetSchema& schema);

// ---- configuration ----

struct RunConfig {
  DatasetSchema data;
  KernelFamily kernel_x = KernelFamily::gaussian(MetricKind::Euclidean);
  KernelFamily kernel_m = KernelFamily::gaussian(MetricKind::Wasserstein);
  std::optional<double> eps, eps_tilde;  // absolute overrides; skip tuning of that stage
  TuningOptions tuning;
  std::vector<double> x{1.0}, x_star{0.0};  // contrast fields, parsed with the exposure column type
  double q = 0.05;
  std::optional<Eigen::Index> truncation;
  std::vector<std::vector<double>> directions;  // empty means "grid"
  std::uint64_t seed = 1;
  std::size_t grid_size = 100;  // quadrature levels for distributional outcomes

  void validate() const;
};

Json kernel_to_json(const KernelSpec& k);
KernelSpec kernel_from_json(const Json& j);
Json family_to_json(const KernelFamily& f);
KernelFamily family_from_json(const Json& j);
Json object_to_json(const ObjectPoint& p);
ObjectPoint object_from_json(const Json& j);

Json config_to_json(const RunConfig& c);
RunConfig config_from_json(const Json& j);
RunConfig read_config_file(const std::string& path);

struct FittedModel {
  MediationFit fit;
  Selection selection;
};

// Embeds the outcomes, tunes the kernels and regularizations, and fits.
// Fixed eps or eps~ in the config replace that stage's search grid.
FittedModel fit_dataset(const RunConfig& config, DatasetTable data);

// ---- fit summaries ----

struct GcvRecord {
  double eps = 0.0;
  std::optional<double> gamma_x, gamma_m;
  double score = 0.0;
  bool operator==(const GcvRecord&) const = default;
};

struct FitSummary {
  std::size_t n = 0, dim = 0;
  Json kernel_x, kernel_m;
  double eps = 0.0, eps_tilde = 0.0;
  double df_x = 0.0, df_z = 0.0;  // tr(G (G + eps I)^{-1}) in each system
  bool tuned = false;
  std::vector<GcvRecord> phi_trace, outcome_trace;
  std::size_t phi_rejected = 0, outcome_rejected = 0;
  std::uint64_t seed = 0;
  bool operator==(const FitSummary&) const = default;
};

FitSummary summarize_fit(const MediationFit& fit, const std::optional<Selection>& selection, std::uint64_t seed);
Json fit_to_json(const FitSummary& s);
FitSummary fit_from_json(const Json& j);

// ---- effects ----

struct IntervalRecord {
  double center = 0.0, lower = 0.0, upper = 0.0;
  bool variance_warning = false;
  bool operator==(const IntervalRecord&) const = default;
};

struct TestRecord {
  double statistic = 0.0, p_value = 1.0;
  std::string method;
  int davies_fault = 0;
  std::vector<double> spectrum;
  bool operator==(const TestRecord&) const = default;
};

struct EffectRecord {
  std::string effect;
  Json x, x_star;
  std::vector<double> coords;
  std::vector<double> values;  // function values on the grid, or the coordinates
  std::vector<double> levels;
  // Average outcome quantile curve shifted by the effect, projected to be
  // nondecreasing. Distributional outcomes only.
  std::vector<double> adjusted_quantiles;
  double theta_z = 0.0, theta_x = 0.0;
  std::vector<IntervalRecord> intervals;
  std::optional<TestRecord> test;
  bool operator==(const EffectRecord&) const = default;
};

struct EffectsReport {
  std::size_t n = 0, dim = 0;
  double q = 0.05, eps = 0.0, eps_tilde = 0.0;
  std::vector<EffectRecord> effects;
  bool operator==(const EffectsReport&) const = default;
};

EffectsReport report_effects(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& x_star,
                             const InferenceOptions& options, bool run_inference = true);
void write_effects(std::ostream& out, const EffectsReport& r);
EffectsReport read_effects(std::istream& in);
void write_effects_csv(std::ostream& out, const EffectsReport& r);

// ---- replication reports ----

Json report_to_json(const ReplicationReport& r);
ReplicationReport report_from_json(const Json& j);
void write_report(std::ostream& out, const ReplicationReport& r);
ReplicationReport read_report(std::istream& in);
void write_report_csv(std::ostream& out, const ReplicationReport& r);

// Checks the schema tag of a parsed record.
void expect_schema(const Json& j, std::string_view schema);

}  // namespace roma::io
