#include "roma/io.hpp"

#include "roma/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

namespace roma::io {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> parse_number(const std::string& tok) {
  if (tok.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

// Config access with schema errors as ConfigError.
template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

template <class T>
T get_required(const Json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

void reject_unknown(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == key;
    if (!ok) throw ConfigError("unknown field '" + key + "' in " + std::string(where));
  }
}

Json optional_number(std::optional<double> v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> read_optional(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

// Doubles that may be NaN travel as null.
Json nan_number(double v) { return std::isnan(v) ? Json(nullptr) : Json(v); }

double read_nan_number(const Json& j, const char* key) {
  const auto v = read_optional(j, key);
  return v ? *v : std::numeric_limits<double>::quiet_NaN();
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Json column_to_json(const ColumnDecl& c) {
  Json j{{"type", to_string(c.type)}, {"width", c.width}};
  if (!c.levels.empty()) j["levels"] = c.levels;
  return j;
}

ColumnDecl column_from_json(const Json& j, std::string_view where) {
  reject_unknown(j, {"type", "width", "levels"}, where);
  ColumnDecl c;
  c.type = column_type_from_string(get_required<std::string>(j, "type"));
  c.width = get_or<std::size_t>(j, "width", 1);
  c.levels = get_or<std::vector<double>>(j, "levels", {});
  if (c.width == 0) throw ConfigError(std::string(where) + ": width must be positive");
  if (!c.levels.empty() && c.levels.size() != c.width) {
    throw ConfigError(std::string(where) + ": levels must have one entry per field");
  }
  return c;
}

Json eps_grid_to_json(const EpsGrid& g) { return Json{{"values", g.values}, {"relative", g.relative}}; }

EpsGrid eps_grid_from_json(const Json& j, std::string_view where) {
  reject_unknown(j, {"values", "relative", "size", "lo", "hi"}, where);
  if (j.contains("values")) {
    EpsGrid g{get_required<std::vector<double>>(j, "values"), get_or<bool>(j, "relative", true)};
    if (g.values.empty()) throw ConfigError(std::string(where) + ": empty grid");
    return g;
  }
  return EpsGrid::log_relative(get_or<std::size_t>(j, "size", 20), get_or<double>(j, "lo", 1e-6),
                               get_or<double>(j, "hi", 1.0));
}

Json gcv_to_json(const GcvRecord& r) {
  return Json{{"eps", r.eps}, {"gamma_x", optional_number(r.gamma_x)}, {"gamma_m", optional_number(r.gamma_m)},
              {"score", r.score}};
}

GcvRecord gcv_from_json(const Json& j) {
  return GcvRecord{j.at("eps").get<double>(), read_optional(j, "gamma_x"), read_optional(j, "gamma_m"),
                   j.at("score").get<double>()};
}

std::vector<GcvRecord> trace_records(const GcvTrace& t) {
  std::vector<GcvRecord> out;
  for (const auto& c : t.candidates) {
    auto opt = [](double g) { return std::isnan(g) ? std::nullopt : std::optional<double>(g); };
    out.push_back({c.eps, opt(c.gamma_x), opt(c.gamma_m), c.score});
  }
  return out;
}

Json effect_to_json(const EffectRecord& e) {
  Json j{{"schema", kEffectsSchema},
         {"record", "effect"},
         {"effect", e.effect},
         {"x", e.x},
         {"x_star", e.x_star},
         {"coords", e.coords},
         {"values", e.values},
         {"levels", e.levels},
         {"adjusted_quantiles", e.adjusted_quantiles},
         {"theta_z", e.theta_z},
         {"theta_x", e.theta_x}};
  Json iv = Json::array();
  for (const auto& i : e.intervals) {
    iv.push_back({{"center", i.center}, {"lower", i.lower}, {"upper", i.upper}, {"variance_warning", i.variance_warning}});
  }
  j["intervals"] = iv;
  if (e.test) {
    j["test"] = {{"statistic", e.test->statistic},
                 {"p_value", e.test->p_value},
                 {"method", e.test->method},
                 {"davies_fault", e.test->davies_fault},
                 {"spectrum", e.test->spectrum}};
  } else {
    j["test"] = nullptr;
  }
  return j;
}

EffectRecord effect_from_json(const Json& j) {
  EffectRecord e;
  e.effect = j.at("effect").get<std::string>();
  e.x = j.at("x");
  e.x_star = j.at("x_star");
  e.coords = j.at("coords").get<std::vector<double>>();
  e.values = j.at("values").get<std::vector<double>>();
  e.levels = j.at("levels").get<std::vector<double>>();
  e.adjusted_quantiles = j.at("adjusted_quantiles").get<std::vector<double>>();
  e.theta_z = j.at("theta_z").get<double>();
  e.theta_x = j.at("theta_x").get<double>();
  for (const auto& i : j.at("intervals")) {
    e.intervals.push_back({i.at("center").get<double>(), i.at("lower").get<double>(), i.at("upper").get<double>(),
                           i.at("variance_warning").get<bool>()});
  }
  if (!j.at("test").is_null()) {
    const Json& t = j.at("test");
    e.test = TestRecord{t.at("statistic").get<double>(), t.at("p_value").get<double>(),
                        t.at("method").get<std::string>(), t.at("davies_fault").get<int>(),
                        t.at("spectrum").get<std::vector<double>>()};
  }
  return e;
}

std::vector<double> object_fields(const ObjectPoint& p) {
  return std::visit(
      [](const auto& o) -> std::vector<double> {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, Euclidean>) return o.coords;
        else if constexpr (std::is_same_v<T, EmpiricalDistribution>) return o.sorted();
        else if constexpr (std::is_same_v<T, QuantileGrid>) return o.values();
        else if constexpr (std::is_same_v<T, Composition>) return o.parts();
        else return o.entries();
      },
      p);
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void expect_schema(const Json& j, std::string_view schema) {
  if (!j.is_object() || !j.contains("schema")) throw ConfigError("record has no schema tag");
  const auto& tag = j.at("schema");
  if (!tag.is_string() || tag.get<std::string>() != schema) {
    throw ConfigError("expected schema '" + std::string(schema) + "', found " + tag.dump());
  }
}

// ---- dataset ----

std::string_view to_string(ColumnType t) {
  switch (t) {
    case ColumnType::Euclidean: return "euclidean";
    case ColumnType::DistributionSamples: return "distribution_samples";
    case ColumnType::DistributionQuantiles: return "distribution_quantiles";
    case ColumnType::Composition: return "composition";
    case ColumnType::Spd: return "spd";
  }
  return "unknown";
}

ColumnType column_type_from_string(std::string_view name) {
  for (auto t : {ColumnType::Euclidean, ColumnType::DistributionSamples, ColumnType::DistributionQuantiles,
                 ColumnType::Composition, ColumnType::Spd}) {
    if (to_string(t) == name) return t;
  }
  throw ConfigError("unknown column type '" + std::string(name) + "'");
}

MetricKind ColumnDecl::natural_metric() const {
  switch (type) {
    case ColumnType::Euclidean: return MetricKind::Euclidean;
    case ColumnType::DistributionSamples:
    case ColumnType::DistributionQuantiles: return MetricKind::Wasserstein;
    case ColumnType::Composition: return MetricKind::Spherical;
    case ColumnType::Spd: return MetricKind::Frobenius;
  }
  return MetricKind::Euclidean;
}

ObjectPoint ColumnDecl::parse(std::span<const double> fields) const {
  if (fields.size() != arity()) {
    throw DataError("expected " + std::to_string(arity()) + " fields, found " + std::to_string(fields.size()));
  }
  std::vector<double> v(fields.begin(), fields.end());
  switch (type) {
    case ColumnType::Euclidean: return Euclidean{std::move(v)};
    case ColumnType::DistributionSamples: return EmpiricalDistribution::from_samples(std::move(v));
    case ColumnType::DistributionQuantiles: {
      std::vector<double> lv = levels.empty() ? QuadratureGrid::midpoint(width).levels : levels;
      for (std::size_t k = 1; k < v.size(); ++k) {
        if (v[k] < v[k - 1]) throw InvalidObjectError("quantile values decrease at field " + std::to_string(k + 1));
      }
      return QuantileGrid::make(std::move(lv), std::move(v));
    }
    case ColumnType::Composition: return Composition::make(std::move(v));
    case ColumnType::Spd: return SpdMatrix::make(width, std::move(v));
  }
  throw ConfigError("unknown column type");
}

DatasetTable read_dataset(std::istream& in, const DatasetSchema& schema) {
  const ColumnDecl* decls[3] = {&schema.exposure, &schema.mediator, &schema.outcome};
  const char* names[3] = {"exposure", "mediator", "outcome"};
  const std::size_t total = schema.exposure.arity() + schema.mediator.arity() + schema.outcome.arity();
  DatasetTable t;
  std::string line;
  std::size_t line_no = 0, row = 0;
  bool first = true;
  std::vector<double> fields;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto toks = split_csv(line);
    fields.clear();
    std::optional<std::size_t> bad;
    for (std::size_t f = 0; f < toks.size(); ++f) {
      const auto v = parse_number(toks[f]);
      if (!v) {
        if (!bad) bad = f;
        fields.push_back(0.0);
      } else {
        fields.push_back(*v);
      }
    }
    if (first && bad) {
      first = false;
      continue;
    }
    first = false;
    ++row;
    const std::string where = "row " + std::to_string(row) + " (line " + std::to_string(line_no) + ")";
    if (toks.size() != total) {
      throw DataError(where + ": expected " + std::to_string(total) + " fields, found " + std::to_string(toks.size()));
    }
    if (bad) throw DataError(where + ", column " + std::to_string(*bad + 1) + ": '" + toks[*bad] + "' is not a number");
    for (double v : fields) {
      if (!std::isfinite(v)) throw DataError(where + ": non-finite value");
    }
    std::size_t offset = 0;
    std::vector<ObjectPoint>* outs[3] = {&t.x, &t.m, &t.y};
    for (int c = 0; c < 3; ++c) {
      const std::size_t a = decls[c]->arity();
      try {
        outs[c]->push_back(decls[c]->parse(std::span<const double>(fields).subspan(offset, a)));
      } catch (Error& e) {
        e.add_context(where + ", " + names[c] + " columns " + std::to_string(offset + 1) + "-" +
                      std::to_string(offset + a));
        throw;
      }
      offset += a;
    }
  }
  if (row == 0) throw EmptyInputError("dataset has no rows");
  return t;
}

DatasetTable read_dataset_file(const std::string& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  return read_dataset(in, schema);
}

// ---- configuration ----

void RunConfig::validate() const {
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("q must lie in (0, 1)");
  if (truncation && *truncation < 1) throw ConfigError("truncation must be at least 1");
  if (eps && !(*eps > 0.0)) throw ConfigError("eps must be positive");
  if (eps_tilde && !(*eps_tilde > 0.0)) throw ConfigError("eps_tilde must be positive");
  if (grid_size == 0) throw ConfigError("grid_size must be positive");
  if (x.size() != data.exposure.arity() || x_star.size() != data.exposure.arity()) {
    throw ConfigError("contrast points must have " + std::to_string(data.exposure.arity()) + " fields");
  }
}

Json object_to_json(const ObjectPoint& p) {
  Json j{{"type", variant_name(p)}, {"values", object_fields(p)}};
  if (const auto* g = std::get_if<QuantileGrid>(&p)) j["levels"] = g->levels();
  if (const auto* s = std::get_if<SpdMatrix>(&p)) j["dim"] = s->dim();
  return j;
}

ObjectPoint object_from_json(const Json& j) {
  const auto type = get_required<std::string>(j, "type");
  auto values = get_required<std::vector<double>>(j, "values");
  if (type == "euclidean") return Euclidean{std::move(values)};
  if (type == "empirical distribution") return EmpiricalDistribution::from_sorted(std::move(values));
  if (type == "quantile grid") return QuantileGrid::make(get_required<std::vector<double>>(j, "levels"), std::move(values));
  if (type == "composition") return Composition::make(std::move(values));
  if (type == "spd matrix") return SpdMatrix::make(get_required<std::size_t>(j, "dim"), std::move(values));
  throw ConfigError("unknown object type '" + type + "'");
}

Json kernel_to_json(const KernelSpec& k) {
  Json j{{"kind", k.kind_name()}, {"metric", to_string(k.metric)}};
  if (const auto* l = std::get_if<LinearKernel>(&k.kind)) j["offset"] = l->offset;
  if (const auto* g = std::get_if<GaussianKernel>(&k.kind)) j["bandwidth"] = g->bandwidth;
  if (const auto* d = std::get_if<DistanceKernel>(&k.kind)) j["anchor"] = d->anchor ? object_to_json(*d->anchor) : Json(nullptr);
  return j;
}

KernelSpec kernel_from_json(const Json& j) {
  reject_unknown(j, {"kind", "metric", "offset", "bandwidth", "anchor"}, "kernel");
  const auto kind = get_required<std::string>(j, "kind");
  const MetricKind metric = metric_from_string(get_required<std::string>(j, "metric"));
  if (kind == "linear") return KernelSpec::linear(metric, get_or<double>(j, "offset", 0.0));
  if (kind == "gaussian") return KernelSpec::gaussian(metric, get_required<double>(j, "bandwidth"));
  if (kind == "distance_induced") {
    std::optional<ObjectPoint> anchor;
    if (j.contains("anchor") && !j.at("anchor").is_null()) anchor = object_from_json(j.at("anchor"));
    return KernelSpec::distance_induced(metric, std::move(anchor));
  }
  throw ConfigError("unknown kernel kind '" + kind + "'");
}

Json family_to_json(const KernelFamily& f) {
  Json j{{"metric", to_string(f.metric)}};
  switch (f.kind) {
    case KernelFamilyKind::Linear:
      j["kind"] = "linear";
      j["offset"] = f.offset;
      break;
    case KernelFamilyKind::Gaussian:
      j["kind"] = "gaussian";
      j["bandwidths"] = f.bandwidths;
      break;
    case KernelFamilyKind::DistanceInduced:
      j["kind"] = "distance_induced";
      j["anchor"] = f.anchor ? object_to_json(*f.anchor) : Json(nullptr);
      break;
  }
  return j;
}

KernelFamily family_from_json(const Json& j) {
  reject_unknown(j, {"kind", "metric", "offset", "bandwidths", "bandwidth", "anchor"}, "kernel");
  const auto kind = get_required<std::string>(j, "kind");
  const MetricKind metric = metric_from_string(get_required<std::string>(j, "metric"));
  if (kind == "linear") return KernelFamily::linear(metric, get_or<double>(j, "offset", 0.0));
  if (kind == "gaussian") {
    auto bw = get_or<std::vector<double>>(j, "bandwidths", {});
    if (j.contains("bandwidth")) bw.push_back(get_required<double>(j, "bandwidth"));
    return KernelFamily::gaussian(metric, std::move(bw));
  }
  if (kind == "distance_induced") {
    std::optional<ObjectPoint> anchor;
    if (j.contains("anchor") && !j.at("anchor").is_null()) anchor = object_from_json(j.at("anchor"));
    return KernelFamily::distance_induced(metric, std::move(anchor));
  }
  throw ConfigError("unknown kernel kind '" + kind + "'");
}

Json config_to_json(const RunConfig& c) {
  Json dirs = c.directions.empty() ? Json("grid") : Json(c.directions);
  return Json{{"schema", kConfigSchema},
              {"data",
               {{"exposure", column_to_json(c.data.exposure)},
                {"mediator", column_to_json(c.data.mediator)},
                {"outcome", column_to_json(c.data.outcome)}}},
              {"kernels", {{"exposure", family_to_json(c.kernel_x)}, {"mediator", family_to_json(c.kernel_m)}}},
              {"eps", optional_number(c.eps)},
              {"eps_tilde", optional_number(c.eps_tilde)},
              {"eps_grid", eps_grid_to_json(c.tuning.eps)},
              {"eps_tilde_grid", eps_grid_to_json(c.tuning.eps_tilde)},
              {"bandwidth_grid_size", c.tuning.bandwidth_grid_size},
              {"tuning_mode", c.tuning.mode == TuningMode::Staged ? "staged" : "mediator_first"},
              {"contrast", {{"x", c.x}, {"x_star", c.x_star}}},
              {"q", c.q},
              {"truncation", c.truncation ? Json(*c.truncation) : Json(nullptr)},
              {"directions", dirs},
              {"seed", c.seed},
              {"grid_size", c.grid_size}};
}

RunConfig config_from_json(const Json& j) {
  expect_schema(j, kConfigSchema);
  reject_unknown(j,
                 {"schema", "data", "kernels", "eps", "eps_tilde", "eps_grid", "eps_tilde_grid", "bandwidth_grid_size",
                  "tuning_mode", "contrast", "q", "truncation", "directions", "seed", "grid_size"},
                 "config");
  RunConfig c;
  if (j.contains("data")) {
    const Json& d = j.at("data");
    reject_unknown(d, {"exposure", "mediator", "outcome"}, "data");
    if (d.contains("exposure")) c.data.exposure = column_from_json(d.at("exposure"), "data.exposure");
    if (d.contains("mediator")) c.data.mediator = column_from_json(d.at("mediator"), "data.mediator");
    if (d.contains("outcome")) c.data.outcome = column_from_json(d.at("outcome"), "data.outcome");
  }
  c.kernel_x = KernelFamily::gaussian(c.data.exposure.natural_metric());
  c.kernel_m = KernelFamily::gaussian(c.data.mediator.natural_metric());
  if (j.contains("kernels")) {
    const Json& k = j.at("kernels");
    reject_unknown(k, {"exposure", "mediator"}, "kernels");
    if (k.contains("exposure")) c.kernel_x = family_from_json(k.at("exposure"));
    if (k.contains("mediator")) c.kernel_m = family_from_json(k.at("mediator"));
  }
  c.eps = read_optional(j, "eps");
  c.eps_tilde = read_optional(j, "eps_tilde");
  if (j.contains("eps_grid")) c.tuning.eps = eps_grid_from_json(j.at("eps_grid"), "eps_grid");
  if (j.contains("eps_tilde_grid")) c.tuning.eps_tilde = eps_grid_from_json(j.at("eps_tilde_grid"), "eps_tilde_grid");
  c.tuning.bandwidth_grid_size = get_or<std::size_t>(j, "bandwidth_grid_size", 9);
  const auto mode = get_or<std::string>(j, "tuning_mode", "staged");
  if (mode == "staged") c.tuning.mode = TuningMode::Staged;
  else if (mode == "mediator_first") c.tuning.mode = TuningMode::MediatorFirst;
  else throw ConfigError("unknown tuning_mode '" + mode + "'");
  if (j.contains("contrast")) {
    const Json& ct = j.at("contrast");
    reject_unknown(ct, {"x", "x_star"}, "contrast");
    c.x = get_or<std::vector<double>>(ct, "x", c.x);
    c.x_star = get_or<std::vector<double>>(ct, "x_star", c.x_star);
  }
  c.q = get_or<double>(j, "q", 0.05);
  if (j.contains("truncation") && !j.at("truncation").is_null()) c.truncation = get_required<Eigen::Index>(j, "truncation");
  if (j.contains("directions")) {
    const Json& d = j.at("directions");
    if (d.is_string()) {
      if (d.get<std::string>() != "grid") throw ConfigError("directions must be \"grid\" or a list of vectors");
    } else {
      c.directions = get_required<std::vector<std::vector<double>>>(j, "directions");
    }
  }
  c.seed = get_or<std::uint64_t>(j, "seed", 1);
  c.grid_size = get_or<std::size_t>(j, "grid_size", 100);
  c.validate();
  return c;
}

RunConfig read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (Error& e) {
    e.add_context(path);
    throw;
  }
}

FittedModel fit_dataset(const RunConfig& config, DatasetTable data) {
  config.validate();
  const std::size_t n = data.y.size();
  GridPtr grid;
  const bool dist = config.data.outcome.type == ColumnType::DistributionSamples ||
                    config.data.outcome.type == ColumnType::DistributionQuantiles;
  if (dist) grid = std::make_shared<const QuadratureGrid>(QuadratureGrid::midpoint(config.grid_size));
  Eigen::MatrixXd hv;
  for (std::size_t i = 0; i < n; ++i) {
    const HilbertVector v = embed_outcome(data.y[i], grid);
    if (i == 0) hv.resize(static_cast<Eigen::Index>(n), v.coords.size());
    hv.row(static_cast<Eigen::Index>(i)) = v.coords.transpose();
  }
  TuningOptions options = config.tuning;
  if (config.eps) options.eps = EpsGrid::absolute({*config.eps});
  if (config.eps_tilde) options.eps_tilde = EpsGrid::absolute({*config.eps_tilde});
  Selection sel = select(data.x, data.m, hv, config.kernel_x, config.kernel_m, options);
  MediationFit fit = MediationFit::from_grams(std::move(data.x), std::move(data.m), std::move(hv), grid, sel.gram_x,
                                              sel.gram_m, sel.eps, sel.eps_tilde);
  return FittedModel{std::move(fit), std::move(sel)};
}

// ---- fit summaries ----

FitSummary summarize_fit(const MediationFit& fit, const std::optional<Selection>& selection, std::uint64_t seed) {
  FitSummary s;
  s.n = static_cast<std::size_t>(fit.n());
  s.dim = static_cast<std::size_t>(fit.dim());
  s.kernel_x = kernel_to_json(fit.kernel_x());
  s.kernel_m = kernel_to_json(fit.kernel_m());
  s.eps = fit.eps();
  s.eps_tilde = fit.eps_tilde();
  s.df_x = fit.sys_x().hat_trace();
  s.df_z = fit.sys_z().hat_trace();
  s.seed = seed;
  if (selection) {
    s.tuned = true;
    s.phi_trace = trace_records(selection->phi);
    s.outcome_trace = trace_records(selection->outcome);
    s.phi_rejected = selection->phi.rejected;
    s.outcome_rejected = selection->outcome.rejected;
  }
  return s;
}

Json fit_to_json(const FitSummary& s) {
  Json phi = Json::array(), out = Json::array();
  for (const auto& r : s.phi_trace) phi.push_back(gcv_to_json(r));
  for (const auto& r : s.outcome_trace) out.push_back(gcv_to_json(r));
  return Json{{"schema", kFitSchema},
              {"n", s.n},
              {"dim", s.dim},
              {"kernel_x", s.kernel_x},
              {"kernel_m", s.kernel_m},
              {"eps", s.eps},
              {"eps_tilde", s.eps_tilde},
              {"df_x", s.df_x},
              {"df_z", s.df_z},
              {"tuned", s.tuned},
              {"gcv_phi", phi},
              {"gcv_outcome", out},
              {"phi_rejected", s.phi_rejected},
              {"outcome_rejected", s.outcome_rejected},
              {"seed", s.seed}};
}

FitSummary fit_from_json(const Json& j) {
  expect_schema(j, kFitSchema);
  FitSummary s;
  s.n = j.at("n").get<std::size_t>();
  s.dim = j.at("dim").get<std::size_t>();
  s.kernel_x = j.at("kernel_x");
  s.kernel_m = j.at("kernel_m");
  s.eps = j.at("eps").get<double>();
  s.eps_tilde = j.at("eps_tilde").get<double>();
  s.df_x = j.at("df_x").get<double>();
  s.df_z = j.at("df_z").get<double>();
  s.tuned = j.at("tuned").get<bool>();
  for (const auto& r : j.at("gcv_phi")) s.phi_trace.push_back(gcv_from_json(r));
  for (const auto& r : j.at("gcv_outcome")) s.outcome_trace.push_back(gcv_from_json(r));
  s.phi_rejected = j.at("phi_rejected").get<std::size_t>();
  s.outcome_rejected = j.at("outcome_rejected").get<std::size_t>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

// ---- effects ----

EffectsReport report_effects(const MediationFit& fit, const ObjectPoint& x, const ObjectPoint& x_star,
                             const InferenceOptions& options, bool run_inference) {
  EffectsReport r;
  r.n = static_cast<std::size_t>(fit.n());
  r.dim = static_cast<std::size_t>(fit.dim());
  r.q = options.q;
  r.eps = fit.eps();
  r.eps_tilde = fit.eps_tilde();
  const EffectEstimates est = estimate_effects(fit, x, x_star);
  std::vector<double> base, weights;
  if (fit.grid()) {
    base = function_values(fit.as_vector(fit.outcome_mean()));
    weights = fit.grid()->weights;
  }
  auto record = [&](const EffectVector& e) {
    EffectRecord rec;
    rec.effect = std::string(to_string(e.kind));
    rec.x = object_to_json(e.x);
    rec.x_star = object_to_json(e.x_star);
    rec.coords = to_std(e.value.coords);
    rec.values = function_values(e.value);
    if (fit.grid()) {
      rec.levels = fit.grid()->levels;
      std::vector<double> shifted(base.size());
      for (std::size_t k = 0; k < base.size(); ++k) shifted[k] = base[k] + rec.values[k];
      rec.adjusted_quantiles = isotonic_projection(shifted, weights);
    }
    return rec;
  };
  EffectRecord nde = record(est.nde), nie = record(est.nie), te = record(est.te);
  if (run_inference) {
    const MediationInference inf(fit);
    auto attach = [&](EffectRecord& rec, const EffectInference& ei) {
      rec.theta_z = ei.theta_z;
      rec.theta_x = ei.theta_x;
      for (const auto& i : ei.intervals) rec.intervals.push_back({i.center, i.lower(), i.upper(), i.variance_warning});
      if (options.run_tests) {
        rec.test = TestRecord{ei.test.statistic, ei.test.p_value, std::string(to_string(ei.test.method)),
                              ei.test.davies_fault, to_std(ei.test.spectrum)};
      }
    };
    attach(nde, inf.infer_nde(est, options));
    attach(nie, inf.infer_nie(est, options));
  }
  r.effects = {std::move(nde), std::move(nie), std::move(te)};
  return r;
}

void write_effects(std::ostream& out, const EffectsReport& r) {
  const Json header{{"schema", kEffectsSchema}, {"record", "header"}, {"n", r.n},         {"dim", r.dim},
                    {"q", r.q},                 {"eps", r.eps},       {"eps_tilde", r.eps_tilde}};
  out << header.dump() << '\n';
  for (const auto& e : r.effects) out << effect_to_json(e).dump() << '\n';
}

EffectsReport read_effects(std::istream& in) {
  EffectsReport r;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw DataError(std::string("effects record: ") + e.what());
    }
    expect_schema(j, kEffectsSchema);
    const auto kind = j.at("record").get<std::string>();
    if (kind == "header") {
      r.n = j.at("n").get<std::size_t>();
      r.dim = j.at("dim").get<std::size_t>();
      r.q = j.at("q").get<double>();
      r.eps = j.at("eps").get<double>();
      r.eps_tilde = j.at("eps_tilde").get<double>();
      have_header = true;
    } else if (kind == "effect") {
      r.effects.push_back(effect_from_json(j));
    } else {
      throw DataError("unknown effects record '" + kind + "'");
    }
  }
  if (!have_header) throw DataError("effects file has no header record");
  return r;
}

void write_effects_csv(std::ostream& out, const EffectsReport& r) {
  out << "effect,index,level,value,lower,upper,adjusted_quantile\n";
  for (const auto& e : r.effects) {
    for (std::size_t k = 0; k < e.values.size(); ++k) {
      out << e.effect << ',' << k << ',' << (e.levels.empty() ? "" : format_double(e.levels[k])) << ','
          << format_double(e.values[k]) << ',';
      if (k < e.intervals.size()) out << format_double(e.intervals[k].lower) << ',' << format_double(e.intervals[k].upper);
      else out << ',';
      out << ',' << (k < e.adjusted_quantiles.size() ? format_double(e.adjusted_quantiles[k]) : "") << '\n';
    }
  }
}

// ---- replication reports ----

Json report_to_json(const ReplicationReport& r) {
  auto mse = [](const MseSummary& s) { return Json{{"mean", s.mean}, {"se", s.se}}; };
  return Json{{"schema", kReportSchema},
              {"scenario", r.scenario},
              {"mode", r.mode},
              {"n", r.n},
              {"m", r.m},
              {"grid_size", r.grid_size},
              {"reps", r.reps},
              {"oracle_size", r.oracle_size},
              {"seed", r.seed},
              {"x", r.x},
              {"x_star", r.x_star},
              {"q", r.q},
              {"direct_scale", r.direct_scale},
              {"indirect_scale", r.indirect_scale},
              {"tuned", r.tuned},
              {"completed", r.completed},
              {"failures", r.failures},
              {"failure_messages", r.failure_messages},
              {"mse_te", mse(r.mse_te)},
              {"mse_nde", mse(r.mse_nde)},
              {"mse_nie", mse(r.mse_nie)},
              {"coverage_nde", r.coverage_nde},
              {"coverage_nie", r.coverage_nie},
              {"rejection_nde", r.rejection_nde},
              {"rejection_nie", r.rejection_nie},
              {"p_nde", r.p_nde},
              {"p_nie", r.p_nie},
              {"true_te", r.true_te},
              {"true_nde", r.true_nde},
              {"true_nie", r.true_nie},
              {"true_mc_se", r.true_mc_se},
              {"median_eps", nan_number(r.median_eps)},
              {"median_eps_tilde", nan_number(r.median_eps_tilde)},
              {"chisq_fallbacks", r.chisq_fallbacks},
              {"variance_warnings", r.variance_warnings},
              {"runtime_seconds", optional_number(r.runtime_seconds)}};
}

ReplicationReport report_from_json(const Json& j) {
  expect_schema(j, kReportSchema);
  auto mse = [](const Json& m) { return MseSummary{m.at("mean").get<double>(), m.at("se").get<double>()}; };
  ReplicationReport r;
  try {
    r.scenario = j.at("scenario").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    r.n = j.at("n").get<std::size_t>();
    r.m = j.at("m").get<std::size_t>();
    r.grid_size = j.at("grid_size").get<std::size_t>();
    r.reps = j.at("reps").get<std::size_t>();
    r.oracle_size = j.at("oracle_size").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.x = j.at("x").get<double>();
    r.x_star = j.at("x_star").get<double>();
    r.q = j.at("q").get<double>();
    r.direct_scale = j.at("direct_scale").get<double>();
    r.indirect_scale = j.at("indirect_scale").get<double>();
    r.tuned = j.at("tuned").get<bool>();
    r.completed = j.at("completed").get<std::size_t>();
    r.failures = j.at("failures").get<std::size_t>();
    r.failure_messages = j.at("failure_messages").get<std::vector<std::string>>();
    r.mse_te = mse(j.at("mse_te"));
    r.mse_nde = mse(j.at("mse_nde"));
    r.mse_nie = mse(j.at("mse_nie"));
    r.coverage_nde = j.at("coverage_nde").get<double>();
    r.coverage_nie = j.at("coverage_nie").get<double>();
    r.rejection_nde = j.at("rejection_nde").get<double>();
    r.rejection_nie = j.at("rejection_nie").get<double>();
    r.p_nde = j.at("p_nde").get<std::vector<double>>();
    r.p_nie = j.at("p_nie").get<std::vector<double>>();
    r.true_te = j.at("true_te").get<std::vector<double>>();
    r.true_nde = j.at("true_nde").get<std::vector<double>>();
    r.true_nie = j.at("true_nie").get<std::vector<double>>();
    r.true_mc_se = j.at("true_mc_se").get<double>();
    r.median_eps = read_nan_number(j, "median_eps");
    r.median_eps_tilde = read_nan_number(j, "median_eps_tilde");
    r.chisq_fallbacks = j.at("chisq_fallbacks").get<std::size_t>();
    r.variance_warnings = j.at("variance_warnings").get<std::size_t>();
    r.runtime_seconds = read_optional(j, "runtime_seconds");
  } catch (const Json::exception& e) {
    throw DataError(std::string("report record: ") + e.what());
  }
  return r;
}

void write_report(std::ostream& out, const ReplicationReport& r) { out << report_to_json(r).dump() << '\n'; }

ReplicationReport read_report(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      return report_from_json(Json::parse(line));
    } catch (const Json::parse_error& e) {
      throw DataError(std::string("report record: ") + e.what());
    }
  }
  throw DataError("report file is empty");
}

void write_report_csv(std::ostream& out, const ReplicationReport& r) {
  out << "section,key,index,value\n";
  auto row = [&](std::string_view section, std::string_view key, std::optional<std::size_t> idx, double v) {
    out << section << ',' << key << ',' << (idx ? std::to_string(*idx) : "") << ',' << format_double(v) << '\n';
  };
  row("summary", "completed", std::nullopt, static_cast<double>(r.completed));
  row("summary", "failures", std::nullopt, static_cast<double>(r.failures));
  row("summary", "mse_te", std::nullopt, r.mse_te.mean);
  row("summary", "mse_te_se", std::nullopt, r.mse_te.se);
  row("summary", "mse_nde", std::nullopt, r.mse_nde.mean);
  row("summary", "mse_nde_se", std::nullopt, r.mse_nde.se);
  row("summary", "mse_nie", std::nullopt, r.mse_nie.mean);
  row("summary", "mse_nie_se", std::nullopt, r.mse_nie.se);
  row("summary", "coverage_nde", std::nullopt, r.coverage_nde);
  row("summary", "coverage_nie", std::nullopt, r.coverage_nie);
  row("summary", "rejection_nde", std::nullopt, r.rejection_nde);
  row("summary", "rejection_nie", std::nullopt, r.rejection_nie);
  row("summary", "median_eps", std::nullopt, r.median_eps);
  row("summary", "median_eps_tilde", std::nullopt, r.median_eps_tilde);
  for (std::size_t k = 0; k < r.true_te.size(); ++k) row("truth", "te", k, r.true_te[k]);
  for (std::size_t k = 0; k < r.true_nde.size(); ++k) row("truth", "nde", k, r.true_nde[k]);
  for (std::size_t k = 0; k < r.true_nie.size(); ++k) row("truth", "nie", k, r.true_nie[k]);
  for (std::size_t k = 0; k < r.p_nde.size(); ++k) row("p_value", "nde", k, r.p_nde[k]);
  for (std::size_t k = 0; k < r.p_nie.size(); ++k) row("p_value", "nie", k, r.p_nie[k]);
}

}  // namespace roma::io
