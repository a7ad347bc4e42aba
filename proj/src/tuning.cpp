#include "roma/tuning.hpp"

#include "roma/errors.hpp"
#include "roma/gram_algebra.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <string>

namespace roma {

namespace {

// Eigenvalues of a centered Gram matrix in ascending order; the first belongs
// to the constant vector and is exactly zero.
Eigen::VectorXd centered_spectrum(const Eigen::VectorXd& values) {
  Eigen::VectorXd v = values.cwiseMax(0.0);
  if (v.size() > 0) v[0] = 0.0;
  return v;
}

constexpr double kNoBandwidth = std::numeric_limits<double>::quiet_NaN();

double deflation(double df, Eigen::Index n) {
  const double r = 1.0 - df / static_cast<double>(n);
  if (!(r > 0.0)) {
    throw SaturatedModelError("effective degrees of freedom " + std::to_string(df) + " reach the sample size " +
                              std::to_string(n));
  }
  return r * r;
}

// (I - S^2) v with S = G (G + eps I)^{-1}, written as eps (G + eps I)^{-1} (I + S) v
// to avoid cancellation at small eps.
Eigen::MatrixXd residual_operator(const GramSystem& sys, const Eigen::MatrixXd& v) {
  const Eigen::MatrixXd w = v + sys.smooth(v);
  return sys.eps() * sys.solve(w);
}

struct KernelCandidate {
  GramMatrix gram;
  double gamma;
};

std::vector<KernelCandidate> candidates_for(const KernelFamily& family, std::span<const ObjectPoint> points,
                                            std::size_t grid_size) {
  std::vector<KernelCandidate> out;
  switch (family.kind) {
    case KernelFamilyKind::Linear:
      out.push_back({gram(KernelSpec::linear(family.metric, family.offset), points), kNoBandwidth});
      break;
    case KernelFamilyKind::DistanceInduced:
      out.push_back({gram(KernelSpec::distance_induced(family.metric, family.anchor), points), kNoBandwidth});
      break;
    case KernelFamilyKind::Gaussian: {
      const Eigen::MatrixXd d2 = pairwise_sq_distances(family.metric, points);
      std::vector<double> gammas = family.bandwidths.empty() ? bandwidth_grid(d2, grid_size) : family.bandwidths;
      for (double g : gammas) out.push_back({gaussian_gram(family.metric, g, d2), g});
      break;
    }
  }
  if (out.empty()) throw ConfigError("empty bandwidth grid");
  return out;
}

std::vector<double> resolve(const EpsGrid& grid, double scale) {
  if (grid.values.empty()) throw ConfigError("empty regularization grid");
  std::vector<double> out;
  out.reserve(grid.values.size());
  for (double v : grid.values) out.push_back(grid.relative ? v * scale : v);
  return out;
}

// Strictly better: lower score, then larger eps, then smaller bandwidths.
bool better(const GcvCandidate& a, const GcvCandidate& b) {
  if (a.score != b.score) return a.score < b.score;
  if (a.eps != b.eps) return a.eps > b.eps;
  auto key = [](double g) { return std::isnan(g) ? 0.0 : g; };
  if (key(a.gamma_x) != key(b.gamma_x)) return key(a.gamma_x) < key(b.gamma_x);
  return key(a.gamma_m) < key(b.gamma_m);
}

void finish(GcvTrace& trace, const char* what) {
  if (trace.candidates.empty()) {
    throw TuningFailedError(std::string("every candidate of the ") + what + " criterion was rejected");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < trace.candidates.size(); ++i)
    if (better(trace.candidates[i], trace.candidates[best])) best = i;
  trace.argmin = best;
}

// Scores every eps for one spectral criterion; inadmissible values are counted.
void scan(const SpectralGcv& crit, const EpsGrid& grid, double gx, double gm, std::vector<GcvCandidate>& out,
          std::size_t& rejected) {
  for (double eps : resolve(grid, crit.scale())) {
    try {
      const double s = crit.score(eps);
      if (std::isfinite(s) && s > 0.0) {
        out.push_back({eps, gx, gm, s});
      } else {
        ++rejected;
      }
    } catch (const RegularizationTooSmall&) {
      ++rejected;
    } catch (const SaturatedModelError&) {
      ++rejected;
    }
  }
}

struct PairScan {
  std::vector<GcvCandidate> candidates;
  std::size_t rejected = 0;
};

template <typename MakeCriterion>
GcvTrace scan_pairs(const std::vector<KernelCandidate>& cx, const std::vector<KernelCandidate>& cm,
                    const EpsGrid& grid, MakeCriterion make, const char* what) {
  const std::size_t pairs = cx.size() * cm.size();
  std::vector<PairScan> results(pairs);
  std::exception_ptr failure;
  const auto np = static_cast<std::ptrdiff_t>(pairs);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t p = 0; p < np; ++p) {
    const auto pu = static_cast<std::size_t>(p);
    const auto& a = cx[pu / cm.size()];
    const auto& b = cm[pu % cm.size()];
    try {
      scan(make(a.gram.entries, b.gram.entries), grid, a.gamma, b.gamma, results[pu].candidates,
           results[pu].rejected);
    } catch (...) {
#pragma omp critical(roma_tuning_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  GcvTrace trace;
  for (auto& r : results) {
    trace.candidates.insert(trace.candidates.end(), r.candidates.begin(), r.candidates.end());
    trace.rejected += r.rejected;
  }
  finish(trace, what);
  return trace;
}

const KernelCandidate& find_gamma(const std::vector<KernelCandidate>& c, double gamma) {
  for (const auto& k : c)
    if ((std::isnan(gamma) && std::isnan(k.gamma)) || k.gamma == gamma) return k;
  throw NumericalError("selected bandwidth vanished from the grid");
}

}  // namespace

KernelFamily KernelFamily::linear(MetricKind metric, double offset) {
  KernelFamily f;
  f.kind = KernelFamilyKind::Linear;
  f.metric = metric;
  f.offset = offset;
  return f;
}

KernelFamily KernelFamily::gaussian(MetricKind metric, std::vector<double> bandwidths) {
  for (double g : bandwidths)
    if (!(g > 0.0) || !std::isfinite(g)) throw ConfigError("gaussian bandwidth must be positive");
  KernelFamily f;
  f.kind = KernelFamilyKind::Gaussian;
  f.metric = metric;
  f.bandwidths = std::move(bandwidths);
  return f;
}

KernelFamily KernelFamily::distance_induced(MetricKind metric, std::optional<ObjectPoint> anchor) {
  KernelFamily f;
  f.kind = KernelFamilyKind::DistanceInduced;
  f.metric = metric;
  f.anchor = std::move(anchor);
  return f;
}

EpsGrid EpsGrid::log_relative(std::size_t size, double lo, double hi) {
  if (size == 0 || !(lo > 0.0) || !(hi >= lo)) throw ConfigError("invalid regularization grid");
  EpsGrid g;
  g.relative = true;
  for (std::size_t k = 0; k < size; ++k) {
    const double t = size == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(size - 1);
    g.values.push_back(lo * std::pow(hi / lo, t));
  }
  return g;
}

EpsGrid EpsGrid::absolute(std::vector<double> values) {
  for (double v : values)
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("regularization values must be positive");
  return EpsGrid{std::move(values), false};
}

double gcv_phi(const GramMatrix& kx, const GramMatrix& km, double eps) {
  const GramSystem sys(kx.entries, eps, Basis::X);
  const Eigen::Index n = sys.n();
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(n, n);
  q.array() -= 1.0 / static_cast<double>(n);
  const Eigen::MatrixXd r = residual_operator(sys, q);
  const double numerator = (r.transpose() * center(km.entries) * r).trace() / static_cast<double>(n);
  return numerator / deflation(sys.hat_trace() + 1.0, n);
}

double gcv_phi(std::span<const ObjectPoint> x, std::span<const ObjectPoint> m, const KernelSpec& kernel_x,
               const KernelSpec& kernel_m, double eps) {
  if (x.size() != m.size()) throw DimensionError("exposure and mediator counts differ");
  return gcv_phi(gram(kernel_x, x), gram(kernel_m, m), eps);
}

double gcv_outcome(const GramMatrix& kx, const GramMatrix& km, const Eigen::MatrixXd& hv, double eps_tilde) {
  const GramSystem sys(kx.entries + km.entries, eps_tilde, Basis::Z);
  const Eigen::Index n = sys.n();
  if (hv.rows() != n) throw DimensionError("outcome rows do not match the sample size");
  Eigen::MatrixXd qh = hv;
  qh.rowwise() -= qh.colwise().mean();
  const Eigen::MatrixXd w = residual_operator(sys, qh);
  const double numerator = w.squaredNorm() / static_cast<double>(n);
  return numerator / deflation(sys.hat_trace() + 1.0, n);
}

double gcv_outcome(std::span<const ObjectPoint> x, std::span<const ObjectPoint> m, const Eigen::MatrixXd& hv,
                   const KernelSpec& kernel_x, const KernelSpec& kernel_m, double eps_tilde) {
  if (x.size() != m.size()) throw DimensionError("exposure and mediator counts differ");
  return gcv_outcome(gram(kernel_x, x), gram(kernel_m, m), hv, eps_tilde);
}

SpectralGcv SpectralGcv::mediator(const Eigen::MatrixXd& kx, const Eigen::MatrixXd& km) {
  const Eigen::MatrixXd g = center(kx);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (g + g.transpose()));
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition did not converge");
  const Eigen::MatrixXd& u = es.eigenvectors();
  Eigen::VectorXd w = (u.transpose() * center(km) * u).diagonal();
  return SpectralGcv(centered_spectrum(es.eigenvalues()), std::move(w), g.trace());
}

SpectralGcv SpectralGcv::outcome(const Eigen::MatrixXd& kz, const Eigen::MatrixXd& hv) {
  if (hv.rows() != kz.rows()) throw DimensionError("outcome rows do not match the sample size");
  const Eigen::MatrixXd g = center(kz);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (g + g.transpose()));
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition did not converge");
  Eigen::MatrixXd qh = hv;
  qh.rowwise() -= qh.colwise().mean();
  Eigen::VectorXd w = (es.eigenvectors().transpose() * qh).rowwise().squaredNorm();
  return SpectralGcv(centered_spectrum(es.eigenvalues()), std::move(w), g.trace());
}

double SpectralGcv::floor() const { return 1e-12 * scale(); }

double SpectralGcv::score(double eps) const {
  if (!std::isfinite(eps) || !(eps > 0.0) || eps <= floor()) {
    throw RegularizationTooSmall("regularization " + std::to_string(eps) + " is at or below the floor");
  }
  const Eigen::Index n = values_.size();
  double hat = 0.0;
  double numerator = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double l = values_[j];
    hat += l / (l + eps);
    const double keep = eps * (2.0 * l + eps) / ((l + eps) * (l + eps));
    numerator += keep * keep * weights_[j];
  }
  return numerator / static_cast<double>(n) / deflation(hat + 1.0, n);
}

Selection select(std::span<const ObjectPoint> x, std::span<const ObjectPoint> m, const Eigen::MatrixXd& hv,
                 const KernelFamily& family_x, const KernelFamily& family_m, const TuningOptions& options) {
  if (x.size() != m.size() || static_cast<Eigen::Index>(x.size()) != hv.rows()) {
    throw DimensionError("exposure, mediator and outcome counts differ");
  }
  const auto cx = candidates_for(family_x, x, options.bandwidth_grid_size);
  const auto cm = candidates_for(family_m, m, options.bandwidth_grid_size);

  auto outcome_criterion = [&hv](const Eigen::MatrixXd& kx, const Eigen::MatrixXd& km) {
    return SpectralGcv::outcome(kx + km, hv);
  };
  auto mediator_criterion = [](const Eigen::MatrixXd& kx, const Eigen::MatrixXd& km) {
    return SpectralGcv::mediator(kx, km);
  };

  Selection sel{cx.front().gram, cm.front().gram, 0.0, 0.0, {}, {}};
  if (options.mode == TuningMode::Staged) {
    sel.outcome = scan_pairs(cx, cm, options.eps_tilde, outcome_criterion, "outcome");
    const auto& best = sel.outcome.best();
    const auto& kx = find_gamma(cx, best.gamma_x);
    const auto& km = find_gamma(cm, best.gamma_m);
    sel.phi = scan_pairs({kx}, {km}, options.eps, mediator_criterion, "mediator");
    sel.gram_x = kx.gram;
    sel.gram_m = km.gram;
  } else {
    sel.phi = scan_pairs(cx, cm, options.eps, mediator_criterion, "mediator");
    const auto& best = sel.phi.best();
    const auto& kx = find_gamma(cx, best.gamma_x);
    const auto& km = find_gamma(cm, best.gamma_m);
    sel.outcome = scan_pairs({kx}, {km}, options.eps_tilde, outcome_criterion, "outcome");
    sel.gram_x = kx.gram;
    sel.gram_m = km.gram;
  }
  sel.eps = sel.phi.best().eps;
  sel.eps_tilde = sel.outcome.best().eps;
  return sel;
}

}  // namespace roma
