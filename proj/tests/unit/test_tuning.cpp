#include "roma/errors.hpp"
#include "roma/simulation.hpp"
#include "roma/tuning.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace roma;

namespace {

// Column i is the evaluation vector of training point i: K(i, j) - mean_k K(k, j).
Eigen::MatrixXd eval_columns(const Eigen::MatrixXd& k) {
  const Eigen::Index n = k.rows();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      double mean = 0.0;
      for (Eigen::Index l = 0; l < n; ++l) mean += k(l, j);
      d(j, i) = k(i, j) - mean / static_cast<double>(n);
    }
  return d;
}

double dense_df(const Eigen::MatrixXd& g, double eps) {
  const Eigen::Index n = g.rows();
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  return (oracle::q_matrix(n) * g * oracle::regularized_inverse(g, eps) + ones).trace();
}

double oracle_gcv_phi(const Eigen::MatrixXd& kx, const Eigen::MatrixXd& km, double eps) {
  const Eigen::Index n = kx.rows();
  const Eigen::MatrixXd g = oracle::dense_center(kx);
  const Eigen::MatrixXd inv = oracle::regularized_inverse(g, eps);
  const Eigen::MatrixXd d = eval_columns(kx);
  double num = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd c = oracle::q_matrix(n) * inv * d.col(i);
    Eigen::VectorXd w = g * inv * c;
    w.array() += 1.0 / static_cast<double>(n);
    Eigen::VectorXd r = -w;
    r[i] += 1.0;
    num += r.dot(km * r);
  }
  num /= static_cast<double>(n);
  const double defl = 1.0 - dense_df(g, eps) / static_cast<double>(n);
  return num / (defl * defl);
}

double oracle_gcv_outcome(const Eigen::MatrixXd& kz, const Eigen::MatrixXd& hv, double eps) {
  const Eigen::Index n = kz.rows();
  const Eigen::MatrixXd g = oracle::dense_center(kz);
  const Eigen::MatrixXd inv = oracle::regularized_inverse(g, eps);
  const Eigen::MatrixXd d = eval_columns(kz);
  const Eigen::RowVectorXd mean = hv.colwise().mean();
  Eigen::MatrixXd hc = hv;
  hc.rowwise() -= mean;
  double num = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd c = oracle::q_matrix(n) * inv * d.col(i);
    const Eigen::RowVectorXd fitted = mean + (hc.transpose() * g * inv * c).transpose();
    num += (hv.row(i) - fitted).squaredNorm();
  }
  num /= static_cast<double>(n);
  const double defl = 1.0 - dense_df(g, eps) / static_cast<double>(n);
  return num / (defl * defl);
}

struct Problem {
  std::vector<ObjectPoint> x, m;
  Eigen::MatrixXd hv;
};

Problem problem(oracle::Rng& rng, std::size_t n) {
  Problem p;
  p.hv.resize(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = oracle::uniform(rng, -1, 1);
    p.x.push_back(Euclidean{{x}});
    p.m.push_back(EmpiricalDistribution::from_samples(oracle::sorted_normals(rng, 30, 2.0 * x, 1.0)));
    p.hv(static_cast<Eigen::Index>(i), 0) = x + x * x + 0.2 * oracle::normal(rng);
    p.hv(static_cast<Eigen::Index>(i), 1) = std::cos(2.0 * x) + 0.2 * oracle::normal(rng);
  }
  return p;
}

const KernelSpec kx_spec = KernelSpec::gaussian(MetricKind::Euclidean, 2.0);
const KernelSpec km_spec = KernelSpec::gaussian(MetricKind::Wasserstein, 0.3);

}  // namespace

TEST_CASE("property: mediator criterion matches the dense definition") {
  oracle::Rng rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    const auto p = problem(rng, 10 + static_cast<std::size_t>(rep));
    const auto kx = gram(kx_spec, p.x);
    const auto km = gram(km_spec, p.m);
    const double eps = std::pow(10.0, -3.0 + 0.15 * rep);
    CHECK(gcv_phi(kx, km, eps) == doctest::Approx(oracle_gcv_phi(kx.entries, km.entries, eps)).epsilon(1e-9));
    CHECK(gcv_phi(p.x, p.m, kx_spec, km_spec, eps) == doctest::Approx(gcv_phi(kx, km, eps)).epsilon(1e-14));
  }
}

TEST_CASE("property: outcome criterion matches the dense definition") {
  oracle::Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const auto p = problem(rng, 10 + static_cast<std::size_t>(rep));
    const auto kx = gram(kx_spec, p.x);
    const auto km = gram(km_spec, p.m);
    const double eps = std::pow(10.0, -3.0 + 0.15 * rep);
    CHECK(gcv_outcome(kx, km, p.hv, eps) ==
          doctest::Approx(oracle_gcv_outcome(kx.entries + km.entries, p.hv, eps)).epsilon(1e-9));
  }
}

TEST_CASE("property: spectral and direct criteria agree") {
  oracle::Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const auto p = problem(rng, 30);
    const auto kx = gram(kx_spec, p.x);
    const auto km = gram(km_spec, p.m);
    const auto med = SpectralGcv::mediator(kx.entries, km.entries);
    const auto out = SpectralGcv::outcome(kx.entries + km.entries, p.hv);
    for (double rel : {1e-5, 1e-3, 1e-1, 1.0}) {
      const double e1 = rel * med.scale(), e2 = rel * out.scale();
      CHECK(med.score(e1) == doctest::Approx(gcv_phi(kx, km, e1)).epsilon(1e-8));
      CHECK(out.score(e2) == doctest::Approx(gcv_outcome(kx, km, p.hv, e2)).epsilon(1e-8));
    }
  }
}

TEST_CASE("heavy regularization drives the outcome criterion to the deflated total variance") {
  oracle::Rng rng(4);
  const auto p = problem(rng, 25);
  const auto kx = gram(kx_spec, p.x);
  const auto km = gram(km_spec, p.m);
  Eigen::MatrixXd hc = p.hv;
  hc.rowwise() -= hc.colwise().mean();
  const double total = hc.squaredNorm() / 25.0;
  const double defl = (1.0 - 1.0 / 25.0) * (1.0 - 1.0 / 25.0);
  CHECK(gcv_outcome(kx, km, p.hv, 1e12) == doctest::Approx(total / defl).epsilon(1e-8));
  const double spread = oracle::dense_center(km.entries).trace() / 25.0;
  CHECK(gcv_phi(kx, km, 1e12) == doctest::Approx(spread / defl).epsilon(1e-8));
}

TEST_CASE("noise-free additive outcomes favour small outcome regularization") {
  oracle::Rng rng(5);
  auto p = problem(rng, 40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    const double x = std::get<Euclidean>(p.x[static_cast<std::size_t>(i)]).coords[0];
    p.hv(i, 0) = 3.0 * x;
    p.hv(i, 1) = -x;
  }
  const auto sel = select(p.x, p.m, p.hv, KernelFamily::linear(MetricKind::Euclidean),
                          KernelFamily::linear(MetricKind::Wasserstein));
  const auto& t = sel.outcome;
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& c : t.candidates) lo = std::min(lo, c.eps);
  CHECK(sel.eps_tilde <= 1e-4 * lo / 1e-6);
}

TEST_CASE("property: criteria do not depend on sample order") {
  oracle::Rng rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    const auto p = problem(rng, 20);
    std::vector<std::size_t> perm(20);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Problem q;
    q.hv.resize(20, 2);
    for (std::size_t i = 0; i < 20; ++i) {
      q.x.push_back(p.x[perm[i]]);
      q.m.push_back(p.m[perm[i]]);
      q.hv.row(static_cast<Eigen::Index>(i)) = p.hv.row(static_cast<Eigen::Index>(perm[i]));
    }
    CHECK(gcv_phi(p.x, p.m, kx_spec, km_spec, 0.05) ==
          doctest::Approx(gcv_phi(q.x, q.m, kx_spec, km_spec, 0.05)).epsilon(1e-10));
    CHECK(gcv_outcome(p.x, p.m, p.hv, kx_spec, km_spec, 0.05) ==
          doctest::Approx(gcv_outcome(q.x, q.m, q.hv, kx_spec, km_spec, 0.05)).epsilon(1e-10));
  }
}

TEST_CASE("single-candidate grids return that candidate") {
  oracle::Rng rng(7);
  const auto p = problem(rng, 20);
  TuningOptions opt;
  opt.eps = EpsGrid::absolute({0.02});
  opt.eps_tilde = EpsGrid::absolute({0.03});
  const auto sel = select(p.x, p.m, p.hv, KernelFamily::gaussian(MetricKind::Euclidean, {1.5}),
                          KernelFamily::gaussian(MetricKind::Wasserstein, {0.25}), opt);
  CHECK(sel.eps == 0.02);
  CHECK(sel.eps_tilde == 0.03);
  CHECK(sel.gram_x.kernel.bandwidth() == 1.5);
  CHECK(sel.gram_m.kernel.bandwidth() == 0.25);
  CHECK(sel.phi.candidates.size() == 1);
  CHECK(sel.outcome.candidates.size() == 1);
}

TEST_CASE("property: reordering the grids does not change the selection") {
  oracle::Rng rng(8);
  for (int rep = 0; rep < 5; ++rep) {
    const auto p = problem(rng, 25);
    std::vector<double> gx{0.5, 1.0, 2.0, 4.0}, gm{0.1, 0.3, 0.9};
    TuningOptions a;
    a.eps = EpsGrid::log_relative(8, 1e-4, 1.0);
    a.eps_tilde = EpsGrid::log_relative(8, 1e-4, 1.0);
    TuningOptions b = a;
    std::reverse(b.eps.values.begin(), b.eps.values.end());
    std::shuffle(b.eps_tilde.values.begin(), b.eps_tilde.values.end(), rng);
    auto gx2 = gx, gm2 = gm;
    std::reverse(gx2.begin(), gx2.end());
    std::shuffle(gm2.begin(), gm2.end(), rng);
    const auto s1 = select(p.x, p.m, p.hv, KernelFamily::gaussian(MetricKind::Euclidean, gx),
                           KernelFamily::gaussian(MetricKind::Wasserstein, gm), a);
    const auto s2 = select(p.x, p.m, p.hv, KernelFamily::gaussian(MetricKind::Euclidean, gx2),
                           KernelFamily::gaussian(MetricKind::Wasserstein, gm2), b);
    CHECK(s1.eps == s2.eps);
    CHECK(s1.eps_tilde == s2.eps_tilde);
    CHECK(s1.gram_x.kernel.bandwidth() == s2.gram_x.kernel.bandwidth());
    CHECK(s1.gram_m.kernel.bandwidth() == s2.gram_m.kernel.bandwidth());
  }
}

TEST_CASE("the selected candidate attains the minimum score of its trace") {
  oracle::Rng rng(9);
  const auto p = problem(rng, 30);
  const auto sel = select(p.x, p.m, p.hv, KernelFamily::gaussian(MetricKind::Euclidean),
                          KernelFamily::gaussian(MetricKind::Wasserstein));
  for (const auto* t : {&sel.phi, &sel.outcome}) {
    for (const auto& c : t->candidates) {
      CHECK(c.score >= t->best().score);
      CHECK(std::isfinite(c.score));
      CHECK(c.score > 0.0);
    }
  }
  CHECK(sel.outcome.candidates.size() == 9 * 9 * 20 - sel.outcome.rejected);
  CHECK(sel.phi.candidates.size() == 20 - sel.phi.rejected);
  CHECK(sel.gram_x.kernel.bandwidth() == sel.outcome.best().gamma_x);
  CHECK(sel.gram_m.kernel.bandwidth() == sel.outcome.best().gamma_m);
  CHECK(sel.eps == sel.phi.best().eps);
  CHECK(sel.eps_tilde == sel.outcome.best().eps);
}

TEST_CASE("mediator-first mode chooses kernels on the mediator criterion") {
  oracle::Rng rng(10);
  const auto p = problem(rng, 30);
  TuningOptions opt;
  opt.mode = TuningMode::MediatorFirst;
  const auto sel = select(p.x, p.m, p.hv, KernelFamily::gaussian(MetricKind::Euclidean),
                          KernelFamily::gaussian(MetricKind::Wasserstein), opt);
  CHECK(sel.gram_x.kernel.bandwidth() == sel.phi.best().gamma_x);
  CHECK(sel.gram_m.kernel.bandwidth() == sel.phi.best().gamma_m);
  CHECK(sel.outcome.candidates.size() + sel.outcome.rejected == 20);
}

TEST_CASE("the mediator criterion shrinks in proportion to a vanishing mediator bandwidth") {
  oracle::Rng rng(11);
  const auto p = problem(rng, 30);
  const auto kx = gram(kx_spec, p.x);
  const double a = gcv_phi(kx, gram(KernelSpec::gaussian(MetricKind::Wasserstein, 1e-5), p.m), 0.1);
  const double b = gcv_phi(kx, gram(KernelSpec::gaussian(MetricKind::Wasserstein, 1e-4), p.m), 0.1);
  CHECK(b / a == doctest::Approx(10.0).epsilon(1e-3));
}

TEST_CASE("regularizations below the floor are rejected and counted") {
  oracle::Rng rng(12);
  const auto p = problem(rng, 15);
  const auto kx = gram(kx_spec, p.x);
  const auto km = gram(km_spec, p.m);
  const auto crit = SpectralGcv::mediator(kx.entries, km.entries);
  CHECK_THROWS_AS(crit.score(0.5 * crit.floor()), RegularizationTooSmall);
  CHECK_THROWS_AS(gcv_phi(kx, km, 0.0), RegularizationTooSmall);

  TuningOptions opt;
  opt.eps = EpsGrid::absolute({1e-30, 0.1});
  opt.eps_tilde = EpsGrid::absolute({1e-30, 0.1});
  const auto sel = select(p.x, p.m, p.hv, KernelFamily::gaussian(MetricKind::Euclidean, {2.0}),
                          KernelFamily::gaussian(MetricKind::Wasserstein, {0.3}), opt);
  CHECK(sel.phi.rejected == 1);
  CHECK(sel.outcome.rejected == 1);
  CHECK(sel.eps == 0.1);

  opt.eps = EpsGrid::absolute({1e-30});
  CHECK_THROWS_AS(select(p.x, p.m, p.hv, KernelFamily::gaussian(MetricKind::Euclidean, {2.0}),
                         KernelFamily::gaussian(MetricKind::Wasserstein, {0.3}), opt),
                  TuningFailedError);
}

TEST_CASE("configuration errors in grids") {
  CHECK_THROWS_AS(EpsGrid::absolute({0.1, -1.0}), ConfigError);
  CHECK_THROWS_AS(EpsGrid::log_relative(0), ConfigError);
  CHECK_THROWS_AS(KernelFamily::gaussian(MetricKind::Euclidean, {0.0}), ConfigError);
  const auto g = EpsGrid::log_relative(20);
  CHECK(g.values.front() == doctest::Approx(1e-6));
  CHECK(g.values.back() == doctest::Approx(1.0));
  CHECK(g.relative);
}
