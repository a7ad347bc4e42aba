#include "roma/errors.hpp"
#include "roma/kernels.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace roma;

namespace {

double min_eigen_ratio(const Eigen::MatrixXd& k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() / es.eigenvalues().maxCoeff();
}

struct Case {
  KernelSpec spec;
  MetricKind metric;
};

std::vector<Case> all_kernels() {
  std::vector<Case> out;
  for (MetricKind m : {MetricKind::Euclidean, MetricKind::Wasserstein, MetricKind::Frobenius}) {
    out.push_back({KernelSpec::linear(m), m});
    out.push_back({KernelSpec::linear(m, 1.0), m});
  }
  for (MetricKind m : {MetricKind::Euclidean, MetricKind::Wasserstein, MetricKind::Spherical, MetricKind::Frobenius}) {
    out.push_back({KernelSpec::gaussian(m, 0.3), m});
    out.push_back({KernelSpec::gaussian(m, 2.0), m});
    out.push_back({KernelSpec::distance_induced(m), m});
  }
  return out;
}

}  // namespace

TEST_CASE("gaussian kernel examples") {
  const ObjectPoint a = Euclidean{{1.0}};
  CHECK(kernel_eval(KernelSpec::gaussian(MetricKind::Euclidean, 3.0), a, a) == 1.0);
  CHECK(kernel_eval(KernelSpec::gaussian(MetricKind::Euclidean, std::log(2.0)), a, Euclidean{{2.0}}) ==
        doctest::Approx(0.5));
}

TEST_CASE("distance-induced kernel vanishes at its anchor") {
  const ObjectPoint o = Euclidean{{0.5, -1.0}};
  const auto k = KernelSpec::distance_induced(MetricKind::Euclidean, o);
  CHECK(kernel_eval(k, o, o) == 0.0);
  CHECK(kernel_eval(k, Euclidean{{1.5, -1.0}}, Euclidean{{1.5, -1.0}}) == doctest::Approx(1.0));
}

TEST_CASE("gram of orthonormal vectors under the linear kernel is the identity") {
  const std::vector<ObjectPoint> pts{Euclidean{{1, 0}}, Euclidean{{0, 1}}};
  const auto g = gram(KernelSpec::linear(), pts);
  CHECK(g.entries.isApprox(Eigen::Matrix2d::Identity()));
}

TEST_CASE("gaussian gram of identical points is all ones") {
  const std::vector<ObjectPoint> pts(4, Euclidean{{2.0, 3.0}});
  CHECK(gram(KernelSpec::gaussian(MetricKind::Euclidean, 5.0), pts).entries.isApprox(Eigen::MatrixXd::Ones(4, 4)));
}

TEST_CASE("joint gram adds entrywise") {
  const std::vector<ObjectPoint> pts{Euclidean{{1, 0}}, Euclidean{{0, 1}}};
  const auto i2 = gram(KernelSpec::linear(), pts);
  CHECK(joint_gram(i2, i2).entries.isApprox(2.0 * Eigen::Matrix2d::Identity()));
  GramMatrix zero{Eigen::Matrix2d::Zero(), KernelSpec::linear()};
  CHECK(joint_gram(i2, zero).entries == i2.entries);
  GramMatrix wrong{Eigen::Matrix3d::Zero(), KernelSpec::linear()};
  CHECK_THROWS_AS(joint_gram(i2, wrong), DimensionError);
}

TEST_CASE("bandwidth grid examples") {
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(4, 4);
  ones.diagonal().setZero();
  const auto g1 = bandwidth_grid(ones, 1);
  REQUIRE(g1.size() == 1);
  CHECK(g1[0] == doctest::Approx(1.0));

  const auto g5 = bandwidth_grid(ones, 5);
  REQUIRE(g5.size() == 5);
  CHECK(g5[2] == doctest::Approx(1.0));
  for (std::size_t k = 1; k < g5.size(); ++k) CHECK(g5[k] / g5[k - 1] == doctest::Approx(g5[1] / g5[0]));

  const std::vector<ObjectPoint> two{Euclidean{{0.0, 0.0}}, Euclidean{{1.0, 1.0}}};
  const auto g2 = bandwidth_grid(two, MetricKind::Euclidean, 1);
  CHECK(g2[0] == doctest::Approx(0.5));

  const std::vector<ObjectPoint> same(3, Euclidean{{1.0}});
  CHECK_THROWS_AS(bandwidth_grid(same, MetricKind::Euclidean, 3), DegenerateDataError);
}

TEST_CASE("bandwidth grid centers on the reciprocal median squared distance") {
  oracle::Rng rng(5);
  const auto pts = oracle::random_points(rng, MetricKind::Euclidean, 31, 2);
  std::vector<double> d2;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double d = metric_distance(MetricKind::Euclidean, pts[i], pts[j]);
      d2.push_back(d * d);
    }
  std::sort(d2.begin(), d2.end());
  const double med = d2.size() % 2 ? d2[d2.size() / 2] : 0.5 * (d2[d2.size() / 2 - 1] + d2[d2.size() / 2]);
  const auto g = bandwidth_grid(pts, MetricKind::Euclidean, 9);
  CHECK(g[4] == doctest::Approx(1.0 / med).epsilon(1e-12));
}

TEST_CASE("linear kernel rejects objects without an inner product") {
  const std::vector<ObjectPoint> pts{Composition::make({0.5, 0.5}), Composition::make({1.0, 0.0})};
  CHECK_THROWS_AS(gram(KernelSpec::linear(MetricKind::Spherical), pts), TypeMismatchError);
}

TEST_CASE("property: every kernel gives a symmetric positive semidefinite gram matrix") {
  oracle::Rng rng(99);
  for (const auto& c : all_kernels()) {
    for (int rep = 0; rep < 10; ++rep) {
      const auto pts = oracle::random_points(rng, c.metric, 30, 3);
      const auto g = gram(c.spec, pts);
      CAPTURE(c.spec.kind_name());
      CAPTURE(to_string(c.metric));
      CHECK((g.entries - g.entries.transpose()).cwiseAbs().maxCoeff() == 0.0);
      CHECK(min_eigen_ratio(g.entries) >= -1e-8);
    }
  }
}

TEST_CASE("property: kernel evaluation is symmetric") {
  oracle::Rng rng(3);
  for (const auto& c : all_kernels()) {
    for (int rep = 0; rep < 20; ++rep) {
      auto spec = c.spec;
      if (spec.is_distance_induced()) spec = KernelSpec::distance_induced(c.metric, oracle::random_point(rng, c.metric, 3));
      const auto a = oracle::random_point(rng, c.metric, 3);
      const auto b = oracle::random_point(rng, c.metric, 3);
      CHECK(kernel_eval(spec, a, b) == doctest::Approx(kernel_eval(spec, b, a)).epsilon(1e-14));
    }
  }
}

TEST_CASE("property: parallel and serial assembly agree to rounding") {
  oracle::Rng rng(4);
  for (const auto& c : all_kernels()) {
    const auto pts = oracle::random_points(rng, c.metric, 40, 3);
    CHECK((gram(c.spec, pts).entries - serial::gram(c.spec, pts).entries).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((pairwise_sq_distances(c.metric, pts) - serial::pairwise_sq_distances(c.metric, pts)).cwiseAbs().maxCoeff() <
          1e-13);
  }
}

TEST_CASE("property: gram entries match pointwise evaluation") {
  oracle::Rng rng(6);
  const auto pts = oracle::random_points(rng, MetricKind::Wasserstein, 12, 20);
  const auto spec = KernelSpec::gaussian(MetricKind::Wasserstein, 0.7);
  const auto g = gram(spec, pts);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j) {
      const double d = metric_distance(MetricKind::Wasserstein, pts[i], pts[j]);
      CHECK(g.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ==
            doctest::Approx(std::exp(-0.7 * d * d)).epsilon(1e-12));
    }
}
