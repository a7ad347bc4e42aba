#include "roma/errors.hpp"
#include "roma/weighted_chisq.hpp"
#include "support/oracles.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

using namespace roma;

TEST_CASE("chi-square quantile examples") {
  CHECK(weighted_chisq_cdf(std::vector<double>{1.0}, 3.841459) == doctest::Approx(0.95).epsilon(1e-6));
  CHECK(weighted_chisq_cdf(std::vector<double>{1.0, 1.0}, 5.991465) == doctest::Approx(0.95).epsilon(1e-6));
  CHECK(weighted_chisq_cdf(std::vector<double>{2.0}, 7.682918) == doctest::Approx(0.95).epsilon(1e-6));
}

TEST_CASE("equal weights reproduce the chi-square distribution") {
  for (int k : {1, 2, 5}) {
    const std::vector<double> lambdas(static_cast<std::size_t>(k), 1.0);
    const boost::math::chi_squared_distribution<double> chi(k);
    for (double t : {0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 15.0}) {
      const ChisqResult r = weighted_chisq(lambdas, t);
      CHECK(r.method == ChisqMethod::Davies);
      CHECK(std::abs(r.cdf - boost::math::cdf(chi, t)) < 1e-6);
    }
  }
}

TEST_CASE("property: unequal weights match the Imhof integral") {
  oracle::Rng rng(1);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<double> lambdas(3 + static_cast<std::size_t>(rep % 8));
    for (double& l : lambdas) l = std::exp(2.0 * oracle::normal(rng));
    double mean = 0.0;
    for (double l : lambdas) mean += l;
    for (double frac : {0.3, 0.8, 1.0, 1.7, 3.0}) {
      const double t = frac * mean;
      CHECK(std::abs(weighted_chisq_cdf(lambdas, t) - oracle::imhof_cdf(lambdas, t)) < 1e-6);
    }
  }
}

TEST_CASE("property: the distribution function is nondecreasing and tends to one") {
  oracle::Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> lambdas(1 + static_cast<std::size_t>(rep % 10));
    double sum = 0.0;
    for (double& l : lambdas) {
      l = oracle::uniform(rng, 0.01, 3.0);
      sum += l;
    }
    double previous = 0.0;
    for (double t = 0.0; t < 6.0 * sum; t += 0.05 * sum) {
      const double p = weighted_chisq_cdf(lambdas, t);
      CHECK(p >= previous - 1e-7);
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      previous = p;
    }
    CHECK(weighted_chisq_cdf(lambdas, 100.0 * sum) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("zero weights are ignored and invalid weights are rejected") {
  const std::vector<double> padded{1.0, 0.0, 0.0};
  CHECK(weighted_chisq_cdf(padded, 3.841459) == doctest::Approx(0.95).epsilon(1e-6));
  CHECK_THROWS_AS(weighted_chisq_cdf(std::vector<double>{0.0, 0.0}, 1.0), DegenerateSpectrumError);
  CHECK_THROWS_AS(weighted_chisq_cdf(std::vector<double>{1.0, -0.5}, 1.0), NumericalError);
  CHECK_THROWS_AS(weighted_chisq_cdf(std::vector<double>{1.0}, std::nan("")), NumericalError);
  CHECK(weighted_chisq_cdf(std::vector<double>{1.0}, 0.0) == 0.0);
  CHECK(weighted_chisq_cdf(std::vector<double>{1.0}, -2.0) == 0.0);
}

TEST_CASE("three-cumulant approximation is exact for equal weights") {
  const boost::math::chi_squared_distribution<double> chi(4);
  const std::vector<double> lambdas(4, 0.5);
  for (double t : {0.5, 1.0, 2.0, 4.0}) {
    CHECK(three_cumulant_cdf(lambdas, t) == doctest::Approx(boost::math::cdf(chi, 2.0 * t)).epsilon(1e-12));
  }
}

TEST_CASE("three-cumulant approximation is close for moderately unequal weights") {
  const std::vector<double> lambdas{3.0, 2.0, 1.0, 0.5};
  for (double t : {2.0, 6.5, 15.0}) CHECK(std::abs(three_cumulant_cdf(lambdas, t) - oracle::imhof_cdf(lambdas, t)) < 0.02);
}
