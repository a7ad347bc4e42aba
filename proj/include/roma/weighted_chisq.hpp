#pragma once

#include <span>
#include <string_view>

namespace roma {

enum class ChisqMethod { Davies, ThreeCumulant };
std::string_view to_string(ChisqMethod method);

struct ChisqResult {
  double cdf;
  ChisqMethod method;
  int davies_fault;  // 0 on success; otherwise the reason for falling back
};

// P(sum_j lambda_j chi2_1 <= t) by characteristic-function inversion, with a
// three-cumulant approximation when the integration cannot meet `accuracy`.
ChisqResult weighted_chisq(std::span<const double> lambdas, double t, double accuracy = 1e-7);

double weighted_chisq_cdf(std::span<const double> lambdas, double t);

// Moment-matched scaled chi-square approximation on its own.
double three_cumulant_cdf(std::span<const double> lambdas, double t);

}  // namespace roma
