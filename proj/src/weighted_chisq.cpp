#include "roma/weighted_chisq.hpp"

#include "roma/errors.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace roma {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLog28 = 0.0866;  // log(2) / 8
constexpr int kTermLimit = 1000000;

struct LimitReached {};

// Characteristic-function inversion for a positive combination of central
// chi-square(1) variables (Davies 1980, algorithm AS 155).
class Davies {
 public:
  explicit Davies(std::vector<double> lambdas) : lb_(std::move(lambdas)), r_(static_cast<int>(lb_.size())) {}

  double cdf(double c, double acc, int& fault) {
    fault = 0;
    try {
      return run(c, acc, fault);
    } catch (const LimitReached&) {
      fault = 4;
      return -1.0;
    }
  }

 private:
  static double exp1(double x) { return x < -50.0 ? 0.0 : std::exp(x); }

  // log(1+x), or log(1+x) - x when `first` is false.
  static double log1(double x, bool first) {
    if (std::abs(x) > 0.1) return first ? std::log1p(x) : std::log1p(x) - x;
    double y = x / (2.0 + x);
    double term = 2.0 * y * y * y;
    double k = 3.0;
    double s = (first ? 2.0 : -x) * y;
    y = y * y;
    for (double s1 = s + term / k; s1 != s; s1 = s + term / k) {
      k += 2.0;
      term *= y;
      s = s1;
    }
    return s;
  }

  void counter() {
    if (++count_ > kTermLimit) throw LimitReached{};
  }

  void order() {
    th_.resize(static_cast<std::size_t>(r_));
    for (int j = 0; j < r_; ++j) th_[static_cast<std::size_t>(j)] = j;
    std::stable_sort(th_.begin(), th_.end(), [&](int a, int b) {
      return std::abs(lb_[static_cast<std::size_t>(a)]) > std::abs(lb_[static_cast<std::size_t>(b)]);
    });
    sorted_ = true;
  }

  double errbd(double u, double& cx) {
    counter();
    double xconst = u * sigsq_;
    double sum1 = u * xconst;
    u *= 2.0;
    for (int j = r_ - 1; j >= 0; --j) {
      const double lj = lb_[static_cast<std::size_t>(j)];
      const double x = u * lj;
      const double y = 1.0 - x;
      xconst += lj / y;
      sum1 += x * x / y + log1(-x, false);
    }
    cx = xconst;
    return exp1(-0.5 * sum1);
  }

  double ctff(double accx, double& upn) {
    double u2 = upn;
    double u1 = 0.0;
    double c1 = mean_;
    double c2 = 0.0;
    const double rb = 2.0 * (u2 > 0.0 ? lmax_ : lmin_);
    for (double u = u2 / (1.0 + u2 * rb); errbd(u, c2) > accx; u = u2 / (1.0 + u2 * rb)) {
      u1 = u2;
      c1 = c2;
      u2 *= 2.0;
    }
    for (double u = (c1 - mean_) / (c2 - mean_); u < 0.9; u = (c1 - mean_) / (c2 - mean_)) {
      u = 0.5 * (u1 + u2);
      double xconst = 0.0;
      if (errbd(u / (1.0 + u * rb), xconst) > accx) {
        u1 = u;
        c1 = xconst;
      } else {
        u2 = u;
        c2 = xconst;
      }
    }
    upn = u2;
    return c2;
  }

  double truncation(double u, double tausq) {
    counter();
    double prod2 = 0.0;
    double prod3 = 0.0;
    int s = 0;
    const double sum2 = (sigsq_ + tausq) * u * u;
    double prod1 = 2.0 * sum2;
    u *= 2.0;
    for (int j = 0; j < r_; ++j) {
      const double x = (u * lb_[static_cast<std::size_t>(j)]) * (u * lb_[static_cast<std::size_t>(j)]);
      if (x > 1.0) {
        prod2 += std::log(x);
        prod3 += log1(x, true);
        ++s;
      } else {
        prod1 += log1(x, true);
      }
    }
    prod2 += prod1;
    prod3 += prod1;
    const double x = exp1(-0.25 * prod2) / kPi;
    const double y = exp1(-0.25 * prod3) / kPi;
    double err1 = s == 0 ? 1.0 : x * 2.0 / s;
    const double err2 = prod3 > 1.0 ? 2.5 * y : 1.0;
    err1 = std::min(err1, err2);
    const double half = 0.5 * sum2;
    const double err3 = half <= y ? 1.0 : y / half;
    return std::min(err1, err3);
  }

  void findu(double& utx, double accx) {
    static constexpr double kDivisors[] = {2.0, 1.4, 1.2, 1.1};
    double ut = utx;
    double u = ut / 4.0;
    if (truncation(u, 0.0) > accx) {
      for (u = ut; truncation(u, 0.0) > accx; u = ut) ut *= 4.0;
    } else {
      ut = u;
      for (u = u / 4.0; truncation(u, 0.0) <= accx; u /= 4.0) ut = u;
    }
    for (double d : kDivisors) {
      u = ut / d;
      if (truncation(u, 0.0) <= accx) ut = u;
    }
    utx = ut;
  }

  void integrate(int nterm, double interv, double tausq, bool main) {
    const double inpi = interv / kPi;
    for (int k = nterm; k >= 0; --k) {
      const double u = (k + 0.5) * interv;
      double sum1 = -2.0 * u * c_;
      double sum2 = std::abs(sum1);
      double sum3 = -0.5 * sigsq_ * u * u;
      for (int j = r_ - 1; j >= 0; --j) {
        const double x = 2.0 * lb_[static_cast<std::size_t>(j)] * u;
        sum3 -= 0.25 * log1(x * x, true);
        const double z = std::atan(x);
        sum1 += z;
        sum2 += std::abs(z);
      }
      double x = inpi * exp1(sum3) / u;
      if (!main) x *= 1.0 - exp1(-0.5 * tausq * u * u);
      intl_ += std::sin(0.5 * sum1) * x;
      ersm_ += 0.5 * sum2 * x;
    }
  }

  double cfe(double x) {
    counter();
    if (!sorted_) order();
    double axl = std::abs(x);
    const double sxl = x > 0.0 ? 1.0 : -1.0;
    double sum1 = 0.0;
    for (int j = r_ - 1; j >= 0; --j) {
      const int t = th_[static_cast<std::size_t>(j)];
      const double lt = lb_[static_cast<std::size_t>(t)];
      if (lt * sxl > 0.0) {
        const double lj = std::abs(lt);
        const double axl1 = axl - lj;
        const double axl2 = lj / kLog28;
        if (axl1 > axl2) {
          axl = axl1;
        } else {
          if (axl > axl2) axl = axl2;
          sum1 = (axl - axl1) / lj + j;
          break;
        }
      }
    }
    if (sum1 > 100.0) {
      fail_ = true;
      return 1.0;
    }
    return std::pow(2.0, sum1 / 4.0) / (kPi * axl * axl);
  }

  double run(double c, double acc, int& fault) {
    static constexpr int kRadix[] = {1, 2, 4, 8};
    c_ = c;
    double acc1 = acc;
    double xlim = kTermLimit;
    sigsq_ = 0.0;
    double sd = 0.0;
    lmax_ = 0.0;
    lmin_ = 0.0;
    mean_ = 0.0;
    for (double lj : lb_) {
      sd += lj * lj * 2.0;
      mean_ += lj;
      if (lmax_ < lj) {
        lmax_ = lj;
      } else if (lmin_ > lj) {
        lmin_ = lj;
      }
    }
    if (sd == 0.0) return c > 0.0 ? 1.0 : 0.0;
    sd = std::sqrt(sd);
    const double almx = std::max(lmax_, -lmin_);

    double utx = 16.0 / sd;
    double up = 4.5 / sd;
    double un = -up;
    findu(utx, 0.5 * acc1);
    if (c != 0.0 && almx > 0.07 * sd) {
      const double tausq = 0.25 * acc1 / cfe(c);
      if (fail_) {
        fail_ = false;
      } else if (truncation(utx, tausq) < 0.2 * acc1) {
        sigsq_ += tausq;
        findu(utx, 0.25 * acc1);
      }
    }
    acc1 *= 0.5;

    double intv = 0.0;
    double xnt = 0.0;
    for (;;) {
      const double d1 = ctff(acc1, up) - c;
      if (d1 < 0.0) return 1.0;
      const double d2 = c - ctff(acc1, un);
      if (d2 < 0.0) return 0.0;
      intv = 2.0 * kPi / std::max(d1, d2);
      xnt = utx / intv;
      const double xntm = 3.0 / std::sqrt(acc1);
      if (!(xnt > xntm * 1.5)) break;
      if (xntm > xlim) {
        fault = 1;
        return -1.0;
      }
      const int ntm = static_cast<int>(std::floor(xntm + 0.5));
      const double intv1 = utx / ntm;
      const double x = 2.0 * kPi / intv1;
      if (x <= std::abs(c)) break;
      const double tausq = 0.33 * acc1 / (1.1 * (cfe(c - x) + cfe(c + x)));
      if (fail_) break;
      acc1 *= 0.67;
      integrate(ntm, intv1, tausq, false);
      xlim -= xntm;
      sigsq_ += tausq;
      findu(utx, 0.25 * acc1);
      acc1 *= 0.75;
    }

    if (xnt > xlim) {
      fault = 1;
      return -1.0;
    }
    const int nt = static_cast<int>(std::floor(xnt + 0.5));
    integrate(nt, intv, 0.0, true);
    const double value = 0.5 - intl_;
    const double x = ersm_ + acc / 10.0;
    for (int r : kRadix)
      if (r * x == r * ersm_) fault = 2;
    return value;
  }

  std::vector<double> lb_;
  int r_;
  std::vector<int> th_;
  bool sorted_ = false;
  bool fail_ = false;
  int count_ = 0;
  double sigsq_ = 0.0, lmax_ = 0.0, lmin_ = 0.0, mean_ = 0.0, c_ = 0.0;
  double intl_ = 0.0, ersm_ = 0.0;
};

std::vector<double> admissible(std::span<const double> lambdas) {
  double top = 0.0;
  for (double l : lambdas) {
    if (!std::isfinite(l)) throw NumericalError("non-finite chi-square weight");
    top = std::max(top, std::abs(l));
  }
  std::vector<double> out;
  for (double l : lambdas) {
    if (l < -1e-12 * top) throw NumericalError("negative chi-square weight " + std::to_string(l));
    if (l > 1e-12 * top) out.push_back(l);
  }
  if (out.empty()) throw DegenerateSpectrumError("all chi-square weights are zero");
  return out;
}

double three_cumulant(const std::vector<double>& lb, double t) {
  double c1 = 0.0, c2 = 0.0, c3 = 0.0;
  for (double l : lb) {
    c1 += l;
    c2 += l * l;
    c3 += l * l * l;
  }
  const double h = c2 * c2 * c2 / (c3 * c3);
  const double y = h + (t - c1) * std::sqrt(h / c2);
  if (y <= 0.0) return 0.0;
  return boost::math::gamma_p(0.5 * h, 0.5 * y);
}

}  // namespace

std::string_view to_string(ChisqMethod method) {
  return method == ChisqMethod::Davies ? "davies" : "three_cumulant";
}

ChisqResult weighted_chisq(std::span<const double> lambdas, double t, double accuracy) {
  std::vector<double> lb = admissible(lambdas);
  if (!std::isfinite(t)) throw NumericalError("non-finite chi-square argument");
  if (t <= 0.0) return ChisqResult{0.0, ChisqMethod::Davies, 0};
  Davies davies(lb);
  int fault = 0;
  const double p = davies.cdf(t, accuracy, fault);
  if (fault == 1 || fault == 4 || !(p >= -accuracy && p <= 1.0 + accuracy)) {
    return ChisqResult{std::clamp(three_cumulant(lb, t), 0.0, 1.0), ChisqMethod::ThreeCumulant,
                       fault == 0 ? 3 : fault};
  }
  return ChisqResult{std::clamp(p, 0.0, 1.0), ChisqMethod::Davies, fault};
}

double weighted_chisq_cdf(std::span<const double> lambdas, double t) { return weighted_chisq(lambdas, t).cdf; }

double three_cumulant_cdf(std::span<const double> lambdas, double t) {
  return std::clamp(three_cumulant(admissible(lambdas), t), 0.0, 1.0);
}

}  // namespace roma
