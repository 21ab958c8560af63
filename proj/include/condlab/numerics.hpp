#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace condlab {

using i64 = std::int64_t;
using u64 = std::uint64_t;

// Flag value for log(0); excluded from every log-sum-exp accumulation.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline constexpr double kPi = 3.14159265358979323846;

inline bool is_log_zero(double x) { return x == kLogZero; }

// Terms more than this far below the running maximum are dropped from
// log-sum-exp sums; exp(-45) ~ 2.9e-20, so even 1e5 dropped terms stay
// below 1e-14 relative.
inline constexpr double kLseCutoff = 45.0;

// Streaming log-sum-exp: value() = log(sum_i exp(x_i)) without overflow.
class LogAccumulator {
 public:
  void add(double x) {
    if (is_log_zero(x)) return;
    if (is_log_zero(max_)) {
      max_ = x;
      sum_ = 1.0;
    } else if (x <= max_) {
      sum_ += std::exp(x - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - x) + 1.0;
      max_ = x;
    }
  }
  double value() const {
    if (is_log_zero(max_)) return kLogZero;
    return max_ + std::log(sum_);
  }

 private:
  double max_ = kLogZero;
  double sum_ = 0.0;
};

inline double log_add(double a, double b) {
  if (is_log_zero(a)) return b;
  if (is_log_zero(b)) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

inline double log_sum_exp(std::span<const double> xs) {
  double m = kLogZero;
  for (double x : xs)
    if (!is_log_zero(x) && x > m) m = x;
  if (is_log_zero(m)) return kLogZero;
  double s = 0.0;
  for (double x : xs)
    if (!is_log_zero(x) && x > m - kLseCutoff) s += std::exp(x - m);
  return m + std::log(s);
}

// Kahan compensated summation; the canonical accumulator for realization
// averages so that reductions are reproducible to ~1e-16 regardless of
// how work was partitioned (partial results are always combined in slot
// order).
class CompensatedSum {
 public:
  void add(double x) {
    double y = x - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

inline double log_factorial(i64 n) {
  if (n < 0) throw std::domain_error("log_factorial: n < 0");
  return std::lgamma(static_cast<double>(n) + 1.0);
}

inline double log_binomial(i64 n, i64 k) {
  if (k < 0 || k > n) return kLogZero;
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

// Regularized incomplete gamma functions P(a,x) and Q(a,x) = 1 - P(a,x).
// Series expansion for x < a+1, Lentz continued fraction otherwise;
// absolute accuracy ~1e-14 on the ranges used here.
namespace detail {

inline double gamma_p_series(double a, double x) {
  double ap = a;
  double del = 1.0 / a;
  double sum = del;
  for (int i = 0; i < 1000; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-17) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_contfrac(double a, double x) {
  const double fpmin = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / fpmin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-17) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

inline double gamma_q(double a, double x) {
  if (!(a > 0.0)) throw std::domain_error("gamma_q: a must be positive");
  if (x < 0.0) throw std::domain_error("gamma_q: x must be nonnegative");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_contfrac(a, x);
}

inline double gamma_p(double a, double x) { return 1.0 - gamma_q(a, x); }

// Upper tail of the chi-square distribution with `dof` degrees of freedom.
inline double chi_square_p_value(double chi2, int dof) {
  if (dof <= 0) throw std::domain_error("chi_square_p_value: dof must be positive");
  if (chi2 < 0.0) throw std::domain_error("chi_square_p_value: chi2 must be nonnegative");
  return gamma_q(0.5 * dof, 0.5 * chi2);
}

// Root of f(x) = target for f continuous and strictly increasing on [lo, hi].
// Stops when |f(mid) - target| < y_tol or the bracket shrinks below x_tol.
inline double bisect_increasing(const std::function<double(double)>& f, double lo,
                                double hi, double target, double x_tol, double y_tol) {
  if (!(lo <= hi)) throw std::invalid_argument("bisect_increasing: empty bracket");
  double flo = f(lo);
  double fhi = f(hi);
  if (target <= flo) return lo;
  if (target >= fhi) return hi;
  double mid = lo;
  for (int i = 0; i < 200; ++i) {
    mid = 0.5 * (lo + hi);
    double fm = f(mid);
    if (std::abs(fm - target) < y_tol) return mid;
    if (fm < target)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < x_tol) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace condlab
