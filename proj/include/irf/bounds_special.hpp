#pragma once

#include <cmath>
#include <cstddef>
#include <limits>

#include "irf/errors.hpp"

namespace irf {

/// K_k(rho) = 1 + rho + ... + rho^k.
inline double k_rho(std::size_t k, double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("rho must lie in [0, 1)");
  if (rho == 0.0 || k == 0) return 1.0;
  if (std::abs(1.0 - rho) < 1e-6) {
    double acc = 0.0;
    double w = 1.0;
    for (std::size_t i = 0; i <= k; ++i) {
      acc += w;
      w *= rho;
    }
    return acc;
  }
  // 1 - rho^(k+1) as -expm1((k+1) log rho) keeps precision for rho^(k+1) near 1.
  return -std::expm1(static_cast<double>(k + 1) * std::log(rho)) / (1.0 - rho);
}

/// sum_{i=from}^{n} K_{n-i}(rho)^p.
inline double k_rho_power_sum(std::size_t n, double rho, double p, std::size_t from = 2) {
  double acc = 0.0;
  for (std::size_t i = from; i <= n; ++i) acc += std::pow(k_rho(n - i, rho), p);
  return acc;
}

/// Rio's function l(t) = (t - ln t - 1) + t/(e^t - 1) + ln(1 - e^-t), t > 0.
inline double rio_ell(double t) {
  if (!(t > 0.0)) {
    if (t == 0.0) return 0.0;
    throw DomainError("rio_ell needs t > 0");
  }
  if (t < 0.1) {
    // Taylor series at 0; the closed form cancels catastrophically here.
    const double t2 = t * t;
    return t2 * (1.0 / 8.0 + t2 * (-1.0 / 576.0 + t2 * (1.0 / 25920.0 - t2 / 1075200.0)));
  }
  if (t > 40.0) return t - std::log(t) - 1.0 + t * std::exp(-t);
  return (t - std::log(t) - 1.0) + t / std::expm1(t) + std::log(-std::expm1(-t));
}

/// Young transform l*(x) = sup_{t > 0} (x t - l(t)); +inf for x >= 1.
inline double rio_ell_star(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return std::numeric_limits<double>::infinity();
  const auto f = [x](double t) { return x * t - rio_ell(t); };
  // t -> x t - l(t) is concave; grow the bracket until the objective turns down.
  double lo = 1e-8;
  double hi = 64.0;
  while (f(2.0 * hi) > f(hi) && hi < 1e300) hi *= 2.0;
  hi *= 2.0;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo;
  double b = hi;
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < 400 && b - a > 1e-14 * (1.0 + std::abs(a)); ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return std::max({0.0, f(a), f(b), f(0.5 * (a + b))});
}

/// log H_n(x, v) with H_n = {(v^2/(x+v^2))^(x+v^2) (n/(n-x))^(n-x)}^(n/(n+v^2)) 1{x <= n}
/// and the convention (+inf)^0 = 1 at x = n.
inline double log_bennett_h(double n, double x, double v) {
  if (!(x >= 0.0)) throw DomainError("bennett_H needs x >= 0");
  if (!(v >= 0.0)) throw DomainError("bennett_H needs v >= 0");
  if (x == 0.0) return 0.0;
  if (x > n) return -std::numeric_limits<double>::infinity();
  const double v2 = v * v;
  if (v2 == 0.0) return -std::numeric_limits<double>::infinity();
  const double first = -(x + v2) * std::log1p(x / v2);
  const double second = x < n ? -(n - x) * std::log1p(-x / n) : 0.0;
  return n / (n + v2) * (first + second);
}

inline double bennett_h(double n, double x, double v) { return std::exp(log_bennett_h(n, x, v)); }

/// log B(x, v) with B = (v^2/(x+v^2))^(x+v^2) e^x (Bennett).
inline double log_bennett_b(double x, double v) {
  if (!(x >= 0.0)) throw DomainError("bennett_B needs x >= 0");
  if (x == 0.0) return 0.0;
  const double v2 = v * v;
  if (v2 == 0.0) return -std::numeric_limits<double>::infinity();
  return x - (x + v2) * std::log1p(x / v2);
}

inline double bennett_b(double x, double v) { return std::exp(log_bennett_b(x, v)); }

/// log B1(x, v) = -x^2 / (2 (v^2 + x/3)) (Bernstein).
inline double log_bernstein_b1(double x, double v) {
  if (!(x >= 0.0)) throw DomainError("bernstein_B1 needs x >= 0");
  if (x == 0.0) return 0.0;
  return -x * x / (2.0 * (v * v + x / 3.0));
}

inline double bernstein_b1(double x, double v) { return std::exp(log_bernstein_b1(x, v)); }

}  // namespace irf
