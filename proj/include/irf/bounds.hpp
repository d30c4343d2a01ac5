#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "irf/bounds_special.hpp"
#include "irf/errors.hpp"

namespace irf {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// n counts states X_1..X_n; rho is the contraction factor.
struct Horizon {
  std::size_t n = 1;
  double rho = 0.0;

  void validate() const {
    if (n < 1) throw DomainError("n must be >= 1");
    if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("rho must lie in [0, 1)");
  }
  double k_last() const { return k_rho(n - 1, rho); }
};

namespace detail {

inline void require_nonneg(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError(std::string(name) + " must be finite and >= 0");
}

inline void require_pos(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(name) + " must be finite and > 0");
}

inline double clamp_prob(double log_value) {
  if (std::isnan(log_value)) return 1.0;
  return std::clamp(std::exp(log_value), 0.0, 1.0);
}

/// log(exp(a) + exp(b)).
inline double log_add(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace detail

/// V = V1 K_{n-1}^2 + V2 sum_{k=2}^n K_{n-k}^2.
inline double variance_proxy(const Horizon& h, double v1, double v2) {
  const double k = h.k_last();
  return v1 * k * k + v2 * k_rho_power_sum(h.n, h.rho, 2.0);
}

// ---------------------------------------------------------------- Bernstein

struct BernsteinConstants {
  double v1 = 0.0;
  double v2 = 0.0;
  double m = 1.0;

  void validate() const {
    detail::require_nonneg(v1, "V1");
    detail::require_nonneg(v2, "V2");
    detail::require_pos(m, "M");
  }
};

struct BernsteinScale {
  double v = 0.0;      // V
  double delta = 0.0;  // M K_{n-1}
};

inline BernsteinScale bernstein_scale(const Horizon& h, const BernsteinConstants& c) {
  h.validate();
  c.validate();
  return {variance_proxy(h, c.v1, c.v2), c.m * h.k_last()};
}

/// exp(t^2 V / (2 (1 - t delta))) for t in [0, 1/delta); +inf beyond.
inline double bernstein_mgf(double t, const Horizon& h, const BernsteinConstants& c) {
  if (!(t >= 0.0)) throw DomainError("bernstein_mgf needs t >= 0");
  const auto s = bernstein_scale(h, c);
  if (t * s.delta >= 1.0) return kInf;
  return std::exp(t * t * s.v / (2.0 * (1.0 - t * s.delta)));
}

/// Chernoff objective -t x + t^2 V / (2 (1 - t delta)).
inline double bernstein_objective(double t, double x, double v, double delta) {
  return -t * x + t * t * v / (2.0 * (1.0 - t * delta));
}

/// Minimizer t(x) = (2x/V) / (2x delta/V + 1 + sqrt(1 + 2x delta/V)).
inline double bernstein_tmin(double x, double v, double delta) {
  const double r = 2.0 * x * delta / v;
  return (2.0 * x / v) / (r + 1.0 + std::sqrt(1.0 + r));
}

/// log of exp(-x^2 / (V (1 + sqrt(1 + 2x delta/V)) + x delta)), the Chernoff
/// objective at t(x) (negative for x > 0).
inline double bernstein_log_tail(double x, double v, double delta) {
  if (!(x >= 0.0)) throw DomainError("x must be >= 0");
  if (x == 0.0) return 0.0;
  if (v == 0.0) return -kInf;
  return -x * x / (v * (1.0 + std::sqrt(1.0 + 2.0 * x * delta / v)) + x * delta);
}

/// log of the weaker exp(-x^2 / (2 (V + x delta))).
inline double bernstein_log_tail_weak(double x, double v, double delta) {
  if (!(x >= 0.0)) throw DomainError("x must be >= 0");
  if (x == 0.0) return 0.0;
  if (v == 0.0) return -kInf;
  return -x * x / (2.0 * (v + x * delta));
}

inline double bernstein_tail(double x, const Horizon& h, const BernsteinConstants& c) {
  const auto s = bernstein_scale(h, c);
  return detail::clamp_prob(bernstein_log_tail(x, s.v, s.delta));
}

inline double bernstein_tail_weak(double x, const Horizon& h, const BernsteinConstants& c) {
  const auto s = bernstein_scale(h, c);
  return detail::clamp_prob(bernstein_log_tail_weak(x, s.v, s.delta));
}

// ------------------------------------------------------------------- Cramér

struct CramerConstants {
  double a = 1.0;
  double k1 = 1.0;
  double k2 = 1.0;

  void validate() const {
    detail::require_pos(a, "a");
    if (!(k1 >= 1.0) || !std::isfinite(k1)) throw DomainError("K1 must be finite and >= 1");
    if (!(k2 >= 1.0) || !std::isfinite(k2)) throw DomainError("K2 must be finite and >= 1");
  }
};

struct CramerScale {
  double k = 0.0;      // (2/e^2)(K1 + K2 sum (K_{n-i}/K_{n-1})^2)
  double delta = 0.0;  // a / K_{n-1}
};

inline CramerScale cramer_scale(const Horizon& h, const CramerConstants& c) {
  h.validate();
  c.validate();
  const double kl = h.k_last();
  const double ratio_sum = k_rho_power_sum(h.n, h.rho, 2.0) / (kl * kl);
  return {2.0 * std::exp(-2.0) * (c.k1 + c.k2 * ratio_sum), c.a / kl};
}

/// exp(t^2 K delta^-2 / (1 - t/delta)) for t in [0, delta); +inf beyond.
inline double cramer_mgf(double t, const Horizon& h, const CramerConstants& c) {
  if (!(t >= 0.0)) throw DomainError("cramer_mgf needs t >= 0");
  const auto s = cramer_scale(h, c);
  if (t >= s.delta) return kInf;
  return std::exp(t * t * s.k / (s.delta * s.delta) / (1.0 - t / s.delta));
}

inline double cramer_objective(double t, double x, double k, double delta) {
  return -t * x + t * t * k / (delta * delta) / (1.0 - t / delta);
}

/// Minimizer t(x) = (x delta^2/K) / (x delta/K + 1 + sqrt(1 + x delta/K)).
inline double cramer_tmin(double x, double k, double delta) {
  const double r = x * delta / k;
  return (x * delta * delta / k) / (r + 1.0 + std::sqrt(1.0 + r));
}

/// log of exp(-(x delta)^2 / (2K (1 + sqrt(1 + x delta/K)) + x delta)), the
/// Chernoff objective at t(x).
inline double cramer_log_tail(double x, double k, double delta) {
  if (!(x >= 0.0)) throw DomainError("x must be >= 0");
  if (x == 0.0) return 0.0;
  const double xd = x * delta;
  return -xd * xd / (2.0 * k * (1.0 + std::sqrt(1.0 + xd / k)) + xd);
}

inline double cramer_log_tail_weak(double x, double k, double delta) {
  if (!(x >= 0.0)) throw DomainError("x must be >= 0");
  if (x == 0.0) return 0.0;
  const double xd = x * delta;
  return -xd * xd / (4.0 * k + 2.0 * xd);
}

inline double cramer_tail(double x, const Horizon& h, const CramerConstants& c) {
  const auto s = cramer_scale(h, c);
  return detail::clamp_prob(cramer_log_tail(x, s.k, s.delta));
}

inline double cramer_tail_weak(double x, const Horizon& h, const CramerConstants& c) {
  const auto s = cramer_scale(h, c);
  return detail::clamp_prob(cramer_log_tail_weak(x, s.k, s.delta));
}

// ------------------------------------------------- Liu-Watbled / sub-Gaussian

struct LwConstants {
  double q = 0.0;
  double tau = 0.0;
  double a1 = 0.0;
};

/// q = p/(p-1), tau from (q tau)^(1/q) (p a)^(1/p) (1 - rho) = 1, and a1 from
/// (q tau)^(1/q) (p a1)^(1/p) = 1, i.e. a1 = a (1 - rho)^p.
inline LwConstants lw_constants(double a, double p, double rho) {
  detail::require_pos(a, "a");
  if (!(p > 1.0)) throw DomainError("p must be > 1");
  if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("rho must lie in [0, 1)");
  LwConstants out;
  out.q = p / (p - 1.0);
  out.tau = std::pow(std::pow(p * a, -1.0 / p) / (1.0 - rho), out.q) / out.q;
  out.a1 = a * std::pow(1.0 - rho, p);
  return out;
}

/// Two-regime shape with caller-supplied existence constants x1 and B:
/// exp(-a1 x^p / n^(p-1)) for x >= n x1, exp(-B x^2 / n) below.
struct LiuWatbledConstants {
  double a = 1.0;
  double p = 2.0;
  double x1 = 1.0;
  double b = 1.0;

  void validate() const {
    detail::require_pos(a, "a");
    if (!(p > 1.0)) throw DomainError("p must be > 1");
    detail::require_pos(x1, "x1");
    detail::require_pos(b, "B");
  }
};

inline double liu_watbled_log_tail(double x, const Horizon& h, const LiuWatbledConstants& c) {
  h.validate();
  c.validate();
  if (!(x >= 0.0)) throw DomainError("x must be >= 0");
  const double n = static_cast<double>(h.n);
  if (x >= n * c.x1) {
    const double a1 = lw_constants(c.a, c.p, h.rho).a1;
    return -a1 * std::pow(x, c.p) / std::pow(n, c.p - 1.0);
  }
  return -c.b * x * x / n;
}

/// exp(-x^2 / (4 n c)) with caller-supplied c.
inline double subgaussian_log_tail(double x, const Horizon& h, double c) {
  h.validate();
  detail::require_pos(c, "c");
  if (!(x >= 0.0)) throw DomainError("x must be >= 0");
  return -x * x / (4.0 * static_cast<double>(h.n) * c);
}

// --------------------------------------------------------- semi-exponential

struct SemiExpConstants {
  double p = 0.5;
  double k1 = 1.0;
  double k2 = 1.0;

  void validate() const {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("semi-exponential p must lie in (0, 1)");
    detail::require_pos(k1, "K1");
    detail::require_pos(k2, "K2");
  }
};

/// K = K1 + K2 sum_{i=2}^n (K_{n-i}/K_{n-1})^2.
inline double semi_exp_k(const Horizon& h, const SemiExpConstants& c) {
  h.validate();
  c.validate();
  const double kl = h.k_last();
  return c.k1 + c.k2 * k_rho_power_sum(h.n, h.rho, 2.0) / (kl * kl);
}

/// Regime split K^(1/(2-p)).
inline double semi_exp_split(const Horizon& h, const SemiExpConstants& c) {
  return std::pow(semi_exp_k(h, c), 1.0 / (2.0 - c.p));
}

/// Truncation level y(x): (K/x)^(1/(1-p)) below the split, x above.
inline double semi_exp_truncation(double x, const Horizon& h, const SemiExpConstants& c) {
  if (!(x >= 0.0)) throw DomainError("x must be >= 0");
  const double k = semi_exp_k(h, c);
  if (x >= std::pow(k, 1.0 / (2.0 - c.p))) return x;
  if (x == 0.0) return kInf;
  return std::pow(k / x, 1.0 / (1.0 - c.p));
}

inline double semi_exp_log_tail(double x, const Horizon& h, const SemiExpConstants& c) {
  if (!(x >= 0.0)) throw DomainError("x must be >= 0");
  const double k = semi_exp_k(h, c);
  const double kl = h.k_last();
  const double p = c.p;
  if (x == 0.0) return 0.0;
  if (x < std::pow(k, 1.0 / (2.0 - p))) {
    const double first = -x * x / (2.0 * k * kl * kl);
    const double second = 2.0 * std::log(kl) + (2.0 * std::log(x) - (1.0 + p) * std::log(k)) / (1.0 - p) -
                          std::pow(k / (x * std::pow(kl, 1.0 - p)), p / (1.0 - p));
    return detail::log_add(first, second);
  }
  const double u = x / kl;
  const double up = std::pow(u, p);
  const double first = -up * (1.0 - 0.5 * k * std::pow(1.0 / u, 2.0 - p));
  const double second = std::log(k) - 2.0 * std::log(u) - up;
  return detail::log_add(first, second);
}

inline double semi_exp_tail(double x, const Horizon& h, const SemiExpConstants& c) {
  return detail::clamp_prob(semi_exp_log_tail(x, h, c));
}

// ---------------------------------------------------------- Rio / McDiarmid

/// Bounded-increment constants M_1..M_n.
struct RioConstants {
  std::vector<double> m;

  /// M_1 for the start, M_k = m_rest for k = 2..n.
  static RioConstants uniform(std::size_t n, double m1, double m_rest) {
    RioConstants c;
    c.m.assign(n, m_rest);
    if (n > 0) c.m[0] = m1;
    return c;
  }

  void validate(std::size_t n) const {
    if (m.size() != n) throw DomainError("Rio constants need exactly n values M_1..M_n");
    bool any = false;
    for (double v : m) {
      detail::require_nonneg(v, "M_k");
      any = any || v > 0.0;
    }
    if (!any) throw DomainError("Rio constants need some M_k > 0");
  }
};

struct RioScale {
  double d = 0.0;   // D(n, rho) = sum K_{n-k} M_k
  double m2 = 0.0;  // M^2(n, rho) = sum (K_{n-k} M_k)^2
};

inline RioScale rio_scale(const Horizon& h, const RioConstants& c) {
  h.validate();
  c.validate(h.n);
  RioScale s;
  for (std::size_t k = 1; k <= h.n; ++k) {
    const double w = k_rho(h.n - k, h.rho) * c.m[k - 1];
    s.d += w;
    s.m2 += w * w;
  }
  return s;
}

/// exp((D^2/M^2) l(M^2 t / D)), t >= 0.
inline double rio_mgf(double t, const Horizon& h, const RioConstants& c) {
  if (!(t >= 0.0)) throw DomainError("rio_mgf needs t >= 0");
  const auto s = rio_scale(h, c);
  return std::exp(s.d * s.d / s.m2 * rio_ell(s.m2 * t / s.d));
}

/// log of exp(-(D^2/M^2) l*(x/D)); -inf beyond D since S_n <= D surely.
inline double rio_log_tail(double x, const RioScale& s) {
  if (!(x >= 0.0)) throw DomainError("x must be >= 0");
  if (x == 0.0) return 0.0;
  if (x >= s.d) return -kInf;
  return -(s.d * s.d / s.m2) * rio_ell_star(x / s.d);
}

/// log of ((D - x)/D)^((2Dx - x^2)/M^2).
inline double rio_closed_log_tail(double x, const RioScale& s) {
  if (!(x >= 0.0)) throw DomainError("x must be >= 0");
  if (x == 0.0) return 0.0;
  if (x >= s.d) return -kInf;
  return (2.0 * s.d * x - x * x) / s.m2 * std::log1p(-x / s.d);
}

/// log of exp(-2x^2 / M^2); -inf beyond D.
inline double mcdiarmid_log_tail(double x, const RioScale& s) {
  if (!(x >= 0.0)) throw DomainError("x must be >= 0");
  if (x > s.d) return -kInf;
  return -2.0 * x * x / s.m2;
}

inline double rio_tail(double x, const Horizon& h, const RioConstants& c) {
  return detail::clamp_prob(rio_log_tail(x, rio_scale(h, c)));
}

inline double rio_closed_tail(double x, const Horizon& h, const RioConstants& c) {
  return detail::clamp_prob(rio_closed_log_tail(x, rio_scale(h, c)));
}

inline double mcdiarmid_tail(double x, const Horizon& h, const RioConstants& c) {
  return detail::clamp_prob(mcdiarmid_log_tail(x, rio_scale(h, c)));
}

// ------------------------------------------------- Hoeffding / Fuk-Nagaev

/// Bounded dominating variables: G <= M, E G^2 <= V1, V2.
struct HoeffdingConstants {
  double v1 = 0.0;
  double v2 = 0.0;
  double m = 1.0;

  void validate() const {
    detail::require_nonneg(v1, "V1");
    detail::require_nonneg(v2, "V2");
    detail::require_pos(m, "M");
  }
};

/// Arguments of H_n at truncation level y: (x/(y K_{n-1}), sqrt(V)/(y K_{n-1})).
inline std::pair<double, double> bennett_arguments(double x, double y, double v, const Horizon& h) {
  const double scale = y * h.k_last();
  return {x / scale, std::sqrt(v) / scale};
}

inline double hoeffding_log_tail(double x, const Horizon& h, const HoeffdingConstants& c) {
  h.validate();
  c.validate();
  if (!(x >= 0.0)) throw DomainError("x must be >= 0");
  const auto [u, w] = bennett_arguments(x, c.m, variance_proxy(h, c.v1, c.v2), h);
  return log_bennett_h(static_cast<double>(h.n), u, w);
}

inline double hoeffding_bennett_log_tail(double x, const Horizon& h, const HoeffdingConstants& c) {
  h.validate();
  c.validate();
  if (!(x >= 0.0)) throw DomainError("x must be >= 0");
  const auto [u, w] = bennett_arguments(x, c.m, variance_proxy(h, c.v1, c.v2), h);
  return log_bennett_b(u, w);
}

inline double hoeffding_b1_log_tail(double x, const Horizon& h, const HoeffdingConstants& c) {
  h.validate();
  c.validate();
  if (!(x >= 0.0)) throw DomainError("x must be >= 0");
  const auto [u, w] = bennett_arguments(x, c.m, variance_proxy(h, c.v1, c.v2), h);
  return log_bernstein_b1(u, w);
}

inline double hoeffding_tail(double x, const Horizon& h, const HoeffdingConstants& c) {
  return detail::clamp_prob(hoeffding_log_tail(x, h, c));
}

/// H_n(x/(y K_{n-1}), sqrt(V)/(y K_{n-1})) + max_tail, clamped.
inline double fuk_nagaev_tail(double x, double y, double v, const Horizon& h, double max_tail) {
  h.validate();
  if (!(y > 0.0)) throw DomainError("truncation level y must be > 0");
  if (!(x >= 0.0)) throw DomainError("x must be >= 0");
  detail::require_nonneg(v, "V");
  if (!(max_tail >= 0.0)) throw DomainError("max_tail must be >= 0");
  const auto [u, w] = bennett_arguments(x, y, v, h);
  return std::clamp(bennett_h(static_cast<double>(h.n), u, w) + max_tail, 0.0, 1.0);
}

/// Constants for the weak-moment (p > 2) or explicit-remainder variants.
struct FukNagaevConstants {
  double v1 = 0.0;
  double v2 = 0.0;
  double p = 3.0;
  double a1 = 0.0;  // weak moment bound of G_{X1}(X1)
  double a2 = 0.0;  // weak moment bound of G_eps(eps)
  std::optional<double> y;         // fixed truncation level; automatic when absent
  std::optional<double> max_tail;  // explicit P(max G > y) bound replacing A(p)/y^p

  void validate() const {
    detail::require_nonneg(v1, "V1");
    detail::require_nonneg(v2, "V2");
    if (max_tail) {
      if (!y) throw DomainError("an explicit max_tail needs its truncation level y");
      if (!(*max_tail >= 0.0)) throw DomainError("max_tail must be >= 0");
    } else {
      if (!(p > 2.0)) throw DomainError("weak Fuk-Nagaev needs p > 2");
      detail::require_nonneg(a1, "A1(p)");
      detail::require_nonneg(a2, "A2(p)");
    }
    if (y) detail::require_pos(*y, "y");
  }
};

/// y = 3x / (2 p K_{n-1} ln n) for a deviation x of S_n (n >= 3).
inline double weak_fuk_nagaev_level(double x, const Horizon& h, double p) {
  if (h.n < 3) throw DomainError("the automatic truncation level needs n >= 3");
  return 3.0 * x / (2.0 * p * h.k_last() * std::log(static_cast<double>(h.n)));
}

inline double fuk_nagaev_log_tail(double x, const Horizon& h, const FukNagaevConstants& c) {
  h.validate();
  c.validate();
  if (!(x >= 0.0)) throw DomainError("x must be >= 0");
  if (x == 0.0) return 0.0;
  const double y = c.y ? *c.y : weak_fuk_nagaev_level(x, h, c.p);
  const double v = variance_proxy(h, c.v1, c.v2);
  const auto [u, w] = bennett_arguments(x, y, v, h);
  const double lh = log_bennett_h(static_cast<double>(h.n), u, w);
  double lrest;
  if (c.max_tail) {
    lrest = *c.max_tail > 0.0 ? std::log(*c.max_tail) : -kInf;
  } else {
    const double a = c.a1 + static_cast<double>(h.n - 1) * c.a2;
    lrest = a > 0.0 ? std::log(a) - c.p * std::log(y) : -kInf;
  }
  return detail::log_add(lh, lrest);
}

inline double weak_fuk_nagaev_tail(double x, const Horizon& h, const FukNagaevConstants& c) {
  return detail::clamp_prob(fuk_nagaev_log_tail(x, h, c));
}

/// Strong moments of order p >= 2: E G^p <= A1(p), A2(p).
struct FukConstants {
  double v1 = 0.0;
  double v2 = 0.0;
  double p = 3.0;
  double a1 = 0.0;
  double a2 = 0.0;

  void validate() const {
    detail::require_nonneg(v1, "V1");
    detail::require_nonneg(v2, "V2");
    if (!(p >= 2.0)) throw DomainError("Fuk bound needs p >= 2");
    detail::require_nonneg(a1, "A1(p)");
    detail::require_nonneg(a2, "A2(p)");
  }
};

/// A(p) = A1 K_{n-1}^p + A2 sum_{i=2}^n K_{n-i}^p.
inline double fuk_a(const Horizon& h, double p, double a1, double a2) {
  return a1 * std::pow(h.k_last(), p) + a2 * k_rho_power_sum(h.n, h.rho, p);
}

/// log of 2(1+2/p)^p A(p)/x^p + 2 exp(-2x^2/((p+2)^2 e^p V)); bounds P(|S_n| > x).
inline double fuk_log_tail(double x, const Horizon& h, const FukConstants& c) {
  h.validate();
  c.validate();
  if (!(x > 0.0)) {
    if (x == 0.0) return 0.0;
    throw DomainError("x must be > 0");
  }
  const double a = fuk_a(h, c.p, c.a1, c.a2);
  const double v = variance_proxy(h, c.v1, c.v2);
  const double lpoly = a > 0.0 ? std::log(2.0) + c.p * std::log1p(2.0 / c.p) + std::log(a) -
                                     c.p * std::log(x)
                               : -kInf;
  const double lexp = v > 0.0 ? std::log(2.0) - 2.0 * x * x / ((c.p + 2.0) * (c.p + 2.0) *
                                                                std::exp(c.p) * v)
                              : -kInf;
  return detail::log_add(lpoly, lexp);
}

inline double fuk_tail(double x, const Horizon& h, const FukConstants& c) {
  return detail::clamp_prob(fuk_log_tail(x, h, c));
}

// ------------------------------------------------------------ moment bounds

/// Moment constants E G^p <= A1(p), A2(p) (weak moments for weak_vbe).
struct MomentConstants {
  double p = 2.0;
  double a1 = 0.0;
  double a2 = 0.0;

  void validate() const {
    if (!(p >= 1.0)) throw DomainError("moment order p must be >= 1");
    detail::require_nonneg(a1, "A1(p)");
    detail::require_nonneg(a2, "A2(p)");
  }
};

/// (A1 K_{n-1}^p + 2^(2-p) A2 sum_{k=2}^n K_{n-k}^p)^(1/p), p in [1, 2].
inline double vbe_moment(const Horizon& h, const MomentConstants& c) {
  h.validate();
  c.validate();
  if (!(c.p >= 1.0 && c.p <= 2.0)) throw DomainError("von Bahr-Esseen bound needs p in [1, 2]");
  const double a = c.a1 * std::pow(h.k_last(), c.p) +
                   std::pow(2.0, 2.0 - c.p) * c.a2 * k_rho_power_sum(h.n, h.rho, c.p);
  return std::pow(a, 1.0 / c.p);
}

/// C_p = 4p/(p-1) + 8p/(2-p): the truncated part contributes 4p/(p-1), the
/// remainder 8p/(2-p). Both terms are positive on (1, 2).
inline double weak_vbe_constant(double p) {
  if (!(p > 1.0 && p < 2.0)) throw DomainError("weak von Bahr-Esseen needs p in (1, 2)");
  return 4.0 * p / (p - 1.0) + 8.0 * p / (2.0 - p);
}

/// log of C_p B(n, rho, p) / x^p; bounds P(|S_n| > x).
inline double weak_vbe_log_tail(double x, const Horizon& h, const MomentConstants& c) {
  h.validate();
  c.validate();
  const double cp = weak_vbe_constant(c.p);
  if (!(x > 0.0)) {
    if (x == 0.0) return 0.0;
    throw DomainError("x must be > 0");
  }
  const double b = fuk_a(h, c.p, c.a1, c.a2);
  if (b == 0.0) return -kInf;
  return std::log(cp) + std::log(b) - c.p * std::log(x);
}

inline double weak_vbe_tail(double x, const Horizon& h, const MomentConstants& c) {
  return detail::clamp_prob(weak_vbe_log_tail(x, h, c));
}

/// sqrt(K_{n-1}^2 A1^(2/p) + (p-1) A2^(2/p) sum_{k=2}^n K_{n-k}^2), p >= 2.
/// Increments k >= 2 are dominated by G_eps, hence A2 in the second term.
inline double mz_moment(const Horizon& h, const MomentConstants& c) {
  h.validate();
  c.validate();
  if (!(c.p >= 2.0)) throw DomainError("Marcinkiewicz-Zygmund bound needs p >= 2");
  const double kl = h.k_last();
  const double a = kl * kl * std::pow(c.a1, 2.0 / c.p) +
                   (c.p - 1.0) * std::pow(c.a2, 2.0 / c.p) * k_rho_power_sum(h.n, h.rho, 2.0);
  return std::sqrt(a);
}

struct RosenthalConstants {
  double v1 = 0.0;
  double v2 = 0.0;
  double p = 2.0;
  std::optional<double> c;  // grid-minimized over [1, p] when absent
  double maxnorm = 0.0;

  void validate() const {
    detail::require_nonneg(v1, "V1");
    detail::require_nonneg(v2, "V2");
    if (!(p >= 2.0)) throw DomainError("Rosenthal bound needs p >= 2");
    detail::require_nonneg(maxnorm, "maxnorm");
    if (c && !(*c >= 1.0 && *c <= p)) throw DomainError("Rosenthal c must lie in [1, p]");
  }
};

struct RosenthalValue {
  double value = 0.0;
  double c = 1.0;
};

/// 60c sqrt(V) + 120 sqrt(c) e^(p/c) maxnorm at a given c in [1, p].
inline double rosenthal_at(double c, const Horizon& h, const RosenthalConstants& k) {
  if (!(c >= 1.0 && c <= k.p)) throw DomainError("Rosenthal c must lie in [1, p]");
  return 60.0 * c * std::sqrt(variance_proxy(h, k.v1, k.v2)) +
         120.0 * std::sqrt(c) * std::exp(k.p / c) * k.maxnorm;
}

/// Value at the supplied c, or the minimum over 1001 grid points of [1, p].
inline RosenthalValue rosenthal_moment(const Horizon& h, const RosenthalConstants& k) {
  h.validate();
  k.validate();
  if (k.c) return {rosenthal_at(*k.c, h, k), *k.c};
  RosenthalValue best{rosenthal_at(k.p, h, k), k.p};
  constexpr int kGrid = 1000;
  for (int i = 0; i < kGrid; ++i) {
    const double c = 1.0 + (k.p - 1.0) * i / kGrid;
    const double v = rosenthal_at(c, h, k);
    if (v < best.value) best = {v, c};
  }
  return best;
}

// -------------------------------------------------------------- bundles

/// All constant bundles one experiment may supply; absent families are skipped.
struct BoundParams {
  Horizon horizon;
  std::optional<BernsteinConstants> bernstein;
  std::optional<CramerConstants> cramer;
  std::optional<SemiExpConstants> semi_exp;
  std::optional<RioConstants> rio;
  std::optional<HoeffdingConstants> hoeffding;
  std::optional<FukNagaevConstants> fuk_nagaev;
  std::optional<FukConstants> fuk;
  std::optional<MomentConstants> vbe;
  std::optional<MomentConstants> weak_vbe;
  std::optional<MomentConstants> mz;
  std::optional<RosenthalConstants> rosenthal;
  std::optional<LiuWatbledConstants> liu_watbled;
  std::optional<double> subgaussian_c;
};

enum class Sides {
  one_sided,  // bounds P(S_n >= x) and P(-S_n >= x) separately
  two_sided   // bounds P(|S_n| > x)
};

inline const char* to_string(Sides s) { return s == Sides::one_sided ? "one_sided" : "two_sided"; }

/// A tail bound x -> [0, 1] of one family, evaluated in log space.
struct TailBound {
  std::string family;
  Sides sides = Sides::one_sided;
  double x_min = 0.0;
  double x_max = kInf;
  std::function<double(double)> log_value;
  nlohmann::json constants = nlohmann::json::object();
  double scale = 1.0;

  bool applicable(double x) const { return x >= x_min && x <= x_max; }

  /// Clamped bound value; 1 below zero since every x <= 0 is trivial.
  double operator()(double x) const {
    if (x <= 0.0) return 1.0;
    const double lv = log_value(x);
    if (scale == 1.0) return detail::clamp_prob(lv);
    return std::clamp(scale * std::exp(lv), 0.0, 1.0);
  }
};

inline const std::vector<std::string>& all_tail_families() {
  static const std::vector<std::string> names = {
      "bernstein",      "bernstein_weak", "cramer",      "cramer_weak",     "semi_exp",
      "rio",            "rio_closed",     "mcdiarmid",   "hoeffding",       "hoeffding_bennett",
      "hoeffding_b1",   "fuk_nagaev",     "fuk",         "weak_vbe",        "liu_watbled",
      "subgaussian"};
  return names;
}

namespace detail {

inline nlohmann::json horizon_json(const Horizon& h) { return {{"n", h.n}, {"rho", h.rho}}; }

}  // namespace detail

/// One TailBound per family whose constants are present.
inline std::vector<TailBound> tail_bounds(const BoundParams& bp) {
  const Horizon h = bp.horizon;
  h.validate();
  std::vector<TailBound> out;
  const auto add = [&](std::string family, Sides sides, std::function<double(double)> f,
                       nlohmann::json constants) {
    TailBound b;
    b.family = std::move(family);
    b.sides = sides;
    b.log_value = std::move(f);
    constants["horizon"] = detail::horizon_json(h);
    b.constants = std::move(constants);
    out.push_back(std::move(b));
  };
  if (bp.bernstein) {
    const auto s = bernstein_scale(h, *bp.bernstein);
    const nlohmann::json j = {{"V", s.v}, {"delta", s.delta}};
    add("bernstein", Sides::one_sided, [s](double x) { return bernstein_log_tail(x, s.v, s.delta); }, j);
    add("bernstein_weak", Sides::one_sided,
        [s](double x) { return bernstein_log_tail_weak(x, s.v, s.delta); }, j);
  }
  if (bp.cramer) {
    const auto s = cramer_scale(h, *bp.cramer);
    const nlohmann::json j = {{"K", s.k}, {"delta", s.delta}};
    add("cramer", Sides::one_sided, [s](double x) { return cramer_log_tail(x, s.k, s.delta); }, j);
    add("cramer_weak", Sides::one_sided, [s](double x) { return cramer_log_tail_weak(x, s.k, s.delta); }, j);
  }
  if (bp.semi_exp) {
    const auto c = *bp.semi_exp;
    add("semi_exp", Sides::one_sided, [h, c](double x) { return semi_exp_log_tail(x, h, c); },
        {{"K", semi_exp_k(h, c)}, {"split", semi_exp_split(h, c)}, {"p", c.p}});
  }
  if (bp.rio) {
    const auto s = rio_scale(h, *bp.rio);
    const nlohmann::json j = {{"D", s.d}, {"M2", s.m2}};
    add("rio", Sides::one_sided, [s](double x) { return rio_log_tail(x, s); }, j);
    add("rio_closed", Sides::one_sided, [s](double x) { return rio_closed_log_tail(x, s); }, j);
    add("mcdiarmid", Sides::one_sided, [s](double x) { return mcdiarmid_log_tail(x, s); }, j);
  }
  if (bp.hoeffding) {
    const auto c = *bp.hoeffding;
    c.validate();
    const nlohmann::json j = {{"V", variance_proxy(h, c.v1, c.v2)}, {"M", c.m}};
    add("hoeffding", Sides::one_sided, [h, c](double x) { return hoeffding_log_tail(x, h, c); }, j);
    add("hoeffding_bennett", Sides::one_sided,
        [h, c](double x) { return hoeffding_bennett_log_tail(x, h, c); }, j);
    add("hoeffding_b1", Sides::one_sided, [h, c](double x) { return hoeffding_b1_log_tail(x, h, c); }, j);
  }
  if (bp.fuk_nagaev) {
    const auto c = *bp.fuk_nagaev;
    c.validate();
    nlohmann::json j = {{"V", variance_proxy(h, c.v1, c.v2)}, {"p", c.p}};
    if (c.y) j["y"] = *c.y;
    if (c.max_tail) j["max_tail"] = *c.max_tail;
    else j["A"] = c.a1 + static_cast<double>(h.n - 1) * c.a2;
    add("fuk_nagaev", Sides::one_sided, [h, c](double x) { return fuk_nagaev_log_tail(x, h, c); }, j);
  }
  if (bp.fuk) {
    const auto c = *bp.fuk;
    c.validate();
    add("fuk", Sides::two_sided, [h, c](double x) { return fuk_log_tail(x, h, c); },
        {{"V", variance_proxy(h, c.v1, c.v2)}, {"A", fuk_a(h, c.p, c.a1, c.a2)}, {"p", c.p}});
  }
  if (bp.weak_vbe) {
    const auto c = *bp.weak_vbe;
    c.validate();
    add("weak_vbe", Sides::two_sided, [h, c](double x) { return weak_vbe_log_tail(x, h, c); },
        {{"C_p", weak_vbe_constant(c.p)}, {"B", fuk_a(h, c.p, c.a1, c.a2)}, {"p", c.p}});
  }
  if (bp.liu_watbled) {
    const auto c = *bp.liu_watbled;
    c.validate();
    const auto lw = lw_constants(c.a, c.p, h.rho);
    add("liu_watbled", Sides::one_sided, [h, c](double x) { return liu_watbled_log_tail(x, h, c); },
        {{"q", lw.q}, {"tau", lw.tau}, {"a1", lw.a1}, {"x1", c.x1}, {"B", c.b}});
  }
  if (bp.subgaussian_c) {
    const double c = *bp.subgaussian_c;
    detail::require_pos(c, "c");
    add("subgaussian", Sides::one_sided, [h, c](double x) { return subgaussian_log_tail(x, h, c); },
        {{"c", c}});
  }
  return out;
}

/// Keeps the bounds whose family appears in `families` (all when empty).
inline std::vector<TailBound> select_families(std::vector<TailBound> bounds,
                                              const std::vector<std::string>& families) {
  if (families.empty()) return bounds;
  for (const auto& f : families)
    if (std::find(all_tail_families().begin(), all_tail_families().end(), f) ==
        all_tail_families().end())
      throw ConfigError("unknown bound family '" + f + "'");
  std::vector<TailBound> out;
  for (const auto& f : families) {
    bool found = false;
    for (const auto& b : bounds)
      if (b.family == f) {
        out.push_back(b);
        found = true;
      }
    if (!found) throw ConfigError("no constants supplied for bound family '" + f + "'");
  }
  return out;
}

struct EnvelopeValue {
  double value = 1.0;
  std::string family;
};

/// Pointwise minimum over the supplied families applicable at x.
inline EnvelopeValue envelope_tail(double x, const std::vector<TailBound>& bounds) {
  EnvelopeValue out;
  for (const auto& b : bounds) {
    if (!b.applicable(x)) continue;
    const double v = b(x);
    if (out.family.empty() || v < out.value) out = {v, b.family};
  }
  if (out.family.empty()) out.value = 1.0;
  return out;
}

// --------------------------------------------------------------- JSON

namespace detail {

inline void reject_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                        const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

inline double num(const nlohmann::json& j, const char* key, const std::string& where,
                  std::optional<double> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError(where + ": missing '" + key + "'");
  }
  if (!j.at(key).is_number()) throw ConfigError(where + ": '" + key + "' must be a number");
  return j.at(key).get<double>();
}

inline std::optional<double> opt_num(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) return std::nullopt;
  return num(j, key, where);
}

}  // namespace detail

/// Parses {"n", "rho", and any of the family objects}. Unknown keys are rejected.
inline BoundParams bound_params_from_json(const nlohmann::json& j) {
  using detail::num;
  using detail::opt_num;
  detail::reject_keys(j, {"n", "rho", "bernstein", "cramer", "semi_exp", "rio", "hoeffding",
                          "fuk_nagaev", "fuk", "vbe", "weak_vbe", "mz", "rosenthal", "liu_watbled",
                          "subgaussian"},
                      "constants");
  BoundParams bp;
  const double n = num(j, "n", "constants");
  if (!(n >= 1.0) || n != std::floor(n)) throw ConfigError("constants: 'n' must be a positive integer");
  bp.horizon.n = static_cast<std::size_t>(n);
  bp.horizon.rho = num(j, "rho", "constants");
  try {
    bp.horizon.validate();
    if (j.contains("bernstein")) {
      const auto& c = j.at("bernstein");
      detail::reject_keys(c, {"v1", "v2", "m"}, "constants.bernstein");
      bp.bernstein = BernsteinConstants{num(c, "v1", "bernstein", 0.0), num(c, "v2", "bernstein"),
                                        num(c, "m", "bernstein")};
      bp.bernstein->validate();
    }
    if (j.contains("cramer")) {
      const auto& c = j.at("cramer");
      detail::reject_keys(c, {"a", "k1", "k2"}, "constants.cramer");
      bp.cramer = CramerConstants{num(c, "a", "cramer"), num(c, "k1", "cramer", 1.0), num(c, "k2", "cramer")};
      bp.cramer->validate();
    }
    if (j.contains("semi_exp")) {
      const auto& c = j.at("semi_exp");
      detail::reject_keys(c, {"p", "k1", "k2"}, "constants.semi_exp");
      bp.semi_exp = SemiExpConstants{num(c, "p", "semi_exp"), num(c, "k1", "semi_exp"), num(c, "k2", "semi_exp")};
      bp.semi_exp->validate();
    }
    if (j.contains("rio")) {
      const auto& c = j.at("rio");
      detail::reject_keys(c, {"m1", "m", "m_k"}, "constants.rio");
      if (c.contains("m_k")) {
        if (c.contains("m1") || c.contains("m")) throw ConfigError("constants.rio: give either 'm_k' or 'm1'/'m'");
        if (!c.at("m_k").is_array()) throw ConfigError("constants.rio: 'm_k' must be an array");
        bp.rio = RioConstants{c.at("m_k").get<std::vector<double>>()};
      } else {
        const double m = num(c, "m", "rio");
        bp.rio = RioConstants::uniform(bp.horizon.n, num(c, "m1", "rio", m), m);
      }
      bp.rio->validate(bp.horizon.n);
    }
    if (j.contains("hoeffding")) {
      const auto& c = j.at("hoeffding");
      detail::reject_keys(c, {"v1", "v2", "m"}, "constants.hoeffding");
      bp.hoeffding = HoeffdingConstants{num(c, "v1", "hoeffding", 0.0), num(c, "v2", "hoeffding"),
                                        num(c, "m", "hoeffding")};
      bp.hoeffding->validate();
    }
    if (j.contains("fuk_nagaev")) {
      const auto& c = j.at("fuk_nagaev");
      detail::reject_keys(c, {"v1", "v2", "p", "a1", "a2", "y", "max_tail"}, "constants.fuk_nagaev");
      FukNagaevConstants f;
      f.v1 = num(c, "v1", "fuk_nagaev", 0.0);
      f.v2 = num(c, "v2", "fuk_nagaev");
      f.y = opt_num(c, "y", "fuk_nagaev");
      f.max_tail = opt_num(c, "max_tail", "fuk_nagaev");
      if (!f.max_tail) {
        f.p = num(c, "p", "fuk_nagaev");
        f.a1 = num(c, "a1", "fuk_nagaev", 0.0);
        f.a2 = num(c, "a2", "fuk_nagaev");
      }
      f.validate();
      bp.fuk_nagaev = f;
    }
    if (j.contains("fuk")) {
      const auto& c = j.at("fuk");
      detail::reject_keys(c, {"v1", "v2", "p", "a1", "a2"}, "constants.fuk");
      bp.fuk = FukConstants{num(c, "v1", "fuk", 0.0), num(c, "v2", "fuk"), num(c, "p", "fuk"),
                            num(c, "a1", "fuk", 0.0), num(c, "a2", "fuk")};
      bp.fuk->validate();
    }
    for (const char* key : {"vbe", "weak_vbe", "mz"}) {
      if (!j.contains(key)) continue;
      const auto& c = j.at(key);
      detail::reject_keys(c, {"p", "a1", "a2"}, std::string("constants.") + key);
      MomentConstants m{num(c, "p", key), num(c, "a1", key, 0.0), num(c, "a2", key)};
      m.validate();
      if (std::string(key) == "vbe") {
        if (!(m.p >= 1.0 && m.p <= 2.0)) throw DomainError("vbe needs p in [1, 2]");
        bp.vbe = m;
      } else if (std::string(key) == "weak_vbe") {
        weak_vbe_constant(m.p);
        bp.weak_vbe = m;
      } else {
        if (!(m.p >= 2.0)) throw DomainError("mz needs p >= 2");
        bp.mz = m;
      }
    }
    if (j.contains("rosenthal")) {
      const auto& c = j.at("rosenthal");
      detail::reject_keys(c, {"v1", "v2", "p", "c", "maxnorm"}, "constants.rosenthal");
      RosenthalConstants r;
      r.v1 = num(c, "v1", "rosenthal", 0.0);
      r.v2 = num(c, "v2", "rosenthal");
      r.p = num(c, "p", "rosenthal");
      r.c = opt_num(c, "c", "rosenthal");
      r.maxnorm = num(c, "maxnorm", "rosenthal");
      r.validate();
      bp.rosenthal = r;
    }
    if (j.contains("liu_watbled")) {
      const auto& c = j.at("liu_watbled");
      detail::reject_keys(c, {"a", "p", "x1", "b"}, "constants.liu_watbled");
      bp.liu_watbled = LiuWatbledConstants{num(c, "a", "liu_watbled"), num(c, "p", "liu_watbled"),
                                           num(c, "x1", "liu_watbled"), num(c, "b", "liu_watbled")};
      bp.liu_watbled->validate();
    }
    if (j.contains("subgaussian")) {
      const auto& c = j.at("subgaussian");
      detail::reject_keys(c, {"c"}, "constants.subgaussian");
      bp.subgaussian_c = num(c, "c", "subgaussian");
      detail::require_pos(*bp.subgaussian_c, "c");
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("constants: ") + e.what());
  }
  return bp;
}

inline nlohmann::json to_json(const BoundParams& bp) {
  nlohmann::json j = detail::horizon_json(bp.horizon);
  if (bp.bernstein) j["bernstein"] = {{"v1", bp.bernstein->v1}, {"v2", bp.bernstein->v2}, {"m", bp.bernstein->m}};
  if (bp.cramer) j["cramer"] = {{"a", bp.cramer->a}, {"k1", bp.cramer->k1}, {"k2", bp.cramer->k2}};
  if (bp.semi_exp) j["semi_exp"] = {{"p", bp.semi_exp->p}, {"k1", bp.semi_exp->k1}, {"k2", bp.semi_exp->k2}};
  if (bp.rio) j["rio"] = {{"m_k", bp.rio->m}};
  if (bp.hoeffding) j["hoeffding"] = {{"v1", bp.hoeffding->v1}, {"v2", bp.hoeffding->v2}, {"m", bp.hoeffding->m}};
  if (bp.fuk_nagaev) {
    const auto& f = *bp.fuk_nagaev;
    nlohmann::json c = {{"v1", f.v1}, {"v2", f.v2}};
    if (f.y) c["y"] = *f.y;
    if (f.max_tail) {
      c["max_tail"] = *f.max_tail;
    } else {
      c["p"] = f.p;
      c["a1"] = f.a1;
      c["a2"] = f.a2;
    }
    j["fuk_nagaev"] = c;
  }
  if (bp.fuk) j["fuk"] = {{"v1", bp.fuk->v1}, {"v2", bp.fuk->v2}, {"p", bp.fuk->p}, {"a1", bp.fuk->a1}, {"a2", bp.fuk->a2}};
  if (bp.vbe) j["vbe"] = {{"p", bp.vbe->p}, {"a1", bp.vbe->a1}, {"a2", bp.vbe->a2}};
  if (bp.weak_vbe) j["weak_vbe"] = {{"p", bp.weak_vbe->p}, {"a1", bp.weak_vbe->a1}, {"a2", bp.weak_vbe->a2}};
  if (bp.mz) j["mz"] = {{"p", bp.mz->p}, {"a1", bp.mz->a1}, {"a2", bp.mz->a2}};
  if (bp.rosenthal) {
    nlohmann::json c = {{"v1", bp.rosenthal->v1}, {"v2", bp.rosenthal->v2}, {"p", bp.rosenthal->p},
                        {"maxnorm", bp.rosenthal->maxnorm}};
    if (bp.rosenthal->c) c["c"] = *bp.rosenthal->c;
    j["rosenthal"] = c;
  }
  if (bp.liu_watbled)
    j["liu_watbled"] = {{"a", bp.liu_watbled->a}, {"p", bp.liu_watbled->p}, {"x1", bp.liu_watbled->x1},
                        {"b", bp.liu_watbled->b}};
  if (bp.subgaussian_c) j["subgaussian"] = {{"c", *bp.subgaussian_c}};
  return j;
}

}  // namespace irf
