#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "irf/errors.hpp"
#include "irf/rng.hpp"

namespace irf {

namespace detail {

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Adaptive Simpson on [a, b] with absolute tolerance `tol`.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol, int depth = 50) {
  struct Rec {
    const F& f;
    double step(double a, double b, double fa, double fm, double fb, double whole, double tol,
                int depth) const {
      const double m = 0.5 * (a + b);
      const double lm = 0.5 * (a + m);
      const double rm = 0.5 * (m + b);
      const double flm = f(lm);
      const double frm = f(rm);
      const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
      const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
      const double delta = left + right - whole;
      if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
      return step(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
             step(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    }
  };
  if (!(b > a)) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return Rec{f}.step(a, b, fa, fm, fb, whole, tol, depth);
}

}  // namespace detail

/// Cumulative distribution function of a law on the real line.
///
/// Uniform, normal and finite step CDFs carry closed-form primitives, so
/// integrals of |c - F| are exact up to rounding. A generic CDF must declare a
/// bounded support and is integrated by adaptive Simpson (abs. tol 1e-10).
class ScalarCdf {
 public:
  enum class Kind { uniform, normal, step, generic };

  static ScalarCdf uniform(double a, double b) {
    if (!(b > a)) throw DomainError("uniform CDF needs a < b");
    ScalarCdf c(Kind::uniform);
    c.p0_ = a;
    c.p1_ = b;
    return c;
  }

  static ScalarCdf normal(double mean, double sd) {
    if (sd == 0.0) return step({mean}, {1.0});
    if (!(sd > 0.0)) throw DomainError("normal CDF needs sd > 0");
    ScalarCdf c(Kind::normal);
    c.p0_ = mean;
    c.p1_ = sd;
    return c;
  }

  /// Atoms need not be sorted; weights are normalized to total mass 1.
  static ScalarCdf step(std::vector<double> atoms, std::vector<double> weights) {
    if (atoms.empty() || atoms.size() != weights.size())
      throw DomainError("step CDF needs matching non-empty atoms and weights");
    std::vector<std::size_t> order(atoms.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return atoms[i] < atoms[j]; });
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw DomainError("step CDF weights must be nonnegative");
      total += w;
    }
    if (!(total > 0.0)) throw DomainError("step CDF needs positive total mass");
    ScalarCdf c(Kind::step);
    for (std::size_t i : order) {
      if (!c.atoms_.empty() && c.atoms_.back() == atoms[i]) {
        c.weights_.back() += weights[i] / total;
      } else {
        c.atoms_.push_back(atoms[i]);
        c.weights_.push_back(weights[i] / total);
      }
    }
    return c;
  }

  static ScalarCdf generic(std::function<double(double)> f, double lo, double hi) {
    if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
      throw DomainError("generic CDF needs a finite support [lo, hi]");
    ScalarCdf c(Kind::generic);
    c.fn_ = std::move(f);
    c.p0_ = lo;
    c.p1_ = hi;
    return c;
  }

  Kind kind() const { return kind_; }

  double operator()(double t) const {
    switch (kind_) {
      case Kind::uniform:
        return std::clamp((t - p0_) / (p1_ - p0_), 0.0, 1.0);
      case Kind::normal:
        return detail::normal_cdf((t - p0_) / p1_);
      case Kind::step: {
        double acc = 0.0;
        for (std::size_t i = 0; i < atoms_.size() && atoms_[i] <= t; ++i) acc += weights_[i];
        return std::min(acc, 1.0);
      }
      case Kind::generic:
        if (t < p0_) return 0.0;
        if (t >= p1_) return 1.0;
        return std::clamp(fn_(t), 0.0, 1.0);
    }
    return 0.0;
  }

  /// Integral of F over (-inf, t].
  double lower_integral(double t) const {
    switch (kind_) {
      case Kind::uniform: {
        const double w = p1_ - p0_;
        if (t <= p0_) return 0.0;
        if (t >= p1_) return (t - p1_) + 0.5 * w;
        return (t - p0_) * (t - p0_) / (2.0 * w);
      }
      case Kind::normal: {
        const double z = (t - p0_) / p1_;
        return p1_ * (z * detail::normal_cdf(z) + detail::normal_pdf(z));
      }
      case Kind::step: {
        double acc = 0.0;
        for (std::size_t i = 0; i < atoms_.size() && atoms_[i] < t; ++i)
          acc += weights_[i] * (t - atoms_[i]);
        return acc;
      }
      case Kind::generic: {
        if (t <= p0_) return 0.0;
        const double hi = std::min(t, p1_);
        return detail::adaptive_simpson(*this, p0_, hi, kTol) + std::max(0.0, t - p1_);
      }
    }
    return 0.0;
  }

  /// Integral of 1 - F over [t, +inf).
  double upper_integral(double t) const {
    switch (kind_) {
      case Kind::uniform: {
        const double w = p1_ - p0_;
        if (t >= p1_) return 0.0;
        if (t <= p0_) return (p0_ - t) + 0.5 * w;
        return (p1_ - t) * (p1_ - t) / (2.0 * w);
      }
      case Kind::normal: {
        const double z = (t - p0_) / p1_;
        return p1_ * (detail::normal_pdf(z) - z * detail::normal_cdf(-z));
      }
      case Kind::step: {
        double acc = 0.0;
        for (std::size_t i = 0; i < atoms_.size(); ++i)
          if (atoms_[i] > t) acc += weights_[i] * (atoms_[i] - t);
        return acc;
      }
      case Kind::generic: {
        if (t >= p1_) return 0.0;
        const double lo = std::max(t, p0_);
        const auto survival = [this](double s) { return 1.0 - (*this)(s); };
        return detail::adaptive_simpson(survival, lo, p1_, kTol) + std::max(0.0, p0_ - t);
      }
    }
    return 0.0;
  }

  /// Integral over [a, b] of |level - F(t)|.
  double abs_diff_integral(double level, double a, double b) const {
    if (!(b > a)) return 0.0;
    const double cross = crossing(level, a, b);
    if (kind_ == Kind::generic) {
      const auto below = [&](double s) { return level - (*this)(s); };
      const auto above = [&](double s) { return (*this)(s) - level; };
      return detail::adaptive_simpson(below, a, cross, kTol) +
             detail::adaptive_simpson(above, cross, b, kTol);
    }
    // F < level on [a, cross), F >= level on [cross, b].
    const double ia = lower_integral(a);
    const double ic = lower_integral(cross);
    const double ib = lower_integral(b);
    const double left = level * (cross - a) - (ic - ia);
    const double right = (ib - ic) - level * (b - cross);
    return std::max(0.0, left) + std::max(0.0, right);
  }

  const std::vector<double>& atoms() const { return atoms_; }
  const std::vector<double>& weights() const { return weights_; }

  nlohmann::json describe() const {
    switch (kind_) {
      case Kind::uniform:
        return {{"cdf", "uniform"}, {"a", p0_}, {"b", p1_}};
      case Kind::normal:
        return {{"cdf", "normal"}, {"mean", p0_}, {"sd", p1_}};
      case Kind::step:
        return {{"cdf", "step"}, {"atoms", atoms_}, {"weights", weights_}};
      case Kind::generic:
        return {{"cdf", "generic"}, {"lo", p0_}, {"hi", p1_}};
    }
    return {};
  }

 private:
  static constexpr double kTol = 1e-10;

  explicit ScalarCdf(Kind k) : kind_(k) {}

  /// Smallest t in [a, b] with F(t) >= level (b if none).
  double crossing(double level, double a, double b) const {
    if ((*this)(a) >= level) return a;
    if ((*this)(b) < level) return b;
    if (kind_ == Kind::step) {
      double acc = 0.0;
      for (std::size_t i = 0; i < atoms_.size(); ++i) {
        acc += weights_[i];
        if (acc >= level && atoms_[i] >= a) return std::min(atoms_[i], b);
      }
      return b;
    }
    if (kind_ == Kind::uniform) return std::clamp(p0_ + level * (p1_ - p0_), a, b);
    double lo = a;
    double hi = b;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo) + std::abs(hi)); ++it) {
      const double mid = 0.5 * (lo + hi);
      ((*this)(mid) >= level ? hi : lo) = mid;
    }
    return hi;
  }

  Kind kind_;
  double p0_ = 0.0;
  double p1_ = 0.0;
  std::vector<double> atoms_;
  std::vector<double> weights_;
  std::function<double(double)> fn_;
};

/// A law on the real line with the closed forms the dominating-variable
/// calculations can use.
struct ScalarLaw {
  std::string name;
  std::function<double(Stream&)> sample;
  ScalarCdf cdf = ScalarCdf::uniform(0.0, 1.0);
  /// y -> E|y - Y|.
  std::function<double(double)> mean_abs_dev;
  /// Finite support (value, probability) when the law is discrete.
  std::vector<std::pair<double, double>> atoms;
  nlohmann::json params = nlohmann::json::object();

  static ScalarLaw uniform(double a, double b) {
    if (!(b > a)) throw DomainError("uniform law needs a < b");
    ScalarLaw law;
    law.name = "uniform";
    law.sample = [a, b](Stream& s) { return s.uniform(a, b); };
    law.cdf = ScalarCdf::uniform(a, b);
    law.mean_abs_dev = [a, b](double y) {
      if (y <= a) return 0.5 * (a + b) - y;
      if (y >= b) return y - 0.5 * (a + b);
      return ((y - a) * (y - a) + (b - y) * (b - y)) / (2.0 * (b - a));
    };
    law.params = {{"law", "uniform"}, {"a", a}, {"b", b}};
    return law;
  }

  static ScalarLaw normal(double mean, double sd) {
    if (sd == 0.0) return degenerate(mean);
    if (!(sd > 0.0)) throw DomainError("normal law needs sd >= 0");
    ScalarLaw law;
    law.name = "normal";
    law.sample = [mean, sd](Stream& s) { return mean + sd * s.normal(); };
    law.cdf = ScalarCdf::normal(mean, sd);
    // Folded-normal mean: E|y - Y| = sd * (2 phi(z) + z (2 Phi(z) - 1)).
    law.mean_abs_dev = [mean, sd](double y) {
      const double z = (y - mean) / sd;
      return sd * (2.0 * detail::normal_pdf(z) + z * (2.0 * detail::normal_cdf(z) - 1.0));
    };
    law.params = {{"law", "normal"}, {"mean", mean}, {"sd", sd}};
    return law;
  }

  static ScalarLaw bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("bernoulli law needs p in [0, 1]");
    ScalarLaw law;
    law.name = "bernoulli";
    law.sample = [p](Stream& s) { return s.bernoulli(p) ? 1.0 : 0.0; };
    law.cdf = ScalarCdf::step({0.0, 1.0}, {1.0 - p, p});
    law.mean_abs_dev = [p](double y) { return (1.0 - p) * std::abs(y) + p * std::abs(y - 1.0); };
    law.atoms = {{0.0, 1.0 - p}, {1.0, p}};
    law.params = {{"law", "bernoulli"}, {"p", p}};
    return law;
  }

  static ScalarLaw degenerate(double c) {
    ScalarLaw law;
    law.name = "degenerate";
    law.sample = [c](Stream&) { return c; };
    law.cdf = ScalarCdf::step({c}, {1.0});
    law.mean_abs_dev = [c](double y) { return std::abs(y - c); };
    law.atoms = {{c, 1.0}};
    law.params = {{"law", "degenerate"}, {"value", c}};
    return law;
  }
};

}  // namespace irf
