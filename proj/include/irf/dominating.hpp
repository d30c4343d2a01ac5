#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "irf/chain_models.hpp"
#include "irf/errors.hpp"
#include "irf/parallel.hpp"
#include "irf/rng.hpp"

namespace irf {

namespace detail {

// Stream tags keep nested estimators on disjoint key spaces.
inline constexpr std::uint64_t kTagGEps = 0x67657073;     // "geps"
inline constexpr std::uint64_t kTagHEps = 0x68657073;     // "heps"
inline constexpr std::uint64_t kTagGX1 = 0x67783131;      // "gx11"
inline constexpr std::uint64_t kTagOuter = 0x6f757472;    // "outr"
inline constexpr std::uint64_t kTagStation = 0x73746174;  // "stat"

}  // namespace detail

/// G_eps(y) = integral of C delta(y, y') P_eps(dy').
///
/// Exact when the noise law is discrete or carries a closed form for the mean
/// distance; otherwise averages `inner_samples` fresh draws.
inline double g_eps(const ChainModel& model, const Noise& y, std::size_t inner_samples,
                    std::uint64_t seed) {
  if (inner_samples < 1) throw DomainError("inner_samples must be >= 1");
  if (!model.noise.atoms.empty()) {
    double acc = 0.0;
    for (const auto& a : model.noise.atoms) acc += a.weight * model.noise_metric(y, a.point);
    return model.c_const * acc;
  }
  if (model.noise.mean_distance) return model.c_const * model.noise.mean_distance(y);
  Stream s(seed, {detail::kTagGEps});
  double acc = 0.0;
  for (std::size_t j = 0; j < inner_samples; ++j)
    acc += model.noise_metric(y, model.noise.sample(s));
  return model.c_const * acc / static_cast<double>(inner_samples);
}

/// H_eps(x, y) = integral of d(F(x, y), F(x, y')) P_eps(dy').
inline double h_eps(const ChainModel& model, const State& x, const Noise& y,
                    std::size_t inner_samples, std::uint64_t seed) {
  if (inner_samples < 1) throw DomainError("inner_samples must be >= 1");
  const State fy = model.step(x, y);
  if (!model.noise.atoms.empty()) {
    double acc = 0.0;
    for (const auto& a : model.noise.atoms) acc += a.weight * model.metric(fy, model.step(x, a.point));
    return acc;
  }
  Stream s(seed, {detail::kTagHEps});
  double acc = 0.0;
  for (std::size_t j = 0; j < inner_samples; ++j)
    acc += model.metric(fy, model.step(x, model.noise.sample(s)));
  return acc / static_cast<double>(inner_samples);
}

struct SharedDomination {
  double h = 0.0;
  double g = 0.0;
};

/// H_eps(x, y) and the Monte Carlo G_eps(y) averaged over the same draws y'.
/// Each summand obeys d(F(x,y), F(x,y')) <= C delta(y, y'), so h <= g holds
/// without statistical slack.
inline SharedDomination h_and_g_eps_shared(const ChainModel& model, const State& x,
                                           const Noise& y, std::size_t inner_samples,
                                           std::uint64_t seed) {
  if (inner_samples < 1) throw DomainError("inner_samples must be >= 1");
  const State fy = model.step(x, y);
  Stream s(seed, {detail::kTagHEps});
  SharedDomination out;
  for (std::size_t j = 0; j < inner_samples; ++j) {
    const Noise yp = model.noise.sample(s);
    out.h += model.metric(fy, model.step(x, yp));
    out.g += model.c_const * model.noise_metric(y, yp);
  }
  out.h /= static_cast<double>(inner_samples);
  out.g /= static_cast<double>(inner_samples);
  return out;
}

/// G_{X1}(x) = integral of d(x, x') P_{X1}(dx'); 0 for a fixed start at x.
inline double g_x1(const ChainModel& model, const State& x, std::size_t inner_samples,
                   std::uint64_t seed) {
  if (inner_samples < 1) throw DomainError("inner_samples must be >= 1");
  if (!model.initial.atoms.empty()) {
    double acc = 0.0;
    for (const auto& a : model.initial.atoms) acc += a.weight * model.metric(x, a.point);
    return acc;
  }
  if (model.initial.mean_distance) return model.initial.mean_distance(x);
  Stream s(seed, {detail::kTagGX1});
  double acc = 0.0;
  for (std::size_t j = 0; j < inner_samples; ++j)
    acc += model.metric(x, model.initial.sample(s));
  return acc / static_cast<double>(inner_samples);
}

struct LaplaceEstimate {
  double value = 1.0;
  /// Largest single summand's share of the empirical sum.
  double max_share = 0.0;
  bool fragile = false;
};

/// Empirical moment statistics of one nonnegative sample.
struct SampleSummary {
  std::map<double, double> moments;       // p -> mean of z^p
  std::map<double, double> weak_moments;  // p -> sup_x x^p P_N(z > x)
  std::map<double, LaplaceEstimate> laplace;
  std::size_t size = 0;
  double max_value = 0.0;
};

/// Plug-in estimates for the dominating variables G_{X1}(X1) and G_eps(eps).
struct DominatingStats {
  SampleSummary x1;
  SampleSummary eps;
  std::size_t inner_samples = 0;
  std::uint64_t seed = 0;
  /// Raw samples; kept in memory only.
  std::vector<double> samples_x1;
  std::vector<double> samples_eps;
};

/// Share above which one summand is said to dominate an empirical MGF.
inline constexpr double kLaplaceFragileShare = 0.5;

/// Empirical E[exp(a z)] with the single-summand dominance diagnostic.
inline LaplaceEstimate empirical_laplace(const std::vector<double>& z, double a) {
  LaplaceEstimate out;
  if (z.empty()) return out;
  double top = -std::numeric_limits<double>::infinity();
  for (double v : z) top = std::max(top, a * v);
  double sum = 0.0;
  for (double v : z) sum += std::exp(a * v - top);
  out.value = std::exp(top + std::log(sum / static_cast<double>(z.size())));
  out.max_share = 1.0 / sum;
  out.fragile = out.max_share > kLaplaceFragileShare;
  return out;
}

inline double empirical_moment(const std::vector<double>& z, double p) {
  if (z.empty()) return 0.0;
  double acc = 0.0;
  for (double v : z) acc += std::pow(std::abs(v), p);
  return acc / static_cast<double>(z.size());
}

/// sup over x > 0 of x^p P_N(|Z| > x). For the empirical law the supremum is
/// approached as x rises to an order statistic z_(i), where the tail mass is
/// #{z >= z_(i)} / N.
inline double empirical_weak_moment(std::vector<double> z, double p) {
  if (z.empty()) return 0.0;
  for (double& v : z) v = std::abs(v);
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double best = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (i > 0 && z[i] == z[i - 1]) continue;
    best = std::max(best, std::pow(z[i], p) * (n - static_cast<double>(i)) / n);
  }
  return best;
}

inline SampleSummary summarize(const std::vector<double>& z, const std::vector<double>& p_list,
                               const std::vector<double>& a_list) {
  SampleSummary s;
  s.size = z.size();
  for (double v : z) s.max_value = std::max(s.max_value, v);
  for (double p : p_list) {
    s.moments[p] = empirical_moment(z, p);
    s.weak_moments[p] = empirical_weak_moment(z, p);
  }
  for (double a : a_list) s.laplace[a] = empirical_laplace(z, a);
  return s;
}

/// Nested Monte Carlo: outer draws X1 and eps, inner averages for G when no
/// closed form exists. Outer sample i uses stream (seed, outer, i).
inline DominatingStats estimate_stats(const ChainModel& model, const std::vector<double>& p_list,
                                      const std::vector<double>& a_list, std::size_t outer_samples,
                                      std::size_t inner_samples, std::uint64_t seed,
                                      unsigned threads = 0) {
  for (double p : p_list)
    if (!(p >= 1.0)) throw DomainError("moment orders must be >= 1");
  for (double a : a_list)
    if (!(a > 0.0)) throw DomainError("Laplace parameters must be > 0");
  if (outer_samples < 1 || inner_samples < 1) throw DomainError("sample sizes must be >= 1");
  DominatingStats st;
  st.inner_samples = inner_samples;
  st.seed = seed;
  st.samples_x1.resize(outer_samples);
  st.samples_eps.resize(outer_samples);
  parallel_for(outer_samples, threads, [&](std::size_t i) {
    Stream s(seed, {detail::kTagOuter, i});
    const State x1 = model.initial.sample(s);
    const Noise e = model.noise.sample(s);
    const std::uint64_t inner_seed = derive_seed(seed, {detail::kTagOuter, i});
    st.samples_x1[i] = g_x1(model, x1, inner_samples, inner_seed);
    st.samples_eps[i] = g_eps(model, e, inner_samples, inner_seed);
  });
  st.x1 = summarize(st.samples_x1, p_list, a_list);
  st.eps = summarize(st.samples_eps, p_list, a_list);
  return st;
}

namespace detail {

inline nlohmann::json summary_to_json(const SampleSummary& s) {
  nlohmann::json j;
  j["size"] = s.size;
  j["max_value"] = s.max_value;
  j["moments"] = nlohmann::json::array();
  for (const auto& [p, v] : s.moments) j["moments"].push_back({{"p", p}, {"value", v}});
  j["weak_moments"] = nlohmann::json::array();
  for (const auto& [p, v] : s.weak_moments) j["weak_moments"].push_back({{"p", p}, {"value", v}});
  j["laplace"] = nlohmann::json::array();
  for (const auto& [a, e] : s.laplace)
    j["laplace"].push_back(
        {{"a", a}, {"value", e.value}, {"max_share", e.max_share}, {"fragile", e.fragile}});
  return j;
}

inline SampleSummary summary_from_json(const nlohmann::json& j) {
  SampleSummary s;
  s.size = j.at("size").get<std::size_t>();
  s.max_value = j.at("max_value").get<double>();
  for (const auto& e : j.at("moments")) s.moments[e.at("p").get<double>()] = e.at("value").get<double>();
  for (const auto& e : j.at("weak_moments"))
    s.weak_moments[e.at("p").get<double>()] = e.at("value").get<double>();
  for (const auto& e : j.at("laplace")) {
    LaplaceEstimate l;
    l.value = e.at("value").get<double>();
    l.max_share = e.at("max_share").get<double>();
    l.fragile = e.at("fragile").get<bool>();
    s.laplace[e.at("a").get<double>()] = l;
  }
  return s;
}

}  // namespace detail

inline nlohmann::json to_json(const DominatingStats& st) {
  return {{"x1", detail::summary_to_json(st.x1)},
          {"eps", detail::summary_to_json(st.eps)},
          {"inner_samples", st.inner_samples},
          {"seed", st.seed}};
}

inline DominatingStats dominating_stats_from_json(const nlohmann::json& j) {
  try {
    DominatingStats st;
    st.x1 = detail::summary_from_json(j.at("x1"));
    st.eps = detail::summary_from_json(j.at("eps"));
    st.inner_samples = j.at("inner_samples").get<std::size_t>();
    st.seed = j.at("seed").get<std::uint64_t>();
    return st;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("dominating stats: ") + e.what());
  }
}

struct BernsteinFit {
  double v = 0.0;
  double m = 0.0;
};

/// Geometric grid for the Bernstein scale M: 1.05^j for |j| <= 567,
/// i.e. roughly 1e-12 .. 1e12.
inline constexpr double kBernsteinGridRatio = 1.05;
inline constexpr int kBernsteinGridSpan = 567;

/// Smallest grid M with m_k <= (k!/2) V M^(k-2) for k = 2..k_max, V = m_2.
inline BernsteinFit bernstein_fit(const std::vector<double>& samples, int k_max,
                                  std::size_t min_samples = 1000) {
  if (k_max < 3) throw DomainError("bernstein_fit needs k_max >= 3");
  if (samples.size() < min_samples) throw DomainError("bernstein_fit needs more samples");
  std::vector<double> m(static_cast<std::size_t>(k_max) + 1, 0.0);
  for (int k = 2; k <= k_max; ++k) {
    m[k] = empirical_moment(samples, k);
    if (!std::isfinite(m[k])) throw HeavyTailError("empirical moment of order " + std::to_string(k) + " is not finite");
  }
  const auto grid = [](int j) { return std::pow(kBernsteinGridRatio, j); };
  BernsteinFit fit;
  fit.v = m[2];
  if (fit.v == 0.0) {
    fit.m = grid(-kBernsteinGridSpan);
    return fit;
  }
  const auto feasible = [&](double M) {
    double kfact = 2.0;
    for (int k = 3; k <= k_max; ++k) {
      kfact *= k;
      if (m[k] > 0.5 * kfact * fit.v * std::pow(M, k - 2)) return false;
    }
    return true;
  };
  // The constraints are monotone in M, so the smallest feasible grid point is
  // found by locating the continuous threshold and stepping up.
  double need = 0.0;
  double kfact = 2.0;
  for (int k = 3; k <= k_max; ++k) {
    kfact *= k;
    need = std::max(need, std::pow(m[k] / (0.5 * kfact * fit.v), 1.0 / (k - 2)));
  }
  int j = need > 0.0 ? static_cast<int>(std::floor(std::log(need) / std::log(kBernsteinGridRatio))) - 1
                     : -kBernsteinGridSpan;
  j = std::max(j, -kBernsteinGridSpan);
  while (j <= kBernsteinGridSpan && !feasible(grid(j))) ++j;
  if (j > kBernsteinGridSpan)
    throw HeavyTailError("no Bernstein scale M on the grid fits the sample; use a weak-moment bound");
  fit.m = grid(j);
  return fit;
}

struct CramerTransfer {
  double k1 = 1.0;
  double k2 = 1.0;
};

/// From E exp(a C delta(eps, y0)) <= A and drift = d(F(x0, y0), x0), constants
/// valid under a stationary start: K2 = A^2, K1 = A^(2/(1-rho)) exp(2a drift/(1-rho)).
inline CramerTransfer stationary_transfer_cramer(double a_y0, double rho, double a, double drift) {
  if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("rho must lie in [0, 1)");
  if (!(a_y0 >= 1.0)) throw DomainError("A(y0) must be >= 1");
  if (!(drift >= 0.0)) throw DomainError("drift must be >= 0");
  if (!(a > 0.0)) throw DomainError("a must be > 0");
  CramerTransfer t;
  t.k2 = a_y0 * a_y0;
  t.k1 = std::exp((2.0 * std::log(a_y0) + 2.0 * a * drift) / (1.0 - rho));
  return t;
}

struct BernsteinTransfer {
  double v1 = 0.0;
  double v2 = 0.0;
  double m = 0.0;
};

/// From E[(C delta(eps, y0))^k] <= (k!/2) A B^(k-2) and a fixed pair
/// d(F(x0, y0), x0) = 0: V1 = 4A/(1-rho)^2, V2 = 4A, M = 2B/(1-rho).
inline BernsteinTransfer stationary_transfer_bernstein(double a_y0, double b_y0, double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("rho must lie in [0, 1)");
  if (!(a_y0 > 0.0 && b_y0 > 0.0)) throw DomainError("A(y0) and B(y0) must be > 0");
  const double r = 1.0 - rho;
  return {4.0 * a_y0 / (r * r), 4.0 * a_y0, 2.0 * b_y0 / r};
}

struct StationaryMomentBound {
  double bound = 0.0;
  double bound_se = 0.0;
  double direct = 0.0;
  double direct_se = 0.0;
  std::size_t series_terms = 0;
  bool truncated = false;
};

/// Monte Carlo comparison of E[H(d(X, x0))] under the stationary law with
/// E[H(sum_i rho^i (d(F(x0,y0), x0) + C delta(eps_{i+1}, y0)))], the series
/// cut once rho^i < 1e-12.
inline StationaryMomentBound stationary_moment_bound(const ChainModel& model,
                                                     const std::function<double(double)>& h,
                                                     const State& x0, const Noise& y0,
                                                     std::size_t samples, std::uint64_t seed) {
  if (!model.stationary) throw ConfigError("stationary law unknown for this model");
  if (samples < 2) throw DomainError("samples must be >= 2");
  StationaryMomentBound out;
  std::size_t terms = 1;
  if (model.rho > 0.0) {
    double w = 1.0;
    while (w * model.rho >= 1e-12) {
      w *= model.rho;
      ++terms;
    }
    out.truncated = true;
  }
  out.series_terms = terms;
  const double drift = model.metric(model.step(x0, y0), x0);
  double mb = 0.0, sb = 0.0, md = 0.0, sd = 0.0;
  for (std::size_t r = 0; r < samples; ++r) {
    Stream s(seed, {detail::kTagStation, r});
    double series = 0.0;
    double w = 1.0;
    for (std::size_t i = 0; i < terms; ++i) {
      series += w * (drift + model.c_const * model.noise_metric(model.noise.sample(s), y0));
      w *= model.rho;
    }
    const double hb = h(series);
    const double hd = h(model.metric(model.stationary->sample(s), x0));
    const double k = static_cast<double>(r + 1);
    const double db = hb - mb;
    mb += db / k;
    sb += db * (hb - mb);
    const double dd = hd - md;
    md += dd / k;
    sd += dd * (hd - md);
  }
  const double n = static_cast<double>(samples);
  out.bound = mb;
  out.bound_se = std::sqrt(sb / (n - 1.0) / n);
  out.direct = md;
  out.direct_se = std::sqrt(sd / (n - 1.0) / n);
  return out;
}

}  // namespace irf
