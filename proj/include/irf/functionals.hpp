#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "irf/chain_models.hpp"
#include "irf/errors.hpp"
#include "irf/laws.hpp"
#include "irf/rng.hpp"

namespace irf {

/// Exact W1 between the empirical law of `sorted` and the law with CDF `cdf`:
/// the integral of |F_n - F|, split at the order statistics.
inline double w1_empirical_vs_cdf(const std::vector<double>& sorted, const ScalarCdf& cdf) {
  if (sorted.empty()) throw DomainError("w1 needs at least one sample");
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (!(sorted[i - 1] <= sorted[i])) throw DomainError("w1 samples must be sorted");
  const double n = static_cast<double>(sorted.size());
  double acc = cdf.lower_integral(sorted.front()) + cdf.upper_integral(sorted.back());
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] == sorted[i - 1]) continue;
    acc += cdf.abs_diff_integral(static_cast<double>(i) / n, sorted[i - 1], sorted[i]);
  }
  return acc;
}

/// Exact W1 between two empirical laws (integral of |F_n - G_m| over the
/// merged breakpoints, i.e. the quantile coupling).
inline double w1_empirical_vs_empirical(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw DomainError("w1 needs non-empty samples");
  for (std::size_t i = 1; i < a.size(); ++i)
    if (!(a[i - 1] <= a[i])) throw DomainError("w1 samples must be sorted");
  for (std::size_t i = 1; i < b.size(); ++i)
    if (!(b[i - 1] <= b[i])) throw DomainError("w1 samples must be sorted");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double prev = std::min(a.front(), b.front());
  double acc = 0.0;
  while (i < a.size() || j < b.size()) {
    const double next = j >= b.size() || (i < a.size() && a[i] <= b[j]) ? a[i] : b[j];
    acc += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - prev);
    while (i < a.size() && a[i] == next) ++i;
    while (j < b.size() && b[j] == next) ++j;
    prev = next;
  }
  return acc;
}

/// Exact optimal transport cost between two finite measures by min-cost flow
/// (successive shortest paths). Test oracle; capped at 8 atoms per side.
inline double w1_discrete_oracle(const std::vector<WeightedPoint>& mu, const std::vector<WeightedPoint>& nu,
                                 const Metric& metric = euclidean_metric) {
  constexpr std::size_t kMaxAtoms = 8;
  if (mu.size() > kMaxAtoms || nu.size() > kMaxAtoms)
    throw DomainError("w1_discrete_oracle accepts at most 8 atoms per measure");
  if (mu.empty() || nu.empty()) throw DomainError("w1_discrete_oracle needs non-empty measures");
  double total_mu = 0.0, total_nu = 0.0;
  for (const auto& p : mu) total_mu += p.weight;
  for (const auto& p : nu) total_nu += p.weight;
  if (!(total_mu > 0.0) || std::abs(total_mu - total_nu) > 1e-9 * total_mu)
    throw DomainError("w1_discrete_oracle needs measures of equal positive mass");

  // Nodes: source, mu atoms, nu atoms, sink.
  const std::size_t m = mu.size(), k = nu.size();
  const std::size_t nodes = m + k + 2, src = 0, sink = m + k + 1;
  struct Edge {
    std::size_t to;
    double cap;
    double cost;
    std::size_t rev;
  };
  std::vector<std::vector<Edge>> g(nodes);
  const auto add_edge = [&](std::size_t u, std::size_t v, double cap, double cost) {
    g[u].push_back({v, cap, cost, g[v].size()});
    g[v].push_back({u, 0.0, -cost, g[u].size() - 1});
  };
  for (std::size_t i = 0; i < m; ++i) add_edge(src, 1 + i, mu[i].weight / total_mu, 0.0);
  for (std::size_t j = 0; j < k; ++j) add_edge(1 + m + j, sink, nu[j].weight / total_nu, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j)
      add_edge(1 + i, 1 + m + j, std::numeric_limits<double>::infinity(), metric(mu[i].point, nu[j].point));

  constexpr double kEps = 1e-15;
  double cost = 0.0;
  for (int iter = 0; iter < 10000; ++iter) {
    std::vector<double> dist(nodes, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> prev_node(nodes, nodes), prev_edge(nodes, 0);
    dist[src] = 0.0;
    for (std::size_t round = 0; round + 1 < nodes; ++round) {
      bool changed = false;
      for (std::size_t u = 0; u < nodes; ++u) {
        if (dist[u] == std::numeric_limits<double>::infinity()) continue;
        for (std::size_t e = 0; e < g[u].size(); ++e) {
          const Edge& ed = g[u][e];
          if (ed.cap > kEps && dist[u] + ed.cost < dist[ed.to] - 1e-15) {
            dist[ed.to] = dist[u] + ed.cost;
            prev_node[ed.to] = u;
            prev_edge[ed.to] = e;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (dist[sink] == std::numeric_limits<double>::infinity()) break;
    double push = std::numeric_limits<double>::infinity();
    for (std::size_t v = sink; v != src; v = prev_node[v]) push = std::min(push, g[prev_node[v]][prev_edge[v]].cap);
    for (std::size_t v = sink; v != src; v = prev_node[v]) {
      Edge& ed = g[prev_node[v]][prev_edge[v]];
      ed.cap -= push;
      g[v][ed.rev].cap += push;
    }
    cost += push * dist[sink];
  }
  return cost * total_mu;
}

/// A separately Lipschitz functional f(X_1, ..., X_n), normalized so each
/// coordinate has Lipschitz constant at most 1.
struct Functional {
  enum class Kind { additive, w1, w1_reference, custom };

  Kind kind = Kind::additive;
  std::string name = "additive:identity";
  /// Scalar map for additive functionals (applied to the first coordinate).
  std::function<double(double)> g;
  /// Custom map with its declared per-coordinate Lipschitz constant.
  std::function<double(const std::vector<State>&)> custom;
  double declared_lipschitz = 1.0;
  /// Sorted reference sample standing in for an unknown invariant law.
  std::shared_ptr<const std::vector<double>> reference;

  static Functional additive(const std::string& g_name) {
    Functional f;
    f.kind = Kind::additive;
    f.name = "additive:" + g_name;
    if (g_name == "identity") f.g = [](double x) { return x; };
    else if (g_name == "abs") f.g = [](double x) { return std::abs(x); };
    else if (g_name == "clip01") f.g = [](double x) { return std::clamp(x, 0.0, 1.0); };
    else throw ConfigError("functional: unknown additive map '" + g_name + "'");
    return f;
  }

  /// n W1(mu_n, mu) against the model's invariant CDF.
  static Functional w1() {
    Functional f;
    f.kind = Kind::w1;
    f.name = "w1";
    return f;
  }

  /// n W1(mu_n, nu_ref) against a frozen reference sample; an approximation
  /// when the invariant law has no known CDF.
  static Functional w1_reference(std::vector<double> reference) {
    if (reference.empty()) throw DomainError("reference sample must be non-empty");
    std::sort(reference.begin(), reference.end());
    Functional f;
    f.kind = Kind::w1_reference;
    f.name = "w1_reference";
    f.reference = std::make_shared<const std::vector<double>>(std::move(reference));
    return f;
  }

  static Functional custom_map(std::string name, std::function<double(const std::vector<State>&)> fn,
                               double declared_lipschitz) {
    if (!(declared_lipschitz > 0.0 && declared_lipschitz <= 1.0))
      throw DomainError("declared Lipschitz constant must lie in (0, 1]");
    Functional f;
    f.kind = Kind::custom;
    f.name = std::move(name);
    f.custom = std::move(fn);
    f.declared_lipschitz = declared_lipschitz;
    return f;
  }

  /// Checks that `model` can evaluate this functional.
  void check_model(const ChainModel& model) const {
    if ((kind == Kind::w1 || kind == Kind::w1_reference) && model.state_dim != 1)
      throw ConfigError("the W1 functional needs a scalar state space");
    if (kind == Kind::w1 && !model.invariant_cdf)
      throw ConfigError("the W1 functional needs the model's invariant CDF");
  }

  double eval(const std::vector<State>& traj, const ChainModel& model) const {
    switch (kind) {
      case Kind::additive: {
        double acc = 0.0;
        for (const auto& x : traj) acc += g(x[0]);
        return acc;
      }
      case Kind::w1:
      case Kind::w1_reference: {
        check_model(model);
        std::vector<double> xs(traj.size());
        for (std::size_t i = 0; i < traj.size(); ++i) xs[i] = traj[i][0];
        std::sort(xs.begin(), xs.end());
        const double w = kind == Kind::w1 ? w1_empirical_vs_cdf(xs, *model.invariant_cdf)
                                          : w1_empirical_vs_empirical(xs, *reference);
        return static_cast<double>(traj.size()) * w;
      }
      case Kind::custom:
        return custom(traj);
    }
    return 0.0;
  }

  nlohmann::json describe() const {
    nlohmann::json j = {{"name", name}, {"declared_lipschitz", declared_lipschitz}};
    if (reference) j["reference_size"] = reference->size();
    return j;
  }
};

struct LipschitzReport {
  bool passed = true;
  std::size_t trials = 0;
  std::size_t violations = 0;
  double max_ratio = 0.0;  // |f(x) - f(x')| / d(x_k, x'_k)
};

/// Relative allowance for floating-point rounding in |f(x) - f(x')|.
inline constexpr double kLipschitzRounding = 1e-12;

/// Perturbs one coordinate of simulated trajectories and checks
/// |f(x) - f(x')| <= d(x_k, x'_k); the inequality is deterministic, so only
/// rounding of the two evaluations (relative 1e-12 of their magnitude) is allowed.
inline LipschitzReport verify_lipschitz(const Functional& f, const ChainModel& model, std::size_t n,
                                        std::size_t trials, std::uint64_t seed) {
  if (n < 1) throw DomainError("n must be >= 1");
  f.check_model(model);
  LipschitzReport rep;
  rep.trials = trials;
  std::vector<State> traj;
  for (std::size_t t = 0; t < trials; ++t) {
    Stream s(seed, {0x6c697073, t});  // "lips"
    simulate_into(model, n, s, traj);
    const std::size_t k = static_cast<std::size_t>(s.below(n));
    std::vector<State> alt = traj;
    const double scale = std::pow(10.0, s.uniform(-3.0, 0.5));
    for (double& v : alt[k]) v += scale * s.normal();
    const double d = model.metric(traj[k], alt[k]);
    if (d == 0.0) continue;
    const double fa = f.eval(traj, model);
    const double fb = f.eval(alt, model);
    const double diff = std::abs(fa - fb);
    rep.max_ratio = std::max(rep.max_ratio, diff / d);
    if (diff > d + kLipschitzRounding * (1.0 + std::abs(fa) + std::abs(fb))) {
      ++rep.violations;
      rep.passed = false;
    }
  }
  return rep;
}

/// {"functional": "additive", "g": "identity"|"abs"|"clip01"} or {"functional": "w1"}
/// or {"functional": "w1_reference", "reference_size": N, "seed": s}.
inline Functional functional_from_json(const nlohmann::json& j, const ChainModel& model) {
  if (!j.is_object() || !j.contains("functional") || !j.at("functional").is_string())
    throw ConfigError("functional: expected {\"functional\": name, ...}");
  const auto kind = j.at("functional").get<std::string>();
  Functional f;
  if (kind == "additive") {
    detail::reject_unknown_keys(j, {"functional", "g"}, "functional");
    const std::string g = j.contains("g") ? j.at("g").get<std::string>() : "identity";
    f = Functional::additive(g);
  } else if (kind == "w1") {
    detail::reject_unknown_keys(j, {"functional"}, "functional");
    f = Functional::w1();
  } else if (kind == "w1_reference") {
    detail::reject_unknown_keys(j, {"functional", "reference_size", "seed"}, "functional");
    if (!model.stationary) throw ConfigError("functional: w1_reference needs a stationary law to sample");
    const auto size = j.value("reference_size", std::size_t{1000000});
    const auto seed = j.value("seed", std::uint64_t{0});
    Stream s(seed, {0x72656673});  // "refs"
    std::vector<double> ref(size);
    for (auto& v : ref) v = model.stationary->sample(s)[0];
    f = Functional::w1_reference(std::move(ref));
  } else {
    throw ConfigError("functional: unknown functional '" + kind + "'");
  }
  f.check_model(model);
  return f;
}

}  // namespace irf
