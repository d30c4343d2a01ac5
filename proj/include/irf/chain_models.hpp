#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "irf/errors.hpp"
#include "irf/laws.hpp"
#include "irf/parallel.hpp"
#include "irf/rng.hpp"

namespace irf {

/// Points of the state space X and of the noise space Y. Scalar models use
/// one coordinate; fixed-dimension vector models use more.
using State = std::vector<double>;
using Noise = std::vector<double>;
using Metric = std::function<double(const State&, const State&)>;
using StepMap = std::function<State(const State&, const Noise&)>;

struct WeightedPoint {
  State point;
  double weight = 0.0;
};

inline double abs_metric(const State& a, const State& b) { return std::abs(a[0] - b[0]); }

inline double euclidean_metric(const State& a, const State& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

/// A law on X or Y, with the optional closed forms used for G and H.
struct Law {
  std::function<State(Stream&)> sample;
  /// x -> integral of dist(x, x') law(dx'), w.r.t. the owning model's metric.
  std::function<double(const State&)> mean_distance;
  /// Finite support, when the law is discrete.
  std::vector<WeightedPoint> atoms;
  nlohmann::json describe = nlohmann::json::object();

  static Law from_scalar(const ScalarLaw& law) {
    Law out;
    out.sample = [f = law.sample](Stream& s) { return State{f(s)}; };
    out.mean_distance = [f = law.mean_abs_dev](const State& x) { return f(x[0]); };
    for (const auto& [v, w] : law.atoms) out.atoms.push_back({State{v}, w});
    out.describe = law.params;
    return out;
  }

  static Law point_mass(State x) {
    Law out;
    out.sample = [x](Stream&) { return x; };
    out.atoms = {{x, 1.0}};
    out.describe = {{"law", "point_mass"}, {"x", x}};
    return out;
  }
};

enum class InitMode { fixed, explicit_law, stationary };

inline const char* to_string(InitMode m) {
  switch (m) {
    case InitMode::fixed: return "fixed";
    case InitMode::explicit_law: return "explicit";
    case InitMode::stationary: return "stationary";
  }
  return "?";
}

/// How X_1 is drawn.
struct InitSpec {
  InitMode mode = InitMode::stationary;
  State x;                          // fixed
  std::optional<ScalarLaw> law;     // explicit

  static InitSpec fixed(State x) { return {InitMode::fixed, std::move(x), std::nullopt}; }
  static InitSpec fixed(double x) { return fixed(State{x}); }
  static InitSpec stationary() { return {}; }
  static InitSpec explicit_law(ScalarLaw law) {
    return {InitMode::explicit_law, {}, std::move(law)};
  }
};

/// A one-step contracting iterated random function X_k = F(X_{k-1}, eps_k).
///
/// Immutable once built; share freely across threads.
struct ChainModel {
  std::string id;
  std::size_t state_dim = 1;
  std::size_t noise_dim = 1;
  StepMap step;
  Law noise;
  InitMode init_mode = InitMode::stationary;
  Law initial;
  Metric metric = abs_metric;
  Metric noise_metric = abs_metric;
  double rho = 0.0;
  double c_const = 1.0;
  std::optional<ScalarCdf> invariant_cdf;
  std::optional<Law> stationary;
  nlohmann::json spec = nlohmann::json::object();

  void validate() const {
    if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("contraction factor rho must lie in [0, 1)");
    if (!(c_const > 0.0)) throw DomainError("noise Lipschitz constant C must be positive");
    if (state_dim == 0 || noise_dim == 0) throw DomainError("dimensions must be positive");
    if (!step || !noise.sample || !initial.sample) throw ConfigError("incomplete chain model");
  }
};

struct Trajectory {
  std::vector<State> states;
  std::uint64_t seed = 0;
  std::string model_id;
};

namespace detail {

inline Law resolve_initial(const InitSpec& init, const std::optional<Law>& stationary) {
  switch (init.mode) {
    case InitMode::fixed:
      return Law::point_mass(init.x);
    case InitMode::explicit_law:
      if (!init.law) throw ConfigError("explicit initial law missing");
      return Law::from_scalar(*init.law);
    case InitMode::stationary:
      if (!stationary) throw ConfigError("stationary law unknown for this model");
      return *stationary;
  }
  return {};
}

inline void check_finite(const State& s, std::size_t step) {
  for (double v : s)
    if (!std::isfinite(v))
      throw NumericOverflow(step, "non-finite state produced at step " + std::to_string(step));
}

}  // namespace detail

/// iid sequence X_k = eps_k: F(x, y) = y, rho = 0, C = 1.
inline ChainModel iid_model(const ScalarLaw& law, const InitSpec& init = InitSpec::stationary()) {
  ChainModel m;
  m.id = "iid";
  m.step = [](const State&, const Noise& y) { return State(y); };
  m.noise = Law::from_scalar(law);
  m.rho = 0.0;
  m.c_const = 1.0;
  m.invariant_cdf = law.cdf;
  m.stationary = m.noise;
  m.init_mode = init.mode;
  m.initial = detail::resolve_initial(init, m.stationary);
  m.spec = {{"model", "iid"}, {"law", law.params}, {"init", to_string(init.mode)}};
  return m;
}

/// X_k = (X_{k-1} + eps_k) / 2 with eps ~ Bernoulli(1/2); invariant law Uniform[0, 1].
inline ChainModel half_binary_chain(const InitSpec& init = InitSpec::stationary()) {
  ChainModel m;
  m.id = "half_binary";
  m.step = [](const State& x, const Noise& y) { return State{0.5 * (x[0] + y[0])}; };
  m.noise = Law::from_scalar(ScalarLaw::bernoulli(0.5));
  m.rho = 0.5;
  m.c_const = 0.5;
  m.invariant_cdf = ScalarCdf::uniform(0.0, 1.0);
  m.stationary = Law::from_scalar(ScalarLaw::uniform(0.0, 1.0));
  m.init_mode = init.mode;
  m.initial = detail::resolve_initial(init, m.stationary);
  m.spec = {{"model", "half_binary"}, {"init", to_string(init.mode)}};
  return m;
}

/// X_k = rho X_{k-1} + xi_k with xi ~ N(0, sigma^2); invariant N(0, sigma^2 / (1 - rho^2)).
inline ChainModel ar1_model(double rho, double sigma, const InitSpec& init = InitSpec::stationary()) {
  if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("ar1 needs rho in [0, 1)");
  if (!(sigma >= 0.0)) throw DomainError("ar1 needs sigma >= 0");
  ChainModel m;
  m.id = "ar1";
  m.step = [rho](const State& x, const Noise& y) { return State{rho * x[0] + y[0]}; };
  m.noise = Law::from_scalar(ScalarLaw::normal(0.0, sigma));
  m.rho = rho;
  m.c_const = 1.0;
  const double sd = sigma / std::sqrt(1.0 - rho * rho);
  m.invariant_cdf = ScalarCdf::normal(0.0, sd);
  m.stationary = Law::from_scalar(ScalarLaw::normal(0.0, sd));
  m.init_mode = init.mode;
  m.initial = detail::resolve_initial(init, m.stationary);
  m.spec = {{"model", "ar1"}, {"rho", rho}, {"sigma", sigma}, {"init", to_string(init.mode)}};
  return m;
}

/// Writes X_1..X_n into `out` (resized to n), drawing from `stream`.
inline void simulate_into(const ChainModel& model, std::size_t n, Stream& stream,
                          std::vector<State>& out) {
  if (n < 1) throw DomainError("trajectory length n must be >= 1");
  out.resize(n);
  out[0] = model.initial.sample(stream);
  detail::check_finite(out[0], 1);
  for (std::size_t k = 1; k < n; ++k) {
    out[k] = model.step(out[k - 1], model.noise.sample(stream));
    detail::check_finite(out[k], k + 1);
  }
}

/// X_1 ~ initial law, X_k = F(X_{k-1}, eps_k) for k = 2..n; 1-indexed, so n
/// counts states and F is applied n - 1 times.
inline Trajectory simulate(const ChainModel& model, std::size_t n, std::uint64_t seed) {
  Trajectory t;
  t.seed = seed;
  t.model_id = model.id;
  Stream stream(seed);
  simulate_into(model, n, stream, t.states);
  return t;
}

struct ForgettingResult {
  double empirical_mean = 0.0;
  double envelope = 0.0;  // rho^(n-1) d(x, x')
  double standard_error = 0.0;
};

/// Synchronous coupling: chains from x and x' share every noise draw.
inline ForgettingResult forgetting_check(const ChainModel& model, const State& x,
                                         const State& x_prime, std::size_t n,
                                         std::size_t replications, std::uint64_t seed,
                                         unsigned threads = 0) {
  if (n < 1) throw DomainError("n must be >= 1");
  if (replications < 100) throw DomainError("forgetting_check needs >= 100 replications");
  std::vector<double> dist(replications);
  parallel_for(replications, threads, [&](std::size_t r) {
    Stream stream(seed, {r});
    State a = x;
    State b = x_prime;
    for (std::size_t k = 1; k < n; ++k) {
      const Noise eps = model.noise.sample(stream);
      a = model.step(a, eps);
      b = model.step(b, eps);
      detail::check_finite(a, k + 1);
      detail::check_finite(b, k + 1);
    }
    dist[r] = model.metric(a, b);
  });
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t r = 0; r < replications; ++r) {
    const double delta = dist[r] - mean;
    mean += delta / static_cast<double>(r + 1);
    m2 += delta * (dist[r] - mean);
  }
  ForgettingResult out;
  out.empirical_mean = mean;
  out.envelope = std::pow(model.rho, static_cast<double>(n - 1)) * model.metric(x, x_prime);
  out.standard_error = std::sqrt(m2 / static_cast<double>(replications - 1) /
                                 static_cast<double>(replications));
  return out;
}

/// Same chain under the snowflake metrics d^alpha and delta^alpha: constants
/// become rho^alpha and C^alpha. Closed-form distance integrals are dropped
/// because they refer to the original metric; atoms are kept.
inline ChainModel alpha_rescale(const ChainModel& model, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  ChainModel m = model;
  m.id = model.id + "^alpha";
  m.metric = [d = model.metric, alpha](const State& a, const State& b) {
    return std::pow(d(a, b), alpha);
  };
  m.noise_metric = [d = model.noise_metric, alpha](const State& a, const State& b) {
    return std::pow(d(a, b), alpha);
  };
  m.rho = std::pow(model.rho, alpha);
  m.c_const = std::pow(model.c_const, alpha);
  m.noise.mean_distance = nullptr;
  m.initial.mean_distance = nullptr;
  if (m.stationary) m.stationary->mean_distance = nullptr;
  m.invariant_cdf.reset();
  m.spec["alpha"] = alpha;
  return m;
}

struct ContractionCheck {
  bool passed = true;
  std::size_t pairs = 0;
  double max_excess = -std::numeric_limits<double>::infinity();  // mean - (rho d + slack)
};

namespace detail {

/// Probe states: a draw from the stationary (or initial) law, jittered so
/// fixed-start models are probed off their starting point.
inline State probe_state(const ChainModel& model, Stream& s) {
  State x = model.stationary ? model.stationary->sample(s) : model.initial.sample(s);
  for (double& v : x) v += 2.0 * s.normal();
  return x;
}

}  // namespace detail

/// Monte Carlo check of E d(F(x, eps), F(x', eps)) <= rho d(x, x') with a
/// 3-standard-error slack plus a relative rounding allowance of 1e-12.
inline ContractionCheck check_contraction(const ChainModel& model, std::size_t pairs,
                                          std::size_t noise_draws, std::uint64_t seed) {
  ContractionCheck out;
  out.pairs = pairs;
  for (std::size_t i = 0; i < pairs; ++i) {
    Stream s(seed, {i});
    const State x = detail::probe_state(model, s);
    const State xp = detail::probe_state(model, s);
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t j = 0; j < noise_draws; ++j) {
      const Noise eps = model.noise.sample(s);
      const double d = model.metric(model.step(x, eps), model.step(xp, eps));
      const double delta = d - mean;
      mean += delta / static_cast<double>(j + 1);
      m2 += delta * (d - mean);
    }
    const double se =
        noise_draws > 1 ? std::sqrt(m2 / static_cast<double>(noise_draws - 1) / noise_draws) : 0.0;
    const double target = model.rho * model.metric(x, xp);
    const double excess = mean - (target + 3.0 * se + 1e-12 * (1.0 + target));
    out.max_excess = std::max(out.max_excess, excess);
    if (excess > 0.0) out.passed = false;
  }
  return out;
}

struct NoiseLipschitzCheck {
  bool passed = true;
  std::size_t triples = 0;
  double max_ratio = 0.0;  // d(F(x,y), F(x,y')) / (C delta(y, y'))
};

/// Deterministic check of d(F(x, y), F(x, y')) <= C delta(y, y'); only a
/// floating-point allowance of 1e-12 relative is granted.
inline NoiseLipschitzCheck check_noise_lipschitz(const ChainModel& model, std::size_t triples,
                                                 std::uint64_t seed) {
  NoiseLipschitzCheck out;
  out.triples = triples;
  for (std::size_t i = 0; i < triples; ++i) {
    Stream s(seed, {i});
    const State x = detail::probe_state(model, s);
    const Noise y = model.noise.sample(s);
    const Noise yp = model.noise.sample(s);
    const double lhs = model.metric(model.step(x, y), model.step(x, yp));
    const double rhs = model.c_const * model.noise_metric(y, yp);
    if (rhs > 0.0) out.max_ratio = std::max(out.max_ratio, lhs / rhs);
    if (lhs > rhs * (1.0 + 1e-12) + 1e-300) out.passed = false;
  }
  return out;
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

inline double number_at(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  if (!j.at(key).is_number()) throw ConfigError(where + ": '" + key + "' must be a number");
  return j.at(key).get<double>();
}

inline double number_or(const nlohmann::json& j, const char* key, double fallback,
                        const std::string& where) {
  return j.contains(key) ? number_at(j, key, where) : fallback;
}

inline ScalarLaw scalar_law_from_json(const nlohmann::json& j) {
  const std::string where = "law";
  if (!j.is_object() || !j.contains("law") || !j.at("law").is_string())
    throw ConfigError("law: expected {\"law\": name, ...}");
  const auto name = j.at("law").get<std::string>();
  if (name == "uniform") {
    reject_unknown_keys(j, {"law", "a", "b"}, where);
    return ScalarLaw::uniform(number_or(j, "a", 0.0, where), number_or(j, "b", 1.0, where));
  }
  if (name == "normal") {
    reject_unknown_keys(j, {"law", "mean", "sd"}, where);
    return ScalarLaw::normal(number_or(j, "mean", 0.0, where), number_or(j, "sd", 1.0, where));
  }
  if (name == "bernoulli") {
    reject_unknown_keys(j, {"law", "p"}, where);
    return ScalarLaw::bernoulli(number_or(j, "p", 0.5, where));
  }
  if (name == "degenerate") {
    reject_unknown_keys(j, {"law", "value"}, where);
    return ScalarLaw::degenerate(number_at(j, "value", where));
  }
  throw ConfigError("law: unknown law '" + name + "'");
}

}  // namespace detail

/// Parses {"model": "ar1"|"half_binary"|"iid", "rho", "sigma", "law",
/// "init": {"mode": "fixed"|"stationary"|"explicit", "x", "law"}}.
inline ChainModel model_from_json(const nlohmann::json& j) {
  using detail::number_at;
  using detail::number_or;
  detail::reject_unknown_keys(j, {"model", "rho", "sigma", "law", "init"}, "model");
  if (!j.contains("model") || !j.at("model").is_string())
    throw ConfigError("model: missing string key 'model'");
  const auto kind = j.at("model").get<std::string>();

  InitSpec init = InitSpec::stationary();
  if (j.contains("init")) {
    const auto& ji = j.at("init");
    detail::reject_unknown_keys(ji, {"mode", "x", "law"}, "model.init");
    const std::string mode = ji.value("mode", std::string("stationary"));
    if (mode == "fixed") {
      if (!ji.contains("x")) throw ConfigError("model.init: fixed mode needs 'x'");
      const auto& jx = ji.at("x");
      if (jx.is_number()) {
        init = InitSpec::fixed(jx.get<double>());
      } else if (jx.is_array()) {
        init = InitSpec::fixed(jx.get<State>());
      } else {
        throw ConfigError("model.init: 'x' must be a number or an array");
      }
    } else if (mode == "stationary") {
      init = InitSpec::stationary();
    } else if (mode == "explicit") {
      if (!ji.contains("law")) throw ConfigError("model.init: explicit mode needs 'law'");
      init = InitSpec::explicit_law(detail::scalar_law_from_json(ji.at("law")));
    } else {
      throw ConfigError("model.init: unknown mode '" + mode + "'");
    }
  }

  ChainModel m;
  if (kind == "ar1") {
    if (j.contains("law")) throw ConfigError("model: 'law' only applies to the iid model");
    m = ar1_model(number_or(j, "rho", 0.5, "model"), number_or(j, "sigma", 1.0, "model"), init);
  } else if (kind == "half_binary") {
    if (j.contains("rho") || j.contains("sigma") || j.contains("law"))
      throw ConfigError("model: half_binary takes no parameters besides 'init'");
    m = half_binary_chain(init);
  } else if (kind == "iid") {
    if (j.contains("rho") || j.contains("sigma"))
      throw ConfigError("model: iid takes 'law' and 'init' only");
    const ScalarLaw law = j.contains("law") ? detail::scalar_law_from_json(j.at("law"))
                                            : ScalarLaw::uniform(0.0, 1.0);
    m = iid_model(law, init);
  } else {
    throw ConfigError("model: unknown model '" + kind + "'");
  }
  if (init.mode == InitMode::fixed) {
    if (init.x.size() != m.state_dim) throw ConfigError("model.init: 'x' has the wrong dimension");
    m.spec["x"] = init.x;
  }
  m.validate();
  return m;
}

}  // namespace irf
