#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "irf/bounds.hpp"
#include "irf/chain_models.hpp"
#include "irf/dominating.hpp"
#include "irf/errors.hpp"
#include "irf/functionals.hpp"
#include "irf/verify.hpp"

namespace irf {

/// What the "estimate" directive asks module dominating for.
struct EstimateDirective {
  std::size_t outer_samples = 100000;
  std::size_t inner_samples = 1000;
  std::optional<int> bernstein_k_max;
  std::optional<double> cramer_a;
  std::optional<double> cramer_y0;  // use the A(y0)^2 transfer instead of the direct Laplace estimate
  std::optional<double> fuk_nagaev_p;
  std::optional<double> fuk_p;
};

struct ExperimentConfig {
  nlohmann::json model;
  nlohmann::json functional;
  std::size_t n = 0;
  std::size_t replications = 0;
  std::size_t mean_replications = 0;  // defaults to replications
  std::uint64_t seed = 0;
  double alpha = 0.001;
  std::vector<double> grid_x;  // explicit thresholds
  double u_min = 0.25, u_max = 5.0, u_step = 0.25;
  std::optional<BoundParams> constants;
  std::optional<EstimateDirective> estimate;
  std::vector<std::string> families;
  double scale = 1.0;
  std::string report_path;
  std::string summary_path;
  nlohmann::json raw;
};

namespace detail {

inline std::size_t count_at(const nlohmann::json& j, const char* key, const std::string& where,
                            std::optional<std::size_t> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError(where + ": missing '" + key + "'");
  }
  const auto& v = j.at(key);
  if (!v.is_number() || v.get<double>() < 0.0 || v.get<double>() != std::floor(v.get<double>()))
    throw ConfigError(where + ": '" + key + "' must be a nonnegative integer");
  return static_cast<std::size_t>(v.get<double>());
}

inline EstimateDirective estimate_from_json(const nlohmann::json& j) {
  reject_keys(j, {"outer_samples", "inner_samples", "bernstein", "cramer", "fuk_nagaev", "fuk"},
              "constants.estimate");
  EstimateDirective e;
  e.outer_samples = count_at(j, "outer_samples", "constants.estimate", e.outer_samples);
  e.inner_samples = count_at(j, "inner_samples", "constants.estimate", e.inner_samples);
  if (j.contains("bernstein")) {
    reject_keys(j.at("bernstein"), {"k_max"}, "constants.estimate.bernstein");
    e.bernstein_k_max = static_cast<int>(count_at(j.at("bernstein"), "k_max", "constants.estimate.bernstein", 8));
  }
  if (j.contains("cramer")) {
    reject_keys(j.at("cramer"), {"a", "y0"}, "constants.estimate.cramer");
    e.cramer_a = num(j.at("cramer"), "a", "constants.estimate.cramer");
    e.cramer_y0 = opt_num(j.at("cramer"), "y0", "constants.estimate.cramer");
  }
  if (j.contains("fuk_nagaev")) {
    reject_keys(j.at("fuk_nagaev"), {"p"}, "constants.estimate.fuk_nagaev");
    e.fuk_nagaev_p = num(j.at("fuk_nagaev"), "p", "constants.estimate.fuk_nagaev");
  }
  if (j.contains("fuk")) {
    reject_keys(j.at("fuk"), {"p"}, "constants.estimate.fuk");
    e.fuk_p = num(j.at("fuk"), "p", "constants.estimate.fuk");
  }
  if (!e.bernstein_k_max && !e.cramer_a && !e.fuk_nagaev_p && !e.fuk_p)
    throw ConfigError("constants.estimate: request at least one of bernstein, cramer, fuk_nagaev, fuk");
  return e;
}

}  // namespace detail

/// Validates the whole experiment document before anything runs.
inline ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  using detail::count_at;
  detail::reject_keys(j, {"model", "functional", "n", "replications", "mean_replications", "seed", "alpha", "grid",
                          "constants", "families", "scale", "output"},
                      "config");
  ExperimentConfig c;
  c.raw = j;
  if (!j.contains("model")) throw ConfigError("config: missing 'model'");
  if (!j.contains("functional")) throw ConfigError("config: missing 'functional'");
  c.model = j.at("model");
  c.functional = j.at("functional");
  c.n = count_at(j, "n", "config");
  if (c.n < 1) throw ConfigError("config: 'n' must be >= 1");
  c.replications = count_at(j, "replications", "config");
  if (c.replications < 1) throw ConfigError("config: 'replications' must be >= 1");
  c.mean_replications = count_at(j, "mean_replications", "config", c.replications);
  if (c.mean_replications < 2) throw ConfigError("config: 'mean_replications' must be >= 2");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("config: 'seed' must be a nonnegative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  c.alpha = detail::num(j, "alpha", "config", 0.001);
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("config: 'alpha' must lie in (0, 1)");

  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    detail::reject_keys(g, {"x", "u_min", "u_max", "u_step"}, "config.grid");
    if (g.contains("x")) {
      if (g.contains("u_min") || g.contains("u_max") || g.contains("u_step"))
        throw ConfigError("config.grid: give either 'x' or the u range");
      if (!g.at("x").is_array() || g.at("x").empty()) throw ConfigError("config.grid: 'x' must be a nonempty array");
      for (const auto& v : g.at("x")) {
        if (!v.is_number()) throw ConfigError("config.grid: 'x' entries must be numbers");
        c.grid_x.push_back(v.get<double>());
      }
      if (!std::is_sorted(c.grid_x.begin(), c.grid_x.end())) throw ConfigError("config.grid: 'x' must be sorted");
    } else {
      c.u_min = detail::num(g, "u_min", "config.grid", c.u_min);
      c.u_max = detail::num(g, "u_max", "config.grid", c.u_max);
      c.u_step = detail::num(g, "u_step", "config.grid", c.u_step);
      if (!(c.u_step > 0.0) || !(c.u_min <= c.u_max)) throw ConfigError("config.grid: need u_min <= u_max and u_step > 0");
    }
  }

  if (!j.contains("constants")) throw ConfigError("config: missing 'constants'");
  const auto& jc = j.at("constants");
  if (jc.is_object() && jc.contains("estimate")) {
    if (jc.size() != 1) throw ConfigError("constants: 'estimate' cannot be mixed with explicit constants");
    c.estimate = detail::estimate_from_json(jc.at("estimate"));
  } else {
    nlohmann::json full = jc;
    // n and rho default to the experiment's horizon; they are filled in at run time.
    c.constants = std::nullopt;
    if (!full.is_object()) throw ConfigError("constants: expected a JSON object");
    if (!full.contains("n")) full["n"] = c.n;
    if (!full.contains("rho")) full["rho"] = 0.0;  // placeholder, replaced by the model's rho
    c.constants = bound_params_from_json(full);
    if (c.constants->horizon.n != c.n) throw ConfigError("constants: 'n' disagrees with the experiment's n");
  }

  if (j.contains("families")) {
    if (!j.at("families").is_array()) throw ConfigError("config: 'families' must be an array");
    for (const auto& f : j.at("families")) {
      if (!f.is_string()) throw ConfigError("config: 'families' entries must be strings");
      c.families.push_back(f.get<std::string>());
    }
  }
  c.scale = detail::num(j, "scale", "config", 1.0);
  if (!(c.scale > 0.0)) throw ConfigError("config: 'scale' must be > 0");
  if (j.contains("output")) {
    const auto& o = j.at("output");
    detail::reject_keys(o, {"report", "summary"}, "config.output");
    if (o.contains("report")) c.report_path = o.at("report").get<std::string>();
    if (o.contains("summary")) c.summary_path = o.at("summary").get<std::string>();
  }
  return c;
}

/// Turns dominating-variable statistics into bound constants.
inline BoundParams constants_from_stats(const DominatingStats& st, const EstimateDirective& e,
                                        const ChainModel& model, const Horizon& h) {
  BoundParams bp;
  bp.horizon = h;
  const auto moment = [](const SampleSummary& s, double p) {
    const auto it = s.moments.find(p);
    if (it == s.moments.end()) throw DomainError("moment of order " + std::to_string(p) + " was not estimated");
    return it->second;
  };
  const auto weak = [](const SampleSummary& s, double p) {
    const auto it = s.weak_moments.find(p);
    if (it == s.weak_moments.end()) throw DomainError("weak moment was not estimated");
    return it->second;
  };
  const double v1 = moment(st.x1, 2.0);
  const double v2 = moment(st.eps, 2.0);
  if (e.bernstein_k_max) {
    // A single scale M has to serve both G_{X1} and G_eps.
    const auto fe = bernstein_fit(st.samples_eps, *e.bernstein_k_max);
    double m = fe.m;
    double bv1 = 0.0;
    bool x1_degenerate = true;
    for (double v : st.samples_x1) x1_degenerate = x1_degenerate && v == 0.0;
    if (!x1_degenerate) {
      const auto fx = bernstein_fit(st.samples_x1, *e.bernstein_k_max);
      m = std::max(m, fx.m);
      bv1 = fx.v;
    }
    bp.bernstein = BernsteinConstants{bv1, fe.v, m};
  }
  if (e.cramer_a) {
    const double a = *e.cramer_a;
    const auto lap = [a](const SampleSummary& s) {
      const auto it = s.laplace.find(a);
      if (it == s.laplace.end()) throw DomainError("Laplace transform was not estimated");
      return it->second.value;
    };
    CramerConstants cc;
    cc.a = a;
    if (e.cramer_y0) {
      // E exp(a G_eps) <= A(y0)^2 with A(y0) = E exp(a C |eps - y0|).
      Stream s(st.seed, {detail::kTagStation, 1});
      const std::size_t draws = std::max<std::size_t>(st.eps.size, 1000);
      double acc = 0.0;
      for (std::size_t i = 0; i < draws; ++i) {
        const Noise eps = model.noise.sample(s);
        const Noise y0(eps.size(), *e.cramer_y0);
        acc += std::exp(a * model.c_const * model.noise_metric(eps, y0));
      }
      const double ay0 = std::max(1.0, acc / static_cast<double>(draws));
      cc.k2 = ay0 * ay0;
      if (model.init_mode == InitMode::fixed) {
        cc.k1 = std::max(1.0, lap(st.x1));
      } else if (model.init_mode == InitMode::stationary) {
        const State x0(model.state_dim, *e.cramer_y0);
        const Noise y0(model.noise_dim, *e.cramer_y0);
        const double drift = model.metric(model.step(x0, y0), x0);
        cc.k1 = stationary_transfer_cramer(ay0, model.rho, a, drift).k1;
      } else {
        cc.k1 = std::max(1.0, lap(st.x1));
      }
    } else {
      cc.k1 = std::max(1.0, lap(st.x1));
      cc.k2 = std::max(1.0, lap(st.eps));
    }
    bp.cramer = cc;
  }
  if (e.fuk_nagaev_p) {
    const double p = *e.fuk_nagaev_p;
    FukNagaevConstants f;
    f.v1 = v1;
    f.v2 = v2;
    f.p = p;
    f.a1 = weak(st.x1, p);
    f.a2 = weak(st.eps, p);
    bp.fuk_nagaev = f;
  }
  if (e.fuk_p) {
    const double p = *e.fuk_p;
    bp.fuk = FukConstants{v1, v2, p, moment(st.x1, p), moment(st.eps, p)};
  }
  return bp;
}

/// Moment orders and Laplace parameters the directive needs.
inline DominatingStats estimate_for(const EstimateDirective& e, const ChainModel& model, std::uint64_t seed,
                                    unsigned threads) {
  std::vector<double> p_list = {2.0};
  if (e.fuk_nagaev_p) p_list.push_back(*e.fuk_nagaev_p);
  if (e.fuk_p) p_list.push_back(*e.fuk_p);
  std::vector<double> a_list;
  if (e.cramer_a) a_list.push_back(*e.cramer_a);
  return estimate_stats(model, p_list, a_list, e.outer_samples, e.inner_samples, derive_seed(seed, {detail::kTagGEps}),
                        threads);
}

/// sqrt(V) for the default grid: first of hoeffding, bernstein, fuk_nagaev, fuk; else M/2 from Rio.
inline double grid_scale(const BoundParams& bp) {
  const Horizon& h = bp.horizon;
  if (bp.hoeffding) return std::sqrt(variance_proxy(h, bp.hoeffding->v1, bp.hoeffding->v2));
  if (bp.bernstein) return std::sqrt(variance_proxy(h, bp.bernstein->v1, bp.bernstein->v2));
  if (bp.fuk_nagaev) return std::sqrt(variance_proxy(h, bp.fuk_nagaev->v1, bp.fuk_nagaev->v2));
  if (bp.fuk) return std::sqrt(variance_proxy(h, bp.fuk->v1, bp.fuk->v2));
  if (bp.rio) return 0.5 * std::sqrt(rio_scale(h, *bp.rio).m2);
  throw ConfigError("grid: no constants to scale the default grid; give 'grid.x'");
}

inline std::vector<double> threshold_grid(const ExperimentConfig& c, const BoundParams& bp) {
  if (!c.grid_x.empty()) return c.grid_x;
  const double s = grid_scale(bp);
  if (!(s > 0.0)) throw ConfigError("grid: the variance proxy is zero; give 'grid.x'");
  std::vector<double> x;
  const auto steps = static_cast<std::size_t>(std::floor((c.u_max - c.u_min) / c.u_step + 1e-9));
  for (std::size_t i = 0; i <= steps; ++i) x.push_back((c.u_min + static_cast<double>(i) * c.u_step) * s);
  return x;
}

struct ExperimentResult {
  VerificationReport report;
  BoundParams constants;
  MeanEstimate center;
  TailCurve curve;
  std::optional<DominatingStats> stats;
  nlohmann::json summary;
  std::string report_csv;
};

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string report_to_csv(const VerificationReport& rep) {
  std::string out = "family,x,emp_tail,cp_upper,bound,verdict\n";
  for (const auto& r : rep.rows) {
    out += r.family;
    out += ',' + fmt17(r.x) + ',' + fmt17(r.emp_tail) + ',' + fmt17(r.cp_upper) + ',' + fmt17(r.bound) + ',';
    out += to_string(r.verdict);
    out += '\n';
  }
  return out;
}

/// Runs the whole pipeline: model, centering, tail counts, constants, verdicts.
inline ExperimentResult run_experiment(const ExperimentConfig& c, unsigned threads = 0) {
  ExperimentResult res;
  const ChainModel model = model_from_json(c.model);
  const Functional f = functional_from_json(c.functional, model);
  const Horizon h{c.n, model.rho};

  if (c.estimate) {
    res.stats = estimate_for(*c.estimate, model, c.seed, threads);
    try {
      res.constants = constants_from_stats(*res.stats, *c.estimate, model, h);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("constants.estimate: ") + e.what());
    }
  } else {
    res.constants = *c.constants;
    res.constants.horizon = h;
  }
  try {
    h.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  std::vector<TailBound> bounds;
  try {
    bounds = select_families(tail_bounds(res.constants), c.families);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("constants: ") + e.what());
  }
  if (bounds.empty()) throw ConfigError("no bound family to verify");
  for (auto& b : bounds) b.scale *= c.scale;
  const auto grid = threshold_grid(c, res.constants);

  res.center = estimate_mean(f, model, c.n, c.mean_replications, c.seed, threads);
  res.curve = tail_curve(f, model, c.n, c.replications, grid, c.seed, res.center, 4.0, threads);
  res.report = check_dominance(res.curve, bounds, c.alpha);
  res.report_csv = report_to_csv(res.report);

  nlohmann::json fam = nlohmann::json::array();
  for (const auto& fv : res.report.families)
    fam.push_back({{"family", fv.family},
                   {"pass", fv.pass},
                   {"fail", fv.fail},
                   {"unresolved", fv.unresolved},
                   {"inapplicable", fv.inapplicable},
                   {"passed", fv.passed}});
  res.summary = {{"passed", res.report.passed},
                 {"families", fam},
                 {"replications", res.report.replications},
                 {"alpha", c.alpha},
                 {"seed", c.seed},
                 {"center", {{"mean", res.center.mean}, {"se", res.center.se}}},
                 {"threshold_shift", res.curve.shift},
                 {"constants", to_json(res.constants)},
                 {"scale", c.scale},
                 {"config", c.raw}};
  if (res.stats) res.summary["dominating_stats"] = to_json(*res.stats);
  return res;
}

}  // namespace irf
