#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "irf/bounds.hpp"
#include "irf/chain_models.hpp"
#include "irf/dominating.hpp"
#include "irf/errors.hpp"
#include "irf/experiment.hpp"
#include "irf/verify.hpp"

#ifndef _WIN32
#include <unistd.h>
#endif

namespace irf::cli {

enum ExitCode : int { kOk = 0, kVerdictFail = 1, kConfigError = 2, kRuntimeError = 3 };

/// Writes `content` to a sibling temp file, then renames it over `path`.
inline void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path() && !fs::exists(target.parent_path()))
    throw ConfigError("output directory does not exist: " + target.parent_path().string());
#ifndef _WIN32
  const long pid = static_cast<long>(::getpid());
#else
  const long pid = 0;
#endif
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(pid);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw ConfigError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw ConfigError("cannot move output into place: " + path + " (" + ec.message() + ")");
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Parses JSON text; syntax errors report line and column.
inline nlohmann::json parse_json(const std::string& text, const std::string& source) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON: " +
                      e.what());
  }
}

inline nlohmann::json read_json(const std::string& path) { return parse_json(read_file(path), path); }

/// RNG_SEED, when set, replaces every configured seed.
inline std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("RNG_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(v, &end, 10);
  if (end == v || *end != '\0') throw ConfigError(std::string("RNG_SEED is not an unsigned integer: ") + v);
  return static_cast<std::uint64_t>(s);
}

/// Accepts a model name ("half_binary", "ar1", "iid") or a path to a model JSON file.
inline ChainModel load_model(const std::string& arg, std::optional<double> x0) {
  nlohmann::json j;
  if (std::filesystem::exists(arg)) {
    j = read_json(arg);
  } else {
    j = {{"model", arg}};
  }
  if (x0) j["init"] = {{"mode", "fixed"}, {"x", *x0}};
  return model_from_json(j);
}

/// "a:b:step" -> a, a + step, ..., up to b.
inline std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("grid: '" + s + "' is not of the form start:stop:step");
    }
  }
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0])
    throw ConfigError("grid: '" + s + "' is not of the form start:stop:step");
  std::vector<double> x;
  const auto steps = static_cast<std::size_t>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
  for (std::size_t i = 0; i <= steps; ++i) x.push_back(parts[0] + static_cast<double>(i) * parts[2]);
  return x;
}

struct Options {
  unsigned threads = 0;
  // simulate
  std::string model;
  std::optional<double> x0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string out;
  // bounds
  std::string params;
  std::string grid;
  std::vector<std::string> families;
  // verify
  std::string config;
  std::string report;
  std::string summary;
  // rates
  std::vector<std::size_t> n_list;
  std::size_t replications = 200;
  // estimate-stats
  std::size_t outer = 100000;
  std::size_t inner = 1000;
  std::vector<double> p_list;
  std::vector<double> a_list;
};

inline int cmd_simulate(const Options& o, std::ostream& log) {
  const ChainModel model = load_model(o.model, o.x0);
  const std::uint64_t seed = env_seed().value_or(o.seed);
  const Trajectory t = simulate(model, o.n, seed);
  std::string csv = "t";
  for (std::size_t d = 0; d < model.state_dim; ++d) csv += model.state_dim == 1 ? ",x" : ",x" + std::to_string(d);
  csv += '\n';
  for (std::size_t k = 0; k < t.states.size(); ++k) {
    csv += std::to_string(k + 1);
    for (double v : t.states[k]) csv += ',' + fmt17(v);
    csv += '\n';
  }
  if (o.out.empty()) {
    log << csv;
  } else {
    write_atomic(o.out, csv);
  }
  return kOk;
}

inline int cmd_bounds(const Options& o, std::ostream& log) {
  const BoundParams bp = bound_params_from_json(read_json(o.params));
  const auto bounds = select_families(tail_bounds(bp), o.families);
  if (bounds.empty()) throw ConfigError("bounds: the parameter file enables no tail family");
  const auto grid = parse_grid(o.grid);
  std::string csv = "x,family,bound_value,winning_family\n";
  for (double x : grid) {
    const auto env = envelope_tail(x, bounds);
    for (const auto& b : bounds) {
      const double v = b.applicable(x) ? b(x) : std::numeric_limits<double>::quiet_NaN();
      csv += fmt17(x) + ',' + b.family + ',' + fmt17(v) + ',' + env.family + '\n';
    }
  }
  if (o.out.empty()) {
    log << csv;
  } else {
    write_atomic(o.out, csv);
  }
  return kOk;
}

inline int cmd_verify(const Options& o, std::ostream& log) {
  ExperimentConfig cfg = experiment_from_json(read_json(o.config));
  if (const auto s = env_seed()) cfg.seed = *s;
  if (!o.report.empty()) cfg.report_path = o.report;
  if (!o.summary.empty()) cfg.summary_path = o.summary;
  const auto res = run_experiment(cfg, o.threads);
  if (!cfg.report_path.empty()) write_atomic(cfg.report_path, res.report_csv);
  if (!cfg.summary_path.empty()) write_atomic(cfg.summary_path, res.summary.dump(2) + "\n");
  for (const auto& f : res.report.families)
    log << f.family << ": " << (f.passed ? "pass" : "FAIL") << " (pass " << f.pass << ", fail " << f.fail
        << ", unresolved " << f.unresolved << ", inapplicable " << f.inapplicable << ")\n";
  log << "overall: " << (res.report.passed ? "pass" : "FAIL") << "\n";
  return res.report.passed ? kOk : kVerdictFail;
}

inline int cmd_rates(const Options& o, std::ostream& log) {
  const ChainModel model = load_model(o.model, std::nullopt);
  const std::uint64_t seed = env_seed().value_or(o.seed);
  if (o.n_list.empty()) throw ConfigError("rates: --n-list is empty");
  const auto rows = w1_rate_scan(model, o.n_list, o.replications, seed, o.threads);
  std::string csv = "n,scaled_mean_w1,se\n";
  for (const auto& r : rows) csv += std::to_string(r.n) + ',' + fmt17(r.scaled_mean) + ',' + fmt17(r.se) + '\n';
  if (o.out.empty()) {
    log << csv;
  } else {
    write_atomic(o.out, csv);
  }
  return kOk;
}

inline int cmd_estimate_stats(const Options& o, std::ostream& log) {
  const ChainModel model = load_model(o.model, o.x0);
  const std::uint64_t seed = env_seed().value_or(o.seed);
  const auto p_list = o.p_list.empty() ? std::vector<double>{2.0, 3.0} : o.p_list;
  const auto st = estimate_stats(model, p_list, o.a_list, o.outer, o.inner, seed, o.threads);
  nlohmann::json j = to_json(st);
  j["model"] = model.spec;
  const std::string text = j.dump(2) + "\n";
  if (o.out.empty()) {
    log << text;
  } else {
    write_atomic(o.out, text);
  }
  return kOk;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Concentration bounds for contracting iterated random functions"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--threads", o.threads, "Worker threads (0 = all cores)");

  auto* sim = app.add_subcommand("simulate", "Simulate one trajectory and write it as CSV");
  sim->add_option("--model", o.model, "Model name or model JSON file")->required();
  sim->add_option("--x0", o.x0, "Fixed starting state");
  sim->add_option("--n", o.n, "Number of states")->required()->check(CLI::PositiveNumber);
  sim->add_option("--seed", o.seed, "RNG seed");
  sim->add_option("--out", o.out, "Output CSV (stdout when omitted)");

  auto* bnd = app.add_subcommand("bounds", "Evaluate tail bounds on a grid");
  bnd->add_option("--params", o.params, "BoundParams JSON")->required();
  bnd->add_option("--grid", o.grid, "start:stop:step")->required();
  bnd->add_option("--families", o.families, "Restrict to these families");
  bnd->add_option("--out", o.out, "Output CSV (stdout when omitted)");

  auto* ver = app.add_subcommand("verify", "Check bound dominance by Monte Carlo");
  ver->add_option("--config", o.config, "Experiment JSON")->required();
  ver->add_option("--report", o.report, "Report CSV (overrides the config)");
  ver->add_option("--summary", o.summary, "Summary JSON (overrides the config)");

  auto* rat = app.add_subcommand("rates", "Scan sqrt(n) E W1(mu_n, mu) over n");
  rat->add_option("--model", o.model, "Model name or model JSON file")->required();
  rat->add_option("--n-list", o.n_list, "Sample sizes")->required()->delimiter(',');
  rat->add_option("--replications", o.replications, "Replications per n")->check(CLI::PositiveNumber);
  rat->add_option("--seed", o.seed, "RNG seed");
  rat->add_option("--out", o.out, "Output CSV (stdout when omitted)");

  auto* est = app.add_subcommand("estimate-stats", "Estimate moments of the dominating variables");
  est->add_option("--model", o.model, "Model name or model JSON file")->required();
  est->add_option("--x0", o.x0, "Fixed starting state");
  est->add_option("--outer", o.outer, "Outer samples")->check(CLI::PositiveNumber);
  est->add_option("--inner", o.inner, "Inner samples")->check(CLI::PositiveNumber);
  est->add_option("--p", o.p_list, "Moment orders")->delimiter(',');
  est->add_option("--a", o.a_list, "Laplace parameters")->delimiter(',');
  est->add_option("--seed", o.seed, "RNG seed");
  est->add_option("--out", o.out, "Output JSON (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*sim) return cmd_simulate(o, out);
    if (*bnd) return cmd_bounds(o, out);
    if (*ver) return cmd_verify(o, out);
    if (*rat) return cmd_rates(o, out);
    if (*est) return cmd_estimate_stats(o, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DomainError& e) {
    err << "invalid argument: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericOverflow& e) {
    err << "numeric overflow at step " << e.step() << ": " << e.what() << "\n";
    return kRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kConfigError;
}

}  // namespace irf::cli
