#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/special_functions/beta.hpp>
#include <json.hpp>

#include "irf/bounds.hpp"
#include "irf/chain_models.hpp"
#include "irf/dominating.hpp"
#include "irf/errors.hpp"
#include "irf/functionals.hpp"
#include "irf/parallel.hpp"
#include "irf/rng.hpp"

namespace irf {

/// Disjoint stream domains: replication r of domain D uses stream (seed, D, r).
enum class SampleDomain : std::uint64_t { mean = 1, tail = 2, mgf = 3, moment = 4, rate = 5 };

/// f(X_1..X_n) for replications [first, first + count) of `domain`.
inline std::vector<double> sample_functional(const Functional& f, const ChainModel& model, std::size_t n,
                                             std::size_t count, std::uint64_t seed, SampleDomain domain,
                                             std::size_t first = 0, unsigned threads = 0) {
  f.check_model(model);
  std::vector<double> out(count);
  // Each worker keeps one trajectory buffer per block; results only depend on r.
  parallel_for(count, threads, [&](std::size_t i) {
    thread_local std::vector<State> traj;
    const std::size_t r = first + i;
    Stream s(seed, {static_cast<std::uint64_t>(domain), r});
    simulate_into(model, n, s, traj);
    out[i] = f.eval(traj, model);
  });
  return out;
}

struct MeanEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t replications = 0;
};

/// Welford mean and standard error, summed in replication order.
inline MeanEstimate mean_and_se(const std::vector<double>& v) {
  MeanEstimate m;
  m.replications = v.size();
  double m2 = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - m.mean;
    m.mean += d / static_cast<double>(i + 1);
    m2 += d * (v[i] - m.mean);
  }
  if (v.size() > 1) m.se = std::sqrt(m2 / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  return m;
}

/// E f over `replications` trajectories drawn from the centering domain, which
/// is disjoint from the tail-estimation streams.
inline MeanEstimate estimate_mean(const Functional& f, const ChainModel& model, std::size_t n,
                                  std::size_t replications, std::uint64_t seed, unsigned threads = 0) {
  if (replications < 2) throw DomainError("estimate_mean needs >= 2 replications");
  return mean_and_se(sample_functional(f, model, n, replications, seed, SampleDomain::mean, 0, threads));
}

/// Exceedance counts of S = f - center at nominal thresholds x, counted at
/// x - shift so that centering error cannot hide exceedances.
struct TailCurve {
  std::vector<double> thresholds;
  double shift = 0.0;
  std::vector<std::uint64_t> count_pos;  // S >= x - shift
  std::vector<std::uint64_t> count_neg;  // -S >= x - shift
  std::vector<std::uint64_t> count_abs;  // |S| >= x - shift
  std::uint64_t replications = 0;
  double center = 0.0;
  double center_se = 0.0;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t first_replication = 0;
};

/// Counts exceedances over replications [first, first + R).
inline TailCurve tail_curve(const Functional& f, const ChainModel& model, std::size_t n, std::size_t replications,
                            std::vector<double> thresholds, std::uint64_t seed, const MeanEstimate& center,
                            double shift_se = 4.0, unsigned threads = 0, std::size_t first = 0) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) throw DomainError("thresholds must be sorted");
  TailCurve c;
  c.thresholds = std::move(thresholds);
  c.shift = shift_se * center.se;
  c.center = center.mean;
  c.center_se = center.se;
  c.seed = seed;
  c.n = n;
  c.first_replication = first;
  c.replications = replications;
  const std::size_t k = c.thresholds.size();
  c.count_pos.assign(k, 0);
  c.count_neg.assign(k, 0);
  c.count_abs.assign(k, 0);
  const auto values = sample_functional(f, model, n, replications, seed, SampleDomain::tail, first, threads);
  for (double v : values) {
    const double s = v - c.center;
    for (std::size_t i = 0; i < k; ++i) {
      const double level = c.thresholds[i] - c.shift;
      if (s >= level) ++c.count_pos[i];
      if (-s >= level) ++c.count_neg[i];
      if (std::abs(s) >= level) ++c.count_abs[i];
    }
  }
  return c;
}

/// Adds the counts of two curves over disjoint replication ranges.
inline TailCurve merge(const TailCurve& a, const TailCurve& b) {
  if (a.thresholds != b.thresholds || a.shift != b.shift || a.center != b.center || a.seed != b.seed || a.n != b.n)
    throw DomainError("tail curves differ in thresholds, centering, seed or n");
  TailCurve c = a;
  c.replications = a.replications + b.replications;
  c.first_replication = std::min(a.first_replication, b.first_replication);
  for (std::size_t i = 0; i < c.thresholds.size(); ++i) {
    c.count_pos[i] += b.count_pos[i];
    c.count_neg[i] += b.count_neg[i];
    c.count_abs[i] += b.count_abs[i];
  }
  return c;
}

/// One-sided exact (Clopper-Pearson) upper confidence limit at level 1 - alpha.
inline double clopper_pearson_upper(std::uint64_t k, std::uint64_t r, double alpha) {
  if (r == 0 || k > r) throw DomainError("need 0 <= k <= R and R > 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (k == r) return 1.0;
  if (k == 0) return -std::expm1(std::log(alpha) / static_cast<double>(r));
  return boost::math::ibeta_inv(static_cast<double>(k + 1), static_cast<double>(r - k), 1.0 - alpha);
}

/// One-sided exact lower confidence limit at level 1 - alpha.
inline double clopper_pearson_lower(std::uint64_t k, std::uint64_t r, double alpha) {
  if (r == 0 || k > r) throw DomainError("need 0 <= k <= R and R > 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (k == 0) return 0.0;
  if (k == r) return std::exp(std::log(alpha) / static_cast<double>(r));
  return boost::math::ibeta_inv(static_cast<double>(k), static_cast<double>(r - k + 1), alpha);
}

enum class Verdict {
  pass,          // upper limit <= bound
  fail,          // lower limit > bound: the counts reject the bound at level alpha
  unresolved,    // bound between the two limits; R replications cannot decide
  inapplicable   // threshold outside the bound's validity range
};

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::unresolved: return "unresolved";
    case Verdict::inapplicable: return "inapplicable";
  }
  return "?";
}

struct ReportRow {
  std::string family;
  double x = 0.0;
  double emp_tail = 0.0;
  double cp_lower = 0.0;
  double cp_upper = 0.0;
  double bound = 1.0;
  Verdict verdict = Verdict::pass;
};

struct FamilyVerdict {
  std::string family;
  std::size_t pass = 0;
  std::size_t fail = 0;
  std::size_t unresolved = 0;
  std::size_t inapplicable = 0;
  bool passed = false;
};

struct VerificationReport {
  std::vector<ReportRow> rows;
  std::vector<FamilyVerdict> families;
  double alpha = 0.001;
  std::uint64_t replications = 0;
  bool passed = false;
};

inline Verdict judge(std::uint64_t k, std::uint64_t r, double alpha, double bound, double* lower, double* upper) {
  *upper = clopper_pearson_upper(k, r, alpha);
  *lower = clopper_pearson_lower(k, r, alpha);
  if (*upper <= bound) return Verdict::pass;
  // Deep thresholds put the bound below anything a handful of exceedances can
  // certify (1 - alpha^(1/R) even at zero count); only a lower limit above the
  // bound is evidence against it.
  return *lower > bound ? Verdict::fail : Verdict::unresolved;
}

/// Compares exact upper limits against each bound at every threshold. One-sided
/// families are judged on the larger of the two one-sided counts, two-sided
/// families on the |S| counts. A family passes with no fail and at least one
/// pass; the report passes when every family does.
inline VerificationReport check_dominance(const TailCurve& curve, const std::vector<TailBound>& bounds,
                                          double alpha) {
  if (curve.replications == 0) throw DomainError("empty tail curve");
  VerificationReport rep;
  rep.alpha = alpha;
  rep.replications = curve.replications;
  for (const auto& b : bounds) {
    FamilyVerdict fv;
    fv.family = b.family;
    for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
      ReportRow row;
      row.family = b.family;
      row.x = curve.thresholds[i];
      const std::uint64_t k = b.sides == Sides::one_sided ? std::max(curve.count_pos[i], curve.count_neg[i])
                                                          : curve.count_abs[i];
      row.emp_tail = static_cast<double>(k) / static_cast<double>(curve.replications);
      if (!b.applicable(row.x)) {
        row.verdict = Verdict::inapplicable;
        row.bound = std::numeric_limits<double>::quiet_NaN();
        row.cp_upper = clopper_pearson_upper(k, curve.replications, alpha);
        row.cp_lower = clopper_pearson_lower(k, curve.replications, alpha);
        ++fv.inapplicable;
      } else {
        row.bound = b(row.x);
        row.verdict = judge(k, curve.replications, alpha, row.bound, &row.cp_lower, &row.cp_upper);
        if (row.verdict == Verdict::pass) ++fv.pass;
        else if (row.verdict == Verdict::fail) ++fv.fail;
        else ++fv.unresolved;
      }
      rep.rows.push_back(row);
    }
    fv.passed = fv.fail == 0 && fv.pass > 0;
    rep.families.push_back(fv);
  }
  rep.passed = !rep.families.empty() &&
               std::all_of(rep.families.begin(), rep.families.end(), [](const FamilyVerdict& f) { return f.passed; });
  return rep;
}

struct MgfRow {
  double t = 0.0;
  int side = 1;  // +1 for E e^{tS}, -1 for E e^{-tS}
  double empirical = 1.0;
  double se = 0.0;
  double max_share = 0.0;
  bool fragile = false;
  std::string family;
  double bound = 1.0;
  bool passed = true;
};

struct NamedMgf {
  std::string family;
  std::function<double(double)> bound;  // +inf outside the valid range
};

/// Empirical E[exp(+-t S_n)] against MGF bounds. Rows whose empirical average
/// is dominated by one summand are flagged and left out of the verdict; the
/// comparison allows 3 standard errors.
inline std::vector<MgfRow> mgf_check(const Functional& f, const ChainModel& model, std::size_t n,
                                     std::size_t replications, const std::vector<double>& t_grid,
                                     std::uint64_t seed, double center, const std::vector<NamedMgf>& bounds,
                                     unsigned threads = 0) {
  const auto values = sample_functional(f, model, n, replications, seed, SampleDomain::mgf, 0, threads);
  std::vector<MgfRow> rows;
  for (double t : t_grid) {
    if (!(t >= 0.0)) throw DomainError("t must be >= 0");
    for (int side : {1, -1}) {
      std::vector<double> z(values.size());
      for (std::size_t i = 0; i < values.size(); ++i) z[i] = side * (values[i] - center);
      const auto lap = empirical_laplace(z, t);
      double m2 = 0.0;
      for (double v : z) {
        const double e = std::exp(t * v) - lap.value;
        m2 += e * e;
      }
      const double se = std::sqrt(m2 / static_cast<double>(z.size() - 1) / static_cast<double>(z.size()));
      for (const auto& b : bounds) {
        MgfRow row;
        row.t = t;
        row.side = side;
        row.empirical = lap.value;
        row.se = se;
        row.max_share = lap.max_share;
        row.fragile = t > 0.0 && lap.fragile;
        row.family = b.family;
        row.bound = b.bound(t);
        row.passed = row.fragile || row.empirical - 3.0 * se <= row.bound;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

struct MomentNorm {
  double estimate = 0.0;  // (mean |S|^p)^(1/p)
  double upper = 0.0;     // (mean + 3 SE)^(1/p)
};

/// Monte Carlo ||S||_p from centered values.
inline MomentNorm moment_norm(const std::vector<double>& centered, double p) {
  if (centered.size() < 2) throw DomainError("moment_norm needs >= 2 values");
  std::vector<double> z(centered.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::pow(std::abs(centered[i]), p);
  const auto m = mean_and_se(z);
  return {std::pow(m.mean, 1.0 / p), std::pow(m.mean + 3.0 * m.se, 1.0 / p)};
}

struct RateRow {
  std::size_t n = 0;
  double scaled_mean = 0.0;  // sqrt(n) E W1(mu_n, mu)
  double se = 0.0;
};

/// sqrt(n) times the Monte Carlo mean of W1(mu_n, mu) for each n.
inline std::vector<RateRow> w1_rate_scan(const ChainModel& model, const std::vector<std::size_t>& n_list,
                                         std::size_t replications, std::uint64_t seed, unsigned threads = 0) {
  if (!model.invariant_cdf) throw ConfigError("rate scan needs the model's invariant CDF");
  if (model.init_mode != InitMode::stationary) throw ConfigError("rate scan needs a stationary start");
  const Functional f = Functional::w1();
  std::vector<RateRow> rows;
  for (std::size_t idx = 0; idx < n_list.size(); ++idx) {
    const std::size_t n = n_list[idx];
    // n W1 per replication; divide by sqrt(n) to get sqrt(n) W1.
    auto v = sample_functional(f, model, n, replications, derive_seed(seed, {idx}), SampleDomain::rate, 0, threads);
    for (double& x : v) x /= std::sqrt(static_cast<double>(n));
    const auto m = mean_and_se(v);
    rows.push_back({n, m.mean, m.se});
  }
  return rows;
}

}  // namespace irf
