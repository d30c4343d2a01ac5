#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "irf/bounds.hpp"

using namespace irf;

namespace {

double numeric_derivative(const std::function<double(double)>& f, double t) {
  const double h = 1e-6 * std::max(t, 1e-3);
  return (f(t + h) - f(t - h)) / (2.0 * h);
}

double direct_k(std::size_t k, double rho) {
  double acc = 0.0;
  for (std::size_t i = 0; i <= k; ++i) acc += std::pow(rho, static_cast<double>(i));
  return acc;
}

}  // namespace

TEST(KRho, Examples) {
  EXPECT_EQ(k_rho(0, 0.7), 1.0);
  EXPECT_DOUBLE_EQ(k_rho(2, 0.5), 1.75);
  EXPECT_EQ(k_rho(9, 0.0), 1.0);
  EXPECT_THROW(k_rho(3, 1.0), DomainError);
}

TEST(KRho, NearOneUsesSum) {
  const double rho = 1.0 - 1e-8;
  EXPECT_NEAR(k_rho(1000, rho), direct_k(1000, rho), 1e-10);
}

TEST(KRho, ClosedFormMatchesSumOnGrid) {
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) {
      const std::size_t k = static_cast<std::size_t>(i * 5);
      const double rho = j / 20.0;
      EXPECT_NEAR(k_rho(k, rho), direct_k(k, rho), 1e-12 * direct_k(k, rho));
    }
}

TEST(Bernstein, MgfExamples) {
  const Horizon h{10, 0.0};
  const BernsteinConstants c{0.0, 2.0, 0.5};
  EXPECT_EQ(bernstein_mgf(0.0, h, c), 1.0);
  const double t = 0.3;
  EXPECT_NEAR(bernstein_mgf(t, h, c), std::exp(t * t * 9.0 * 2.0 / (2.0 * (1.0 - t * 0.5))), 1e-12);
  EXPECT_EQ(bernstein_mgf(2.0, h, c), kInf);
  EXPECT_THROW(bernstein_mgf(-0.1, h, c), DomainError);
  // V = 1, delta = M: value at t = 1/(2 delta) is exp(1/(4 delta^2)).
  const Horizon h1{2, 0.0};
  const BernsteinConstants c1{0.0, 1.0, 0.8};
  EXPECT_NEAR(bernstein_mgf(1.0 / 1.6, h1, c1), std::exp(1.0 / (4.0 * 0.64)), 1e-14);
}

TEST(Bernstein, TailExamples) {
  const Horizon h{20, 0.3};
  const BernsteinConstants c{0.5, 1.0, 0.2};
  EXPECT_EQ(bernstein_tail(0.0, h, c), 1.0);
  for (double x : {0.1, 1.0, 10.0}) EXPECT_LE(bernstein_log_tail(x, 1.0, 0.5), bernstein_log_tail_weak(x, 1.0, 0.5));
  EXPECT_EQ(bernstein_tail(1.0, h, BernsteinConstants{0.0, 0.0, 1.0}), 0.0);
}

TEST(Bernstein, MinimizerZeroesDerivative) {
  for (double x : {0.1, 1.0, 10.0})
    for (double v : {0.5, 1.0, 4.0})
      for (double d : {0.1, 0.5, 2.0}) {
        const double t = bernstein_tmin(x, v, d);
        ASSERT_LT(t * d, 1.0);
        const double g = numeric_derivative([&](double s) { return bernstein_objective(s, x, v, d); }, t);
        EXPECT_LE(std::abs(g), 1e-8 * x) << x << " " << v << " " << d;
        EXPECT_NEAR(bernstein_objective(t, x, v, d), bernstein_log_tail(x, v, d), 1e-10 * (1.0 + x * x));
      }
}

TEST(Cramer, MinimizerZeroesDerivative) {
  for (double x : {0.1, 1.0, 10.0})
    for (double k : {0.5, 1.0, 4.0})
      for (double d : {0.1, 0.5, 2.0}) {
        const double t = cramer_tmin(x, k, d);
        ASSERT_LT(t, d);
        const double g = numeric_derivative([&](double s) { return cramer_objective(s, x, k, d); }, t);
        EXPECT_LE(std::abs(g), 1e-8 * x);
        EXPECT_NEAR(cramer_objective(t, x, k, d), cramer_log_tail(x, k, d), 1e-10 * (1.0 + x * x * d * d));
      }
}

TEST(Cramer, IidReductionAndMgf) {
  const Horizon h{12, 0.0};
  const CramerConstants c{0.7, 1.5, 2.0};
  const auto s = cramer_scale(h, c);
  EXPECT_NEAR(s.k, 2.0 * std::exp(-2.0) * (1.5 + 11.0 * 2.0), 1e-12);
  EXPECT_EQ(s.delta, 0.7);
  EXPECT_EQ(cramer_tail(0.0, h, c), 1.0);
  EXPECT_EQ(cramer_mgf(0.0, h, c), 1.0);
  EXPECT_EQ(cramer_mgf(0.7, h, c), kInf);
  EXPECT_THROW(cramer_scale(h, CramerConstants{0.7, 0.5, 2.0}), DomainError);
}

TEST(LiuWatbled, Constants) {
  EXPECT_DOUBLE_EQ(lw_constants(2.0, 3.0, 0.0).a1, 2.0);
  EXPECT_DOUBLE_EQ(lw_constants(1.0, 2.0, 0.5).a1, 0.25);
  for (double a : {0.3, 2.0})
    for (double p : {1.5, 2.0, 4.0})
      for (double rho : {0.0, 0.4, 0.9}) {
        const auto c = lw_constants(a, p, rho);
        EXPECT_NEAR(std::pow(c.q * c.tau, 1.0 / c.q) * std::pow(p * a, 1.0 / p) * (1.0 - rho), 1.0, 1e-12);
        EXPECT_NEAR(std::pow(c.q * c.tau, 1.0 / c.q) * std::pow(p * c.a1, 1.0 / p), 1.0, 1e-12);
      }
}

TEST(SemiExp, Regimes) {
  const Horizon h{30, 0.4};
  const SemiExpConstants c{0.5, 1.0, 1.0};
  EXPECT_EQ(semi_exp_tail(1e-9, h, c), 1.0);
  EXPECT_THROW(semi_exp_tail(-1.0, h, c), DomainError);
  const Horizon h0{30, 0.0};
  EXPECT_DOUBLE_EQ(semi_exp_k(h0, SemiExpConstants{0.5, 2.0, 3.0}), 2.0 + 29.0 * 3.0);
  for (double p : {0.2, 0.5, 0.8})
    for (double k2 : {0.5, 1.0, 3.0}) {
      const SemiExpConstants cc{p, 1.0, k2};
      const double split = semi_exp_split(h, cc);
      const double below = semi_exp_truncation(split * (1.0 - 1e-12), h, cc);
      EXPECT_NEAR(below, split, 1e-9 * split);
      EXPECT_EQ(semi_exp_truncation(split, h, cc), split);
    }
}

TEST(Rio, EllAndStar) {
  EXPECT_EQ(rio_ell_star(0.0), 0.0);
  EXPECT_EQ(rio_ell_star(1.0), kInf);
  EXPECT_GE(rio_ell_star(0.5), -0.75 * std::log(0.5) - 1e-9);
  // Series and closed form agree where both are accurate.
  const double t = 0.0999999;
  const double closed = (t - std::log(t) - 1.0) + t / std::expm1(t) + std::log(-std::expm1(-t));
  EXPECT_NEAR(rio_ell(t), closed, 1e-14);
  EXPECT_NEAR(rio_ell(40.0), rio_ell(40.0 + 1e-9), 1e-7);
}

TEST(Rio, YoungChain) {
  for (int i = 1; i <= 19; ++i) {
    const double x = 0.05 * i;
    const double is50 = (x * x - 2.0 * x) * std::log1p(-x);
    EXPECT_GE(rio_ell_star(x), is50 - 1e-9) << x;
    EXPECT_GE(is50, 2.0 * x * x - 1e-9) << x;
  }
}

TEST(Rio, TailForms) {
  const Horizon h{10, 0.5};
  const auto c = RioConstants::uniform(10, 0.3, 0.5);
  const auto s = rio_scale(h, c);
  EXPECT_EQ(rio_tail(0.0, h, c), 1.0);
  EXPECT_EQ(rio_closed_tail(0.0, h, c), 1.0);
  EXPECT_EQ(mcdiarmid_tail(0.0, h, c), 1.0);
  EXPECT_EQ(rio_closed_tail(s.d, h, c), 0.0);
  EXPECT_EQ(rio_tail(s.d * 1.01, h, c), 0.0);
  for (int i = 1; i < 50; ++i) {
    const double x = s.d * i / 50.0;
    EXPECT_LE(rio_tail(x, h, c), rio_closed_tail(x, h, c) * (1.0 + 1e-9));
    EXPECT_LE(rio_closed_tail(x, h, c), mcdiarmid_tail(x, h, c) * (1.0 + 1e-9));
  }
  EXPECT_THROW(rio_scale(h, RioConstants::uniform(10, -1.0, 0.5)), DomainError);
  EXPECT_THROW(rio_scale(h, RioConstants::uniform(9, 1.0, 0.5)), DomainError);
  EXPECT_EQ(rio_mgf(0.0, h, c), 1.0);
}

TEST(Bennett, Ordering) {
  for (double n : {5.0, 50.0})
    for (double v : {0.5, 1.0, 2.0})
      for (int i = 0; i <= 100; ++i) {
        const double x = n * i / 100.0;
        EXPECT_LE(log_bennett_h(n, x, v), log_bennett_b(x, v) + 1e-12);
        EXPECT_LE(log_bennett_b(x, v), log_bernstein_b1(x, v) + 1e-12);
      }
  EXPECT_EQ(bennett_h(5.0, 0.0, 1.0), 1.0);
  EXPECT_EQ(bennett_h(5.0, 5.1, 1.0), 0.0);
  EXPECT_TRUE(std::isfinite(log_bennett_h(5.0, 5.0, 1.0)));
}

TEST(FukNagaev, Examples) {
  const Horizon h{40, 0.5};
  EXPECT_EQ(fuk_nagaev_tail(0.0, 1.0, 2.0, h, 0.0), 1.0);
  EXPECT_THROW(fuk_nagaev_tail(1.0, 0.0, 2.0, h, 0.0), DomainError);
  const HoeffdingConstants hc{0.1, 0.2, 0.7};
  const double v = variance_proxy(h, hc.v1, hc.v2);
  for (double x : {0.5, 3.0, 10.0})
    EXPECT_DOUBLE_EQ(fuk_nagaev_tail(x, hc.m, v, h, 0.0), hoeffding_tail(x, h, hc));
}

TEST(FukNagaev, WeakRemainderTerm) {
  const Horizon h{100, 0.2};
  const FukNagaevConstants c{0.0, 1.0, 3.0, 1.0, 1.0, std::nullopt, std::nullopt};
  const double x = 200.0;
  const double y = 3.0 * x / (2.0 * 3.0 * k_rho(99, 0.2) * std::log(100.0));
  ASSERT_GT(y, 1.0);
  const double rest = (1.0 + 99.0) / (y * y * y);
  const double bh = hoeffding_tail(x, h, HoeffdingConstants{0.0, 1.0, y});
  const double total = weak_fuk_nagaev_tail(x, h, c);
  EXPECT_TRUE(std::isfinite(total));
  EXPECT_NEAR(total, std::min(1.0, bh + rest), 1e-12);
}

TEST(Fuk, Examples) {
  const Horizon h0{25, 0.0};
  // rho = 0, p = 2: A(2) = V and the polynomial term is 8 V / x^2.
  const FukConstants c{0.3, 0.6, 2.0, 0.3, 0.6};
  const double v = variance_proxy(h0, c.v1, c.v2);
  EXPECT_DOUBLE_EQ(fuk_a(h0, 2.0, c.a1, c.a2), v);
  const double x = 1000.0;
  const double expect = 8.0 * v / (x * x) + 2.0 * std::exp(-2.0 * x * x / (16.0 * std::exp(2.0) * v));
  EXPECT_NEAR(fuk_tail(x, h0, c), expect, 1e-15);
  EXPECT_LT(fuk_tail(1e12, h0, c), 1e-20);
  EXPECT_THROW(fuk_log_tail(-1.0, h0, c), DomainError);
}

TEST(Fuk, PolynomialTermScalesLikeNToOneMinusP) {
  const double p = 3.0;
  std::vector<double> ratio;
  for (std::size_t n : {100u, 1000u, 10000u}) {
    const Horizon h{n, 0.5};
    const double x = static_cast<double>(n) * 1.0;
    ratio.push_back(fuk_a(h, p, 1.0, 1.0) / std::pow(x, p));
  }
  EXPECT_NEAR(ratio[1] / ratio[0], std::pow(10.0, 1.0 - p), 0.05 * std::pow(10.0, 1.0 - p));
  EXPECT_NEAR(ratio[2] / ratio[1], std::pow(10.0, 1.0 - p), 0.01 * std::pow(10.0, 1.0 - p));
}

TEST(Moments, VonBahrEsseen) {
  EXPECT_DOUBLE_EQ(vbe_moment(Horizon{1, 0.5}, MomentConstants{1.5, 2.0, 7.0}), std::pow(2.0, 1.0 / 1.5));
  EXPECT_NEAR(vbe_moment(Horizon{9, 0.0}, MomentConstants{2.0, 1.0, 0.5}), std::sqrt(1.0 + 8 * 0.5), 1e-14);
  const Horizon h{7, 0.3};
  double direct = 1.5 * k_rho(6, 0.3);
  for (std::size_t k = 2; k <= 7; ++k) direct += 2.0 * 0.25 * k_rho(7 - k, 0.3);
  EXPECT_NEAR(vbe_moment(h, MomentConstants{1.0, 1.5, 0.25}), direct, 1e-13);
  EXPECT_THROW(vbe_moment(h, MomentConstants{2.5, 1.0, 1.0}), DomainError);
}

TEST(Moments, WeakVonBahrEsseen) {
  EXPECT_DOUBLE_EQ(weak_vbe_constant(1.5), 36.0);
  const Horizon h{10, 0.5};
  const MomentConstants c{1.5, 0.1, 0.1};
  EXPECT_NEAR(std::exp(weak_vbe_log_tail(20.0, h, c) - weak_vbe_log_tail(10.0, h, c)), std::pow(2.0, -1.5), 1e-14);
  EXPECT_LT(weak_vbe_tail(1e12, h, c), 1e-12);
  EXPECT_THROW(weak_vbe_constant(2.0), DomainError);
}

TEST(Moments, MarcinkiewiczZygmund) {
  EXPECT_DOUBLE_EQ(mz_moment(Horizon{1, 0.5}, MomentConstants{3.0, 8.0, 5.0}), 2.0);
  const Horizon h{15, 0.4};
  EXPECT_NEAR(mz_moment(h, MomentConstants{2.0, 0.3, 0.7}), std::sqrt(variance_proxy(h, 0.3, 0.7)), 1e-13);
  EXPECT_GE(mz_moment(Horizon{15, 0.5}, MomentConstants{3.0, 1.0, 1.0}),
            mz_moment(Horizon{15, 0.0}, MomentConstants{3.0, 1.0, 1.0}));
  EXPECT_THROW(mz_moment(h, MomentConstants{1.5, 1.0, 1.0}), DomainError);
}

TEST(Moments, Rosenthal) {
  // V = 1 with n = 2, rho = 0, V2 = 1.
  const Horizon h{2, 0.0};
  RosenthalConstants k{0.0, 1.0, 3.0, 1.0, 0.0};
  EXPECT_DOUBLE_EQ(rosenthal_moment(h, k).value, 60.0);
  k.c.reset();
  k.maxnorm = 0.2;
  EXPECT_LE(rosenthal_moment(h, k).value, rosenthal_at(3.0, h, k));
  const RosenthalConstants k2{0.0, 0.0, 2.0, 2.0, 0.5};
  EXPECT_NEAR(rosenthal_moment(h, k2).value, 120.0 * std::sqrt(2.0) * std::exp(1.0) * 0.5, 1e-12);
  EXPECT_THROW(rosenthal_moment(h, RosenthalConstants{0.0, 1.0, 3.0, 0.5, 0.0}), DomainError);
}

TEST(TailBounds, RangeAndMonotone) {
  BoundParams bp;
  bp.horizon = {30, 0.5};
  bp.bernstein = BernsteinConstants{0.1, 0.2, 0.3};
  bp.cramer = CramerConstants{0.5, 1.2, 1.5};
  bp.semi_exp = SemiExpConstants{0.5, 1.0, 1.0};
  bp.rio = RioConstants::uniform(30, 0.2, 0.5);
  bp.hoeffding = HoeffdingConstants{0.1, 0.2, 0.3};
  bp.fuk_nagaev = FukNagaevConstants{0.1, 0.2, 3.0, 0.1, 0.1, std::nullopt, std::nullopt};
  bp.fuk = FukConstants{0.1, 0.2, 3.0, 0.1, 0.1};
  bp.weak_vbe = MomentConstants{1.5, 0.1, 0.1};
  bp.liu_watbled = LiuWatbledConstants{1.0, 2.0, 0.5, 0.3};
  bp.subgaussian_c = 0.7;
  const auto bounds = tail_bounds(bp);
  EXPECT_EQ(bounds.size(), all_tail_families().size());
  for (const auto& b : bounds) {
    double prev = 1.0;
    for (int i = 0; i <= 400; ++i) {
      const double x = 0.25 * i;
      const double v = b(x);
      EXPECT_GE(v, 0.0) << b.family;
      EXPECT_LE(v, 1.0) << b.family;
      // semi_exp and liu_watbled switch regimes and the automatic Fuk-Nagaev level moves with x.
      if (b.family != "semi_exp" && b.family != "liu_watbled" && b.family != "fuk_nagaev") {
        EXPECT_LE(v, prev * (1.0 + 1e-12)) << b.family << " x=" << x;
      }
      prev = v;
    }
  }
}

TEST(TailBounds, EnvelopeAndSelection) {
  BoundParams bp;
  bp.horizon = {30, 0.5};
  bp.bernstein = BernsteinConstants{0.0, 0.25, 0.5};
  bp.hoeffding = HoeffdingConstants{0.0, 0.25, 0.5};
  const auto all = tail_bounds(bp);
  const auto only = select_families(all, {"hoeffding"});
  ASSERT_EQ(only.size(), 1u);
  EXPECT_EQ(envelope_tail(3.0, only).value, only[0](3.0));
  EXPECT_EQ(envelope_tail(0.0, all).value, 1.0);
  const auto env = envelope_tail(3.0, all);
  for (const auto& b : all) EXPECT_LE(env.value, b(3.0));
  EXPECT_THROW(select_families(all, {"nope"}), ConfigError);
  EXPECT_THROW(select_families(all, {"cramer"}), ConfigError);
}

TEST(BoundParamsJson, RoundTripAndErrors) {
  const nlohmann::json j = {{"n", 10},
                            {"rho", 0.5},
                            {"bernstein", {{"v1", 0.1}, {"v2", 0.2}, {"m", 0.3}}},
                            {"rio", {{"m1", 0.0}, {"m", 0.5}}},
                            {"rosenthal", {{"v2", 1.0}, {"p", 3.0}, {"maxnorm", 0.1}}}};
  const auto bp = bound_params_from_json(j);
  EXPECT_EQ(bp.rio->m.size(), 10u);
  EXPECT_EQ(bp.rio->m[0], 0.0);
  const auto again = bound_params_from_json(to_json(bp));
  EXPECT_EQ(to_json(again).dump(), to_json(bp).dump());
  EXPECT_THROW(bound_params_from_json({{"n", 10}, {"rho", 0.5}, {"extra", 1}}), ConfigError);
  EXPECT_THROW(bound_params_from_json({{"n", 10}, {"rho", 1.5}}), ConfigError);
  EXPECT_THROW(bound_params_from_json({{"n", 10}, {"rho", 0.5}, {"bernstein", {{"v2", 1.0}, {"m", -1.0}}}}),
               ConfigError);
  EXPECT_THROW(bound_params_from_json({{"n", 10}, {"rho", 0.5}, {"weak_vbe", {{"p", 2.5}, {"a2", 1.0}}}}),
               ConfigError);
}
