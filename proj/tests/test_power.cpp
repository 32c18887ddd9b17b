#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>

#include "smartcrt/power.hpp"

using namespace smartcrt;

namespace {

SampleSizeInputs adept_inputs(int m, double delta, double rho, double p1 = 0.2,
                              double alpha = 0.05, double power = 0.9) {
  SampleSizeInputs in;
  in.design = DesignKind::Adept;
  in.m = m;
  in.delta = delta;
  in.rho = rho;
  in.p1 = p1;
  in.alpha = alpha;
  in.power = power;
  return in;
}

}  // namespace

TEST_CASE("normal quantiles") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963985).epsilon(1e-8));
  CHECK(normal_quantile(0.9) == doctest::Approx(1.281551566).epsilon(1e-8));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).scale(1.0));
  CHECK(normal_cdf(normal_quantile(0.31)) == doctest::Approx(0.31).epsilon(1e-12));
  CHECK_THROWS_AS(normal_quantile(0.0), std::invalid_argument);
}

TEST_CASE("reference sample sizes, no covariate") {
  // (m, delta, rho) -> N under nearest rounding.
  const std::array<std::tuple<int, double, double, long>, 8> rows = {{
      {5, 0.2, 0.01, 306},
      {20, 0.2, 0.01, 88},
      {5, 0.5, 0.01, 49},
      {10, 0.5, 0.01, 26},
      {5, 0.2, 0.1, 412},
      {20, 0.2, 0.1, 213},
      {5, 0.5, 0.1, 66},
      {20, 0.5, 0.1, 34},
  }};
  for (const auto& [m, delta, rho, expected] : rows) {
    CHECK(required_clusters(adept_inputs(m, delta, rho)).n == expected);
  }
  // Ceiling is the conservative mode; it breaks exactly the 213 and 34 rows.
  SampleSizeInputs in = adept_inputs(20, 0.2, 0.1);
  in.rounding = Rounding::Ceiling;
  CHECK(required_clusters(in).n == 214);
  in = adept_inputs(20, 0.5, 0.1);
  in.rounding = Rounding::Ceiling;
  CHECK(required_clusters(in).n == 35);
}

TEST_CASE("reference sample sizes with a covariate") {
  auto with_cov = [](int m, double delta, double rho_star, double cor2) {
    SampleSizeInputs in = adept_inputs(m, delta, rho_star);
    in.cor2_yx = cor2;
    return in;
  };
  CHECK(required_clusters(with_cov(5, 0.2, 0.01, 0.238)).n == 233);
  CHECK(required_clusters(with_cov(5, 0.5, 0.01, 0.043)).n == 47);
  CHECK(required_clusters(with_cov(10, 0.5, 0.01, 0.066)).n == 24);
  CHECK(required_clusters(with_cov(5, 0.5, 0.1, 0.043)).n == 63);

  // Factor breakdown is exposed for audit.
  const auto r = required_clusters(with_cov(5, 0.2, 0.01, 0.238));
  CHECK(r.vif == doctest::Approx(1.04));
  CHECK(r.rerand == doctest::Approx(1.4));
  CHECK(r.cov_reduction == doctest::Approx(0.762));
  CHECK(r.formula == "adept-covariate");
  CHECK(r.n_raw == doctest::Approx(r.base * r.vif * r.rerand * r.cov_reduction));
}

TEST_CASE("detectable effect size") {
  SampleSizeInputs in = adept_inputs(10, 0.0, 0.01, 0.2, 0.05, 0.8);
  const double delta = detectable_effect_size(in, 60);
  CHECK(delta == doctest::Approx(0.2826).epsilon(2e-3));
  CHECK(delta > 0.281);
  CHECK(delta < 0.284);

  // Ceiling-mode round trip never exceeds the budget.
  in.delta = delta;
  in.rounding = Rounding::Ceiling;
  CHECK(required_clusters(in).n <= 60);

  // Strictly decreasing in N.
  double prev = 10.0;
  for (long n = 20; n <= 200; n += 10) {
    const double d = detectable_effect_size(in, n);
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("prototypical formula") {
  SampleSizeInputs in;
  in.design = DesignKind::Prototypical;
  in.m = 5;
  in.delta = 0.5;
  in.rho = 0.0;
  in.p1 = 1.0;
  in.p_neg1 = 1.0;
  // No re-randomization: matches the two-arm cluster-RCT count.
  const auto r = required_clusters(in);
  CHECK(r.rerand == doctest::Approx(1.0));
  const double z = normal_quantile(0.9) + normal_quantile(0.975);
  CHECK(r.n == std::lround(4.0 * z * z / (5 * 0.25)));

  // Prototypical needs at least as many clusters as ADEPT, equal when
  // p_neg1 = 1.
  for (double p_neg1 : {1.0, 0.6, 0.3}) {
    SampleSizeInputs prot = in;
    prot.p1 = 0.2;
    prot.p_neg1 = p_neg1;
    prot.rho = 0.01;
    prot.delta = 0.2;
    SampleSizeInputs adept = adept_inputs(5, 0.2, 0.01);
    if (p_neg1 == 1.0)
      CHECK(required_clusters(prot).n == required_clusters(adept).n);
    else
      CHECK(required_clusters(prot).n >= required_clusters(adept).n);
  }
}

TEST_CASE("monotonicity of N") {
  const auto base = adept_inputs(5, 0.2, 0.01);
  auto n_of = [](SampleSizeInputs in) { return required_clusters(in).n; };

  SampleSizeInputs larger_delta = base;
  larger_delta.delta = 0.3;
  CHECK(n_of(larger_delta) <= n_of(base));

  SampleSizeInputs larger_p1 = base;
  larger_p1.p1 = 0.6;
  CHECK(n_of(larger_p1) <= n_of(base));

  SampleSizeInputs larger_rho = base;
  larger_rho.rho = 0.05;
  CHECK(n_of(larger_rho) >= n_of(base));

  SampleSizeInputs more_power = base;
  more_power.power = 0.95;
  CHECK(n_of(more_power) >= n_of(base));

  SampleSizeInputs with_cov = base;
  with_cov.cor2_yx = 0.2;
  CHECK(n_of(with_cov) <= n_of(base));

  // Zero correlation reduces to the no-covariate formula exactly.
  SampleSizeInputs zero_cov = base;
  zero_cov.cor2_yx = 0.0;
  CHECK(required_clusters(zero_cov).n_raw ==
        doctest::Approx(required_clusters(base).n_raw).epsilon(1e-15));

  // m = 1: no cluster inflation regardless of rho.
  SampleSizeInputs single = base;
  single.m = 1;
  single.rho = 0.3;
  CHECK(required_clusters(single).vif == doctest::Approx(1.0));

  // Ceiling mode rounds up by at most one cluster relative to nearest.
  SampleSizeInputs ceil_in = base;
  ceil_in.rounding = Rounding::Ceiling;
  const long diff = required_clusters(ceil_in).n - required_clusters(base).n;
  CHECK(diff >= 0);
  CHECK(diff <= 1);
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(required_clusters(adept_inputs(5, 0.0, 0.01)), std::invalid_argument);
  CHECK_THROWS_AS(required_clusters(adept_inputs(0, 0.2, 0.01)), std::invalid_argument);
  SampleSizeInputs bad_cor = adept_inputs(5, 0.2, 0.01);
  bad_cor.cor2_yx = 1.2;
  CHECK_THROWS_AS(required_clusters(bad_cor), std::invalid_argument);
  SampleSizeInputs bad_rho = adept_inputs(5, 0.2, 1.0);
  CHECK_THROWS_AS(required_clusters(bad_rho), std::invalid_argument);
  CHECK_THROWS_AS(detectable_effect_size(adept_inputs(5, 0.2, 0.01), 0),
                  std::invalid_argument);
}

TEST_CASE("conditional ICC") {
  CHECK(rho_conditional(0.17, 0.0) == doctest::Approx(0.17));
  CHECK(rho_conditional(0.2456, 0.238) == doctest::Approx(0.010).epsilon(0.1));
  CHECK(rho_conditional(0.2456, 0.238) ==
        doctest::Approx((0.2456 - 0.238) / (1.0 - 0.238)).epsilon(1e-15));
  // Exact algebraic round trip.
  for (double rho : {0.01, 0.1, 0.33}) {
    for (double cor2 : {0.0, 0.043, 0.238, 0.7}) {
      CHECK(rho_unconditional(rho_conditional(rho, cor2), cor2) ==
            doctest::Approx(rho).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(rho_conditional(0.1, 1.0), std::invalid_argument);
}

TEST_CASE("variance bounds and the generic N equation") {
  CHECK(tau2_bound(64.0, 0.01, 5, 0.2, true) == doctest::Approx(47.9232).epsilon(1e-12));
  // p = 1 removes the re-randomization inflation.
  CHECK(tau2_bound(10.0, 0.05, 8, 1.0, true) ==
        doctest::Approx(tau2_bound(10.0, 0.05, 8, 1.0, false)));
  CHECK(tau2_bound(9.0, 0.0, 1, 0.4, true) == doctest::Approx(2.0 * 1.6 * 9.0));

  // Plugging the two bounds reproduces the closed-form ADEPT count exactly.
  const double sigma2 = 64.0, rho = 0.01, p1 = 0.2;
  const int m = 5;
  const double t_rerand = tau2_bound(sigma2, rho, m, p1, true);
  const double t_single = tau2_bound(sigma2, rho, m, p1, false);
  const long n = required_clusters_from_tau(t_rerand, t_single, 0.2, sigma2, 0.05, 0.9);
  CHECK(n == required_clusters(adept_inputs(m, 0.2, rho)).n);

  // Equal non-rerandomized bounds give the two-arm cluster-RCT count.
  const long rct = required_clusters_from_tau(t_single, t_single, 0.2, sigma2, 0.05, 0.9);
  SampleSizeInputs two_arm = adept_inputs(m, 0.2, rho, 1.0);
  CHECK(rct == required_clusters(two_arm).n);

  // Asymmetric variances land between the symmetric extremes.
  const double lo = 40.0, hi = 60.0;
  const long n_lo = required_clusters_from_tau(lo, lo, 0.2, sigma2, 0.05, 0.9);
  const long n_hi = required_clusters_from_tau(hi, hi, 0.2, sigma2, 0.05, 0.9);
  const long n_mix = required_clusters_from_tau(lo, hi, 0.2, sigma2, 0.05, 0.9);
  CHECK(n_mix >= n_lo);
  CHECK(n_mix <= n_hi);
}

TEST_CASE("conditional covariance condition") {
  CellMoments equal;
  equal.mu_r = 5.0;
  equal.mu_nr = 3.0;
  equal.var_r = equal.var_nr = 2.0;
  equal.icc_r = equal.icc_nr = 0.1;
  equal.p_response = 0.2;
  const auto eq = check_assumption2(equal);
  CHECK(eq.holds);
  CHECK(eq.lhs == doctest::Approx(eq.rhs));

  CellMoments inflated = equal;
  inflated.mu_r = inflated.mu_nr = 4.0;
  inflated.var_nr = 20.0;
  inflated.var_r = 2.0;
  CHECK_FALSE(check_assumption2(inflated).holds);

  // Regimen (1,1) responder/non-responder cells of the correct preset.
  CellMoments preset;
  preset.mu_r = 34.71;
  preset.mu_nr = 32.71;
  preset.var_r = preset.var_nr = 63.36;
  preset.icc_r = preset.icc_nr = 0.0;
  preset.p_response = 0.2;
  CHECK(check_assumption2(preset).holds);
}

TEST_CASE("conservative cluster size") {
  const std::array<int, 4> sizes = {12, 5, 9, 30};
  CHECK(conservative_cluster_size(sizes) == 5);
  CHECK_THROWS_AS(conservative_cluster_size(std::array<int, 0>{}), std::invalid_argument);
}
