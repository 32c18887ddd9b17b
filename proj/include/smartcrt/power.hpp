#pragma once

#include <optional>
#include <span>
#include <string>

#include "smartcrt/design.hpp"

namespace smartcrt {

// Standard-normal helpers. The quantile is the Boost.Math implementation
// (accurate to machine precision, well beyond the 1e-8 the calculators need).
double normal_quantile(double p);
double normal_cdf(double x);
double normal_pdf(double x);

enum class Rounding { Nearest, Ceiling };

// Inputs for the between-regimen sample size formulae: comparisons of two
// embedded regimens with different first-stage treatments, common cluster
// size m. When `cor2_yx` is set the covariate-adjusted formula applies and
// `rho` is read as the conditional ICC rho*.
struct SampleSizeInputs {
  DesignKind design = DesignKind::Adept;
  int m = 1;
  double delta = 0.0;
  double rho = 0.0;
  double p1 = 1.0;
  double p_neg1 = 1.0;  // prototypical only
  double alpha = 0.05;
  double power = 0.9;
  std::optional<double> cor2_yx;
  Rounding rounding = Rounding::Nearest;
};

// N and the multiplicative factors it came from, kept apart for audit:
//   n_raw = base * vif * rerand * cov_reduction
struct SampleSizeResult {
  long n = 0;
  double n_raw = 0.0;
  double base = 0.0;           // 4 (z_beta + z_{alpha/2})^2 / (m delta^2)
  double vif = 0.0;            // 1 + (m-1) rho
  double rerand = 0.0;         // re-randomization inflation
  double cov_reduction = 1.0;  // 1 - Cor^2(Y,X)
  std::string formula;         // "adept[-covariate]" / "prototypical[-covariate]"
};

SampleSizeResult required_clusters(const SampleSizeInputs& in);

// Effect size detectable with n clusters; inverts the applicable formula.
// `in.delta` is ignored.
double detectable_effect_size(const SampleSizeInputs& in, long n);

// rho* = (rho - Cor^2) / (1 - Cor^2), and its inverse.
double rho_conditional(double rho, double cor2);
double rho_unconditional(double rho_star, double cor2);

// Upper bound on Var(sqrt(N) mu_hat) for one regimen: factor 2(2 - p) when
// the regimen's non-responders are re-randomized, factor 2 otherwise.
double tau2_bound(double sigma2, double rho, int m, double p_response,
                  bool rerandomized);

// N = (z_beta + z_{alpha/2})^2 (tau2_a + tau2_b) / (delta^2 sigma2_pooled),
// for use with regimen-specific variance estimates.
long required_clusters_from_tau(double tau2_a, double tau2_b, double delta,
                                double sigma2_pooled, double alpha, double power,
                                Rounding rounding = Rounding::Nearest);

// Responder / non-responder moments of one regimen.
struct CellMoments {
  double mu_r = 0.0, mu_nr = 0.0;
  double var_r = 1.0, var_nr = 1.0;
  double icc_r = 0.0, icc_nr = 0.0;
  double p_response = 0.5;
};

struct Assumption2Check {
  bool holds = false;
  double lhs = 0.0;
  double rhs = 0.0;
};

// Scalar sufficient condition for the conditional covariance inequality
// behind the re-randomization variance bound:
//   |(vR rR - vNR rNR) p + (muR - muNR)^2 p (1-2p)|
//     <= (vR - vNR) p + (muR - muNR)^2 p (1-2p)
Assumption2Check check_assumption2(const CellMoments& cells);

// Conservative single m for unequal cluster sizes: the minimum.
int conservative_cluster_size(std::span<const int> sizes);

}  // namespace smartcrt
