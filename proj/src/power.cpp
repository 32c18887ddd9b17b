#include "smartcrt/power.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace smartcrt {

namespace {
const boost::math::normal_distribution<double> kStdNormal{};

long round_n(double raw, Rounding rounding) {
  if (rounding == Rounding::Nearest) return std::lround(raw);
  // Guard against ceil() bumping values that are integral up to roundoff.
  return static_cast<long>(std::ceil(raw - 1e-9));
}

void check_common(const SampleSizeInputs& in, bool need_delta) {
  if (in.m < 1) throw std::invalid_argument("cluster size m must be >= 1");
  if (need_delta && !(in.delta > 0.0))
    throw std::invalid_argument("effect size delta must be > 0");
  if (!(in.rho >= 0.0 && in.rho < 1.0))
    throw std::invalid_argument("ICC rho must be in [0,1)");
  if (!(in.p1 > 0.0 && in.p1 <= 1.0))
    throw std::invalid_argument("response probability p1 must be in (0,1]");
  if (in.design == DesignKind::Prototypical && !(in.p_neg1 > 0.0 && in.p_neg1 <= 1.0))
    throw std::invalid_argument("response probability p_neg1 must be in (0,1]");
  if (!(in.alpha > 0.0 && in.alpha < 1.0))
    throw std::invalid_argument("alpha must be in (0,1)");
  if (!(in.power > 0.0 && in.power < 1.0))
    throw std::invalid_argument("power must be in (0,1)");
  if (in.cor2_yx && !(*in.cor2_yx >= 0.0 && *in.cor2_yx < 1.0))
    throw std::invalid_argument("Cor^2(Y,X) must be in [0,1)");
}

// Shared factor computation for the forward and inverted formulae.
SampleSizeResult factors(const SampleSizeInputs& in, double delta) {
  SampleSizeResult out;
  const double z = normal_quantile(in.power) + normal_quantile(1.0 - in.alpha / 2.0);
  out.base = 4.0 * z * z / (static_cast<double>(in.m) * delta * delta);
  out.vif = 1.0 + (static_cast<double>(in.m) - 1.0) * in.rho;
  out.rerand = in.design == DesignKind::Adept
                   ? 1.0 + (1.0 - in.p1) / 2.0
                   : 1.0 + ((1.0 - in.p1) + (1.0 - in.p_neg1)) / 2.0;
  out.cov_reduction = in.cor2_yx ? 1.0 - *in.cor2_yx : 1.0;
  out.formula = to_string(in.design) + (in.cor2_yx ? "-covariate" : "");
  out.n_raw = out.base * out.vif * out.rerand * out.cov_reduction;
  return out;
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("quantile probability must be in (0,1)");
  return boost::math::quantile(kStdNormal, p);
}

double normal_cdf(double x) { return boost::math::cdf(kStdNormal, x); }

double normal_pdf(double x) { return boost::math::pdf(kStdNormal, x); }

SampleSizeResult required_clusters(const SampleSizeInputs& in) {
  check_common(in, /*need_delta=*/true);
  SampleSizeResult out = factors(in, in.delta);
  out.n = round_n(out.n_raw, in.rounding);
  return out;
}

double detectable_effect_size(const SampleSizeInputs& in, long n) {
  check_common(in, /*need_delta=*/false);
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  // n = base(delta) * rest with base proportional to 1/delta^2, so
  // delta = sqrt(base(1) * rest / n).
  SampleSizeInputs unit = in;
  unit.delta = 1.0;
  const SampleSizeResult f = factors(unit, 1.0);
  return std::sqrt(f.n_raw / static_cast<double>(n));
}

double rho_conditional(double rho, double cor2) {
  if (!(cor2 >= 0.0 && cor2 < 1.0))
    throw std::invalid_argument("Cor^2(Y,X) must be in [0,1)");
  return (rho - cor2) / (1.0 - cor2);
}

double rho_unconditional(double rho_star, double cor2) {
  if (!(cor2 >= 0.0 && cor2 < 1.0))
    throw std::invalid_argument("Cor^2(Y,X) must be in [0,1)");
  return rho_star * (1.0 - cor2) + cor2;
}

double tau2_bound(double sigma2, double rho, int m, double p_response,
                  bool rerandomized) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be > 0");
  if (m < 1) throw std::invalid_argument("m must be >= 1");
  if (!(p_response > 0.0 && p_response <= 1.0))
    throw std::invalid_argument("response probability must be in (0,1]");
  const double md = static_cast<double>(m);
  if (!(rho >= -1.0 / std::max(md - 1.0, 1.0) && rho < 1.0))
    throw std::invalid_argument("rho outside the exchangeable range");
  const double factor = rerandomized ? 2.0 * (2.0 - p_response) : 2.0;
  return factor * sigma2 * (1.0 + (md - 1.0) * rho) / md;
}

long required_clusters_from_tau(double tau2_a, double tau2_b, double delta,
                                double sigma2_pooled, double alpha, double power,
                                Rounding rounding) {
  if (!(tau2_a > 0.0 && tau2_b > 0.0))
    throw std::invalid_argument("tau^2 terms must be > 0");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be > 0");
  if (!(sigma2_pooled > 0.0)) throw std::invalid_argument("sigma2 must be > 0");
  const double z = normal_quantile(power) + normal_quantile(1.0 - alpha / 2.0);
  const double raw = z * z * (tau2_a + tau2_b) / (delta * delta * sigma2_pooled);
  return round_n(raw, rounding);
}

Assumption2Check check_assumption2(const CellMoments& cells) {
  const double p = cells.p_response;
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("response probability must be in (0,1)");
  if (!(cells.var_r > 0.0 && cells.var_nr > 0.0))
    throw std::invalid_argument("cell variances must be > 0");
  const double gap2 = (cells.mu_r - cells.mu_nr) * (cells.mu_r - cells.mu_nr);
  const double mean_term = gap2 * p * (1.0 - 2.0 * p);
  Assumption2Check out;
  out.lhs = std::abs((cells.var_r * cells.icc_r - cells.var_nr * cells.icc_nr) * p +
                     mean_term);
  out.rhs = (cells.var_r - cells.var_nr) * p + mean_term;
  out.holds = out.lhs <= out.rhs;
  return out;
}

int conservative_cluster_size(std::span<const int> sizes) {
  if (sizes.empty()) throw std::invalid_argument("no cluster sizes given");
  int m = sizes[0];
  for (int s : sizes) {
    if (s < 1) throw std::invalid_argument("cluster sizes must be >= 1");
    m = std::min(m, s);
  }
  return m;
}

}  // namespace smartcrt
