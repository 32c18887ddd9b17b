#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smartcrt/data.hpp"
#include "smartcrt/design.hpp"
#include "smartcrt/estimator.hpp"

namespace smartcrt {

struct CellParams {
  double mu = 0.0;
  double var = 1.0;
  double icc = 0.0;
};

// Cell-level generative model: one (mu, var, icc) triple per randomization
// cell, response probabilities per first-stage arm, and an optional standard
// normal cluster-level covariate entering the mean through eta (clipped at
// +-k when k is set). With a covariate the cell parameters are
// conditional-on-X quantities.
struct Scenario {
  DesignKind design = DesignKind::Adept;
  double p1 = 0.5;
  double p_neg1 = 0.5;
  std::vector<CellParams> cells;  // design_cells(design) order
  bool covariate = false;
  double eta = 0.0;
  std::optional<double> k;  // clip threshold; unset = linear

  const CellParams& cell(const TreatmentPath& path) const;
  double response_prob(int a1) const { return a1 == 1 ? p1 : p_neg1; }
  // Variance of the covariate term per unit eta: Var(X) = 1 when linear,
  // Var(f_k(X)) when clipped, 0 without a covariate.
  double covariate_basis_variance() const;
};

// Throws std::invalid_argument on missing cells, non-positive variances,
// cell ICCs outside [0, 1), or response probabilities outside (0, 1).
void validate_scenario(const Scenario& scenario);

Scenario scenario_from_json(const std::string& json_text);
std::string scenario_to_json(const Scenario& scenario);
Scenario read_scenario(const std::string& file_path);

// f_k: identity on [-k, k], clamped to +-k outside.
double clip_fk(double x, double k);

// Var(f_k(X)) for X ~ N(0,1): 2 Phi(k) - 1 - 2 k phi(k) + 2 k^2 (1 - Phi(k)).
double var_clipped_normal(double k);

struct MarginalMoments {
  double mean = 0.0;
  double variance = 1.0;
  double icc = 0.0;
};

// Regimen-level moments from the responder / non-responder cell mixture by
// the laws of total expectation and variance. Conditional on X when the
// scenario carries a covariate.
MarginalMoments mixture_moments(const Scenario& scenario, const EmbeddedDtr& dtr);

struct UnconditionalMoments {
  MarginalMoments moments;
  double cor2_yx = 0.0;  // implied eta^2 var_x / (sigma2* + eta^2 var_x)
};

// Adds the covariate contribution eta^2 var_x to variance and within-cluster
// covariance (the covariate is cluster-level and mean zero).
UnconditionalMoments unconditional_moments(const MarginalMoments& conditional,
                                           double eta, double var_x);

// Simulates a trial of n_clusters clusters of common size m; byte-identical
// for a fixed seed. Datasets carry the covariate as x1 when present.
TrialDataset generate_trial(const Scenario& scenario, std::size_t n_clusters,
                            std::size_t m, std::uint64_t seed);

// Same, with every cluster forced to follow `dtr` (its randomizations
// overridden; responder status still random). Samples the regimen's
// counterfactual outcome distribution for moment validation.
TrialDataset generate_trial_under_dtr(const Scenario& scenario, const EmbeddedDtr& dtr,
                                      std::size_t n_clusters, std::size_t m,
                                      std::uint64_t seed);

struct McPowerResult {
  double power = 0.0;
  double mc_se = 0.0;
  int failures = 0;
  int reps = 0;
  int rejections = 0;
};

struct McOptions {
  double alpha = 0.05;
  bool shared_cov = false;
  int iterations = 2;
  bool parallel = true;  // OpenMP when available
};

// Monte Carlo power for the Wald test of `contrast` (length q or q+p; the
// analysis model includes the covariate exactly when the scenario has one).
// Replication seeds derive from (master_seed, replication index) alone, so
// the parallel and serial paths return identical results. Replications whose
// fit fails are counted in `failures`, not silently dropped.
McPowerResult mc_power(const Scenario& scenario, std::size_t n_clusters, std::size_t m,
                       const Eigen::VectorXd& contrast, int reps,
                       std::uint64_t master_seed, const McOptions& options = {});

// Serial reference implementation, kept for testing and benchmarking the
// OpenMP path against.
McPowerResult mc_power_serial(const Scenario& scenario, std::size_t n_clusters,
                              std::size_t m, const Eigen::VectorXd& contrast, int reps,
                              std::uint64_t master_seed, const McOptions& options = {});

// Built-in scenario presets (see scenario_presets() for names).
std::vector<std::string> scenario_presets();
Scenario scenario_preset(const std::string& name);

}  // namespace smartcrt
