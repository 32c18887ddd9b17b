#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smartcrt/data.hpp"
#include "smartcrt/design.hpp"

namespace smartcrt {

// Regressor layout of the marginal mean model.
//   ADEPT:         (1, a1, a2*I{a1=1}, x1..xp),      q = 3
//   Prototypical:  (1, a1, a2, a1*a2, x1..xp),       q = 4
// theta = (beta, eta) has length q + p.
struct MarginalMeanSpec {
  DesignKind design = DesignKind::Adept;
  std::size_t p = 0;

  std::size_t q() const { return design == DesignKind::Adept ? 3u : 4u; }
  std::size_t dim() const { return q() + p; }
};

// One design-matrix row, i.e. d mu / d theta for this regimen and covariate
// vector. For the ADEPT regimen (-1,.) the a2 column is 0.
Eigen::RowVectorXd regressor_row(const EmbeddedDtr& dtr, std::span<const double> x,
                                 const MarginalMeanSpec& spec);

// Treatment columns only, covariate entries zero. Contrasts between regimens
// are differences of these.
Eigen::VectorXd regressor_base(const EmbeddedDtr& dtr, const MarginalMeanSpec& spec);

struct DtrCovariance {
  double sigma2 = 1.0;
  double rho = 0.0;
};

// Exchangeable working covariance V(a1,a2,m) = sigma2 * Exch_m(rho), one
// entry per embedded regimen (embedded_dtrs order). `shared` marks that the
// per-regimen estimates were averaged into a single common pair.
struct WorkingCovariance {
  std::vector<DtrCovariance> per_dtr;
  bool shared = false;

  static WorkingCovariance identity(std::size_t n_dtrs) {
    WorkingCovariance v;
    v.per_dtr.assign(n_dtrs, DtrCovariance{});
    return v;
  }
};

struct FitOptions {
  bool shared_cov = false;
  // Number of working-covariance updates after the initial identity-V solve.
  // Two updates match the reference implementation steps; gains beyond two
  // are negligible.
  int iterations = 2;
};

struct FitResult {
  MarginalMeanSpec spec;
  Eigen::VectorXd theta;        // (beta, eta)
  Eigen::MatrixXd sigma_theta;  // Var(theta_hat) = Sigma_hat / N, symmetric PSD
  WorkingCovariance working;
  std::size_t n_clusters = 0;
  int iterations = 0;
  std::vector<std::string> warnings;

  Eigen::VectorXd std_errors() const;
};

struct ContrastResult {
  Eigen::VectorXd c;
  double estimate = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  double p_value = 1.0;  // two-sided standard-normal tail
};

// Exact solve of the weighted-and-replicated normal equations: each cluster
// contributes one replicate per consistent regimen, carrying its inverse
// probability weight and that regimen's design rows, with V applied through
// the closed-form exchangeable inverse. Throws std::runtime_error when a
// regimen has no consistent cluster or the system is singular.
Eigen::VectorXd solve_weighted_ee(const TrialDataset& dataset,
                                  const MarginalMeanSpec& spec,
                                  const WorkingCovariance& v);

// Weighted, indicator-restricted moment estimators of the per-regimen
// residual variance and ICC from residuals at `theta`. The ICC is clamped to
// (-1/(m_max - 1), 1) so every Exch matrix stays positive definite; clamps
// and degenerate cases (regimens with only size-1 clusters, zero residual
// variance) are reported through `warnings`.
WorkingCovariance estimate_working_cov(const TrialDataset& dataset,
                                       const MarginalMeanSpec& spec,
                                       const Eigen::VectorXd& theta, bool shared,
                                       std::vector<std::string>* warnings = nullptr);

// Identity-V solve, then `iterations` rounds of covariance re-estimation and
// re-solve, then the plug-in sandwich covariance at the final estimates.
FitResult fit(const TrialDataset& dataset, const MarginalMeanSpec& spec,
              const FitOptions& options = {});

// Plug-in sandwich J^{-1} A J^{-1} divided by N, symmetrized.
Eigen::MatrixXd sandwich_covariance(const TrialDataset& dataset,
                                    const MarginalMeanSpec& spec,
                                    const Eigen::VectorXd& theta,
                                    const WorkingCovariance& v);

// Univariate Wald test of H0: c' theta = 0. Throws on zero variance along c.
ContrastResult wald_test(const FitResult& fit, const Eigen::VectorXd& c);

struct DtrMean {
  EmbeddedDtr dtr;
  double estimate = 0.0;
  double std_error = 0.0;
};

// Estimated marginal mean under each embedded regimen at covariate value x
// (zeros when empty), with standard errors from the matching contrast.
std::vector<DtrMean> dtr_means(const FitResult& fit, std::span<const double> x = {});

// Builds a contrast vector from a regimen comparison label ("(1,1)-vs-(-1,.)"),
// an averaged comparison ("stage1", "stage2"), or an explicit comma-separated
// vector of length q or q+p (padded with zeros over the covariates).
Eigen::VectorXd contrast_vector(const std::string& text, const MarginalMeanSpec& spec);

// JSON serialization: {theta, se, cov, working, contrasts, ...} under the
// "smart-cluster/v1" schema tag.
std::string fit_to_json(const FitResult& fit,
                        const std::vector<std::pair<std::string, ContrastResult>>& contrasts);

}  // namespace smartcrt
