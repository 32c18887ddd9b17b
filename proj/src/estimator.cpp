#include "smartcrt/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace smartcrt {

Eigen::RowVectorXd regressor_row(const EmbeddedDtr& dtr, std::span<const double> x,
                                 const MarginalMeanSpec& spec) {
  if (x.size() != spec.p)
    throw std::invalid_argument("covariate vector of length " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(spec.p));
  Eigen::RowVectorXd row(spec.dim());
  if (spec.design == DesignKind::Adept) {
    row(0) = 1.0;
    row(1) = dtr.a1;
    row(2) = (dtr.a1 == 1 && dtr.a2) ? static_cast<double>(*dtr.a2) : 0.0;
  } else {
    if (!dtr.a2) throw std::invalid_argument("prototypical regimen without a2");
    row(0) = 1.0;
    row(1) = dtr.a1;
    row(2) = *dtr.a2;
    row(3) = dtr.a1 * *dtr.a2;
  }
  for (std::size_t k = 0; k < spec.p; ++k) row(spec.q() + k) = x[k];
  return row;
}

Eigen::VectorXd regressor_base(const EmbeddedDtr& dtr, const MarginalMeanSpec& spec) {
  const std::vector<double> zeros(spec.p, 0.0);
  return regressor_row(dtr, zeros, spec).transpose();
}

Eigen::VectorXd FitResult::std_errors() const {
  return sigma_theta.diagonal().cwiseMax(0.0).cwiseSqrt();
}

namespace {

// Per-(cluster, regimen) replicate: design matrix, outcomes, weight.
struct Replicate {
  Eigen::MatrixXd design;  // m x dim
  Eigen::VectorXd y;       // m
  double weight = 1.0;
  std::size_t dtr_index = 0;
};

std::vector<std::vector<Replicate>> build_replicates(const TrialDataset& dataset,
                                                     const MarginalMeanSpec& spec) {
  check_dataset(dataset);
  const auto dtrs = embedded_dtrs(dataset.design);
  std::vector<std::size_t> consistent_count(dtrs.size(), 0);

  std::vector<std::vector<Replicate>> per_cluster(dataset.n_clusters());
  for (std::size_t i = 0; i < dataset.n_clusters(); ++i) {
    const auto& cluster = dataset.clusters[i];
    const auto m = static_cast<Eigen::Index>(cluster.size());
    Eigen::VectorXd y(m);
    for (Eigen::Index j = 0; j < m; ++j) y(j) = cluster.individuals[j].y;
    const double w = known_weight(cluster.path, dataset.design);

    for (std::size_t d = 0; d < dtrs.size(); ++d) {
      if (!is_consistent(cluster.path, dtrs[d], dataset.design)) continue;
      ++consistent_count[d];
      Replicate rep;
      rep.design.resize(m, static_cast<Eigen::Index>(spec.dim()));
      for (Eigen::Index j = 0; j < m; ++j)
        rep.design.row(j) = regressor_row(dtrs[d], cluster.individuals[j].x, spec);
      rep.y = y;
      rep.weight = w;
      rep.dtr_index = d;
      per_cluster[i].push_back(std::move(rep));
    }
  }

  for (std::size_t d = 0; d < dtrs.size(); ++d)
    if (consistent_count[d] == 0)
      throw std::runtime_error("no clusters consistent with DTR " + dtrs[d].label());
  return per_cluster;
}

// Coefficients of the closed-form exchangeable inverse,
//   V^{-1} = 1/(sigma2 (1-rho)) [I - rho/(1+(m-1) rho) J].
struct ExchInverse {
  double scale;  // 1 / (sigma2 (1 - rho))
  double shave;  // rho / (1 + (m-1) rho)
};

ExchInverse exch_inverse(const DtrCovariance& v, Eigen::Index m) {
  if (!(v.sigma2 > 0.0)) throw std::runtime_error("working variance must be positive");
  const double denom = 1.0 + (static_cast<double>(m) - 1.0) * v.rho;
  if (!(v.rho < 1.0) || !(denom > 0.0))
    throw std::runtime_error("working ICC outside the positive-definite range");
  return {1.0 / (v.sigma2 * (1.0 - v.rho)), v.rho / denom};
}

// X' V^{-1} Y for the replicate's exchangeable V, O(m * dim).
Eigen::MatrixXd quad_form(const Replicate& rep, const ExchInverse& inv,
                          const Eigen::MatrixXd& rhs) {
  const Eigen::RowVectorXd colsum_d = rep.design.colwise().sum();
  const Eigen::RowVectorXd colsum_r = rhs.colwise().sum();
  return inv.scale * (rep.design.transpose() * rhs -
                      inv.shave * colsum_d.transpose() * colsum_r);
}

std::string deficient_cells_note(const TrialDataset& dataset) {
  const auto report = validate(dataset);
  std::string note;
  for (const auto& w : report.warnings) note += "; " + w;
  return note;
}

}  // namespace

Eigen::VectorXd solve_weighted_ee(const TrialDataset& dataset,
                                  const MarginalMeanSpec& spec,
                                  const WorkingCovariance& v) {
  const auto dtrs = embedded_dtrs(dataset.design);
  if (v.per_dtr.size() != dtrs.size())
    throw std::invalid_argument("working covariance has " +
                                std::to_string(v.per_dtr.size()) + " entries, expected " +
                                std::to_string(dtrs.size()));
  const auto replicates = build_replicates(dataset, spec);

  const auto k = static_cast<Eigen::Index>(spec.dim());
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
  for (const auto& cluster_reps : replicates) {
    for (const auto& rep : cluster_reps) {
      const auto inv = exch_inverse(v.per_dtr[rep.dtr_index], rep.design.rows());
      lhs.noalias() += rep.weight * quad_form(rep, inv, rep.design);
      rhs.noalias() += rep.weight * quad_form(rep, inv, rep.y);
    }
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
  lu.setThreshold(1e-10);
  if (!lu.isInvertible())
    throw std::runtime_error("singular weighted normal equations" +
                             deficient_cells_note(dataset));
  return lu.solve(rhs);
}

WorkingCovariance estimate_working_cov(const TrialDataset& dataset,
                                       const MarginalMeanSpec& spec,
                                       const Eigen::VectorXd& theta, bool shared,
                                       std::vector<std::string>* warnings) {
  if (theta.size() != static_cast<Eigen::Index>(spec.dim()))
    throw std::invalid_argument("theta has wrong length");
  const auto dtrs = embedded_dtrs(dataset.design);
  const auto replicates = build_replicates(dataset, spec);

  const std::size_t n_dtrs = dtrs.size();
  std::vector<double> sq_sum(n_dtrs, 0.0), sq_denom(n_dtrs, 0.0);
  std::vector<double> pair_sum(n_dtrs, 0.0), pair_denom(n_dtrs, 0.0);
  for (const auto& cluster_reps : replicates) {
    for (const auto& rep : cluster_reps) {
      const double m = static_cast<double>(rep.design.rows());
      const Eigen::VectorXd resid = rep.y - rep.design * theta;
      const double sq = resid.squaredNorm();
      const double total = resid.sum();
      const std::size_t d = rep.dtr_index;
      sq_sum[d] += rep.weight * sq;
      sq_denom[d] += rep.weight * m;
      // sum_{j != l} e_j e_l = (sum e)^2 - sum e^2
      pair_sum[d] += rep.weight * (total * total - sq);
      pair_denom[d] += rep.weight * m * (m - 1.0);
    }
  }

  auto warn = [&](const std::string& msg) {
    if (warnings) warnings->push_back(msg);
  };

  std::vector<double> sigma2(n_dtrs), rho(n_dtrs);
  double max_sigma2 = 0.0;
  for (std::size_t d = 0; d < n_dtrs; ++d) {
    sigma2[d] = sq_sum[d] / sq_denom[d];
    max_sigma2 = std::max(max_sigma2, sigma2[d]);
  }
  for (std::size_t d = 0; d < n_dtrs; ++d) {
    const double floor = max_sigma2 > 0.0 ? 1e-12 * max_sigma2 : 1.0;
    if (sigma2[d] < floor) {
      warn("DTR " + dtrs[d].label() +
           ": residual variance estimate is (near) zero; floored for the "
           "working covariance");
      sigma2[d] = floor;
    }
    if (pair_denom[d] > 0.0) {
      rho[d] = pair_sum[d] / (sigma2[d] * pair_denom[d]);
    } else {
      rho[d] = 0.0;
      warn("DTR " + dtrs[d].label() +
           ": all consistent clusters have size 1; working ICC set to 0");
    }
  }

  if (shared) {
    const double s = std::accumulate(sigma2.begin(), sigma2.end(), 0.0) / n_dtrs;
    const double r = std::accumulate(rho.begin(), rho.end(), 0.0) / n_dtrs;
    std::fill(sigma2.begin(), sigma2.end(), s);
    std::fill(rho.begin(), rho.end(), r);
  }

  const std::size_t m_max = dataset.max_cluster_size();
  const double lo = m_max > 1 ? -1.0 / (static_cast<double>(m_max) - 1.0) + 1e-6 : 0.0;
  const double hi = 1.0 - 1e-6;
  WorkingCovariance out;
  out.shared = shared;
  out.per_dtr.resize(n_dtrs);
  for (std::size_t d = 0; d < n_dtrs; ++d) {
    double r = rho[d];
    if (r < lo || r > hi) {
      const double clamped = std::clamp(r, lo, hi);
      warn("DTR " + dtrs[d].label() + ": working ICC estimate " + std::to_string(r) +
           " clamped to " + std::to_string(clamped));
      r = clamped;
    }
    out.per_dtr[d] = {sigma2[d], r};
  }
  return out;
}

Eigen::MatrixXd sandwich_covariance(const TrialDataset& dataset,
                                    const MarginalMeanSpec& spec,
                                    const Eigen::VectorXd& theta,
                                    const WorkingCovariance& v) {
  const auto dtrs = embedded_dtrs(dataset.design);
  if (v.per_dtr.size() != dtrs.size())
    throw std::invalid_argument("working covariance size mismatch");
  const auto replicates = build_replicates(dataset, spec);
  const double n = static_cast<double>(dataset.n_clusters());
  const auto k = static_cast<Eigen::Index>(spec.dim());

  Eigen::MatrixXd bread = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& cluster_reps : replicates) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(k);
    for (const auto& rep : cluster_reps) {
      const auto inv = exch_inverse(v.per_dtr[rep.dtr_index], rep.design.rows());
      bread.noalias() += rep.weight * quad_form(rep, inv, rep.design);
      const Eigen::VectorXd resid = rep.y - rep.design * theta;
      u.noalias() += rep.weight * quad_form(rep, inv, resid);
    }
    meat.noalias() += u * u.transpose();
  }
  bread /= n;
  meat /= n;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(bread);
  lu.setThreshold(1e-10);
  if (!lu.isInvertible())
    throw std::runtime_error("singular bread matrix in sandwich covariance" +
                             deficient_cells_note(dataset));
  const Eigen::MatrixXd bread_inv = lu.inverse();
  Eigen::MatrixXd sigma = bread_inv * meat * bread_inv;
  sigma = ((sigma + sigma.transpose()) / 2.0).eval();
  return sigma / n;
}

FitResult fit(const TrialDataset& dataset, const MarginalMeanSpec& spec,
              const FitOptions& options) {
  if (options.iterations < 0)
    throw std::invalid_argument("iterations must be non-negative");
  const auto n_dtrs = embedded_dtrs(dataset.design).size();

  FitResult result;
  result.spec = spec;
  result.n_clusters = dataset.n_clusters();
  result.iterations = options.iterations;

  WorkingCovariance v = WorkingCovariance::identity(n_dtrs);
  Eigen::VectorXd theta = solve_weighted_ee(dataset, spec, v);
  for (int it = 0; it < options.iterations; ++it) {
    v = estimate_working_cov(dataset, spec, theta, options.shared_cov,
                             &result.warnings);
    theta = solve_weighted_ee(dataset, spec, v);
  }

  result.theta = theta;
  result.working = v;
  result.sigma_theta = sandwich_covariance(dataset, spec, theta, v);
  return result;
}

ContrastResult wald_test(const FitResult& fit, const Eigen::VectorXd& c) {
  if (c.size() != fit.theta.size())
    throw std::invalid_argument("contrast has length " + std::to_string(c.size()) +
                                ", expected " + std::to_string(fit.theta.size()));
  ContrastResult out;
  out.c = c;
  out.estimate = c.dot(fit.theta);
  const double var = c.dot(fit.sigma_theta * c);
  if (!(var > 0.0))
    throw std::runtime_error("zero variance along the requested contrast");
  out.std_error = std::sqrt(var);
  out.z = out.estimate / out.std_error;
  out.p_value = std::erfc(std::abs(out.z) / std::sqrt(2.0));
  return out;
}

std::vector<DtrMean> dtr_means(const FitResult& fit, std::span<const double> x) {
  std::vector<double> xv(x.begin(), x.end());
  if (xv.empty()) xv.assign(fit.spec.p, 0.0);
  std::vector<DtrMean> out;
  for (const auto& dtr : embedded_dtrs(fit.spec.design)) {
    const Eigen::VectorXd row = regressor_row(dtr, xv, fit.spec).transpose();
    DtrMean m;
    m.dtr = dtr;
    m.estimate = row.dot(fit.theta);
    m.std_error = std::sqrt(std::max(0.0, row.dot(fit.sigma_theta * row)));
    out.push_back(m);
  }
  return out;
}

Eigen::VectorXd contrast_vector(const std::string& text, const MarginalMeanSpec& spec) {
  const auto dtrs = embedded_dtrs(spec.design);
  const auto k = static_cast<Eigen::Index>(spec.dim());

  const auto vs = text.find("-vs-");
  if (vs != std::string::npos) {
    const EmbeddedDtr a = dtr_from_label(text.substr(0, vs), spec.design);
    const EmbeddedDtr b = dtr_from_label(text.substr(vs + 4), spec.design);
    return regressor_base(a, spec) - regressor_base(b, spec);
  }
  if (text == "stage1" || text == "stage2") {
    // Averaged-regimen comparison over the other stage's options.
    Eigen::VectorXd plus = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd minus = Eigen::VectorXd::Zero(k);
    int n_plus = 0, n_minus = 0;
    for (const auto& dtr : dtrs) {
      int arm;
      if (text == "stage1") {
        arm = dtr.a1;
      } else {
        if (!dtr.a2) continue;  // ADEPT (-1,.) has no stage-2 option
        arm = *dtr.a2;
      }
      if (arm == 1) {
        plus += regressor_base(dtr, spec);
        ++n_plus;
      } else {
        minus += regressor_base(dtr, spec);
        ++n_minus;
      }
    }
    if (n_plus == 0 || n_minus == 0)
      throw std::invalid_argument("no regimens on one side of " + text);
    return plus / n_plus - minus / n_minus;
  }

  // Explicit comma-separated coefficients, length q or q+p.
  std::vector<double> values;
  std::istringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw std::invalid_argument("invalid contrast '" + text + "'");
    }
  }
  if (values.size() != spec.dim() && values.size() != spec.q())
    throw std::invalid_argument("contrast '" + text + "' has " +
                                std::to_string(values.size()) +
                                " entries, expected " + std::to_string(spec.q()) +
                                " or " + std::to_string(spec.dim()));
  Eigen::VectorXd c = Eigen::VectorXd::Zero(k);
  for (std::size_t i = 0; i < values.size(); ++i)
    c(static_cast<Eigen::Index>(i)) = values[i];
  return c;
}

std::string fit_to_json(const FitResult& fit,
                        const std::vector<std::pair<std::string, ContrastResult>>& contrasts) {
  nlohmann::json j;
  j["schema"] = "smart-cluster/v1";
  j["design"] = to_string(fit.spec.design);
  j["n_clusters"] = fit.n_clusters;
  j["iterations"] = fit.iterations;
  j["theta"] = std::vector<double>(fit.theta.begin(), fit.theta.end());
  const Eigen::VectorXd se = fit.std_errors();
  j["se"] = std::vector<double>(se.begin(), se.end());
  std::vector<std::vector<double>> cov;
  for (Eigen::Index r = 0; r < fit.sigma_theta.rows(); ++r) {
    cov.emplace_back(fit.sigma_theta.row(r).begin(), fit.sigma_theta.row(r).end());
  }
  j["cov"] = cov;

  nlohmann::json working = nlohmann::json::object();
  if (fit.working.shared) {
    working["shared"] = {{"sigma2", fit.working.per_dtr[0].sigma2},
                         {"rho", fit.working.per_dtr[0].rho}};
  } else {
    const auto dtrs = embedded_dtrs(fit.spec.design);
    for (std::size_t d = 0; d < dtrs.size(); ++d)
      working[dtrs[d].label()] = {{"sigma2", fit.working.per_dtr[d].sigma2},
                                  {"rho", fit.working.per_dtr[d].rho}};
  }
  j["working"] = working;

  nlohmann::json cj = nlohmann::json::array();
  for (const auto& [name, cr] : contrasts) {
    nlohmann::json one;
    one["name"] = name;
    one["c"] = std::vector<double>(cr.c.begin(), cr.c.end());
    one["estimate"] = cr.estimate;
    one["se"] = cr.std_error;
    one["z"] = cr.z;
    one["p"] = cr.p_value;
    cj.push_back(one);
  }
  j["contrasts"] = cj;

  nlohmann::json means = nlohmann::json::array();
  for (const auto& m : dtr_means(fit)) {
    means.push_back({{"dtr", m.dtr.label()},
                     {"estimate", m.estimate},
                     {"se", m.std_error}});
  }
  j["dtr_means"] = means;
  j["warnings"] = fit.warnings;
  return j.dump(2);
}

}  // namespace smartcrt
