#include "smartcrt/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "smartcrt/power.hpp"
#include "smartcrt/rng.hpp"

namespace smartcrt {

const CellParams& Scenario::cell(const TreatmentPath& path) const {
  const auto cells_list = design_cells(design);
  for (std::size_t i = 0; i < cells_list.size(); ++i) {
    if (cells_list[i].a1 == path.a1 && cells_list[i].r == path.r &&
        cells_list[i].a2 == path.a2)
      return cells[i];
  }
  throw std::invalid_argument("path " + path_label(path) + " is not a cell of the " +
                              to_string(design) + " design");
}

double Scenario::covariate_basis_variance() const {
  if (!covariate) return 0.0;
  return k ? var_clipped_normal(*k) : 1.0;
}

void validate_scenario(const Scenario& scenario) {
  const auto cells_list = design_cells(scenario.design);
  if (scenario.cells.size() != cells_list.size())
    throw std::invalid_argument("scenario has " + std::to_string(scenario.cells.size()) +
                                " cells, the " + to_string(scenario.design) +
                                " design has " + std::to_string(cells_list.size()));
  if (!(scenario.p1 > 0.0 && scenario.p1 < 1.0))
    throw std::invalid_argument("p1 must be in (0,1)");
  if (!(scenario.p_neg1 > 0.0 && scenario.p_neg1 < 1.0))
    throw std::invalid_argument("p_neg1 must be in (0,1)");
  for (std::size_t i = 0; i < scenario.cells.size(); ++i) {
    const auto& c = scenario.cells[i];
    const std::string where = " in cell " + path_label(cells_list[i]);
    if (!(c.var > 0.0)) throw std::invalid_argument("variance must be > 0" + where);
    if (!(c.icc >= 0.0 && c.icc < 1.0))
      throw std::invalid_argument("cell ICC must be in [0,1)" + where);
    if (!std::isfinite(c.mu)) throw std::invalid_argument("non-finite mean" + where);
  }
  if (scenario.covariate && scenario.k && !(*scenario.k > 0.0))
    throw std::invalid_argument("clip threshold k must be > 0");
}

double clip_fk(double x, double k) {
  if (!(k > 0.0)) throw std::invalid_argument("clip threshold k must be > 0");
  return std::min(std::max(x, -k), k);
}

double var_clipped_normal(double k) {
  if (!(k > 0.0)) throw std::invalid_argument("clip threshold k must be > 0");
  // E f_k^2 = E[X^2, |X|<=k] + k^2 P(|X|>k); E f_k = 0 by symmetry.
  return 2.0 * normal_cdf(k) - 1.0 - 2.0 * k * normal_pdf(k) +
         2.0 * k * k * (1.0 - normal_cdf(k));
}

namespace {

// Responder and non-responder cells of a regimen.
std::pair<TreatmentPath, TreatmentPath> regimen_cells(DesignKind design,
                                                      const EmbeddedDtr& dtr) {
  const TreatmentPath responder = make_path(design, dtr.a1, 1, std::nullopt);
  const bool rerand = second_randomization(design, dtr.a1, 0);
  const TreatmentPath non_responder =
      rerand ? make_path(design, dtr.a1, 0, dtr.a2) : make_path(design, dtr.a1, 0, std::nullopt);
  return {responder, non_responder};
}

}  // namespace

MarginalMoments mixture_moments(const Scenario& scenario, const EmbeddedDtr& dtr) {
  validate_scenario(scenario);
  const auto all = embedded_dtrs(scenario.design);
  if (std::find(all.begin(), all.end(), dtr) == all.end())
    throw std::invalid_argument("regimen " + dtr.label() + " is not embedded in the " +
                                to_string(scenario.design) + " design");
  const auto [rp, np] = regimen_cells(scenario.design, dtr);
  const CellParams& r = scenario.cell(rp);
  const CellParams& nr = scenario.cell(np);
  const double p = scenario.response_prob(dtr.a1);
  const double gap2 = (r.mu - nr.mu) * (r.mu - nr.mu);

  MarginalMoments out;
  out.mean = p * r.mu + (1.0 - p) * nr.mu;
  out.variance = p * r.var + (1.0 - p) * nr.var + p * (1.0 - p) * gap2;
  const double cov =
      p * r.var * r.icc + (1.0 - p) * nr.var * nr.icc + p * (1.0 - p) * gap2;
  out.icc = cov / out.variance;
  return out;
}

UnconditionalMoments unconditional_moments(const MarginalMoments& conditional,
                                           double eta, double var_x) {
  if (!(var_x >= 0.0)) throw std::invalid_argument("var_x must be >= 0");
  const double add = eta * eta * var_x;
  UnconditionalMoments out;
  out.moments.mean = conditional.mean;
  out.moments.variance = conditional.variance + add;
  out.moments.icc = (conditional.icc * conditional.variance + add) / out.moments.variance;
  out.cor2_yx = add / out.moments.variance;
  return out;
}

namespace {

TrialDataset generate_impl(const Scenario& scenario, const EmbeddedDtr* forced,
                           std::size_t n_clusters, std::size_t m, std::uint64_t seed) {
  validate_scenario(scenario);
  if (n_clusters < 1) throw std::invalid_argument("n_clusters must be >= 1");
  if (m < 1) throw std::invalid_argument("cluster size m must be >= 1");

  Rng rng(seed);
  TrialDataset out;
  out.design = scenario.design;
  out.p = scenario.covariate ? 1 : 0;
  out.clusters.reserve(n_clusters);

  int id_width = 1;
  for (std::size_t v = n_clusters; v >= 10; v /= 10) ++id_width;

  for (std::size_t i = 0; i < n_clusters; ++i) {
    const int a1 = forced ? forced->a1 : rng.sign();
    const int r = rng.bernoulli(scenario.response_prob(a1)) ? 1 : 0;
    std::optional<int> a2;
    if (second_randomization(scenario.design, a1, r))
      a2 = forced ? *forced->a2 : rng.sign();
    ClusterRecord cluster;
    cluster.path = make_path(scenario.design, a1, r, a2);

    std::string id = std::to_string(i + 1);
    cluster.id = "c" + std::string(id_width - static_cast<int>(id.size()), '0') + id;

    double shift = 0.0;
    std::vector<double> xv;
    if (scenario.covariate) {
      const double x = rng.normal();
      shift = scenario.eta * (scenario.k ? clip_fk(x, *scenario.k) : x);
      xv.push_back(x);
    }

    const CellParams& cell = scenario.cell(cluster.path);
    const double sd = std::sqrt(cell.var);
    const double shared_load = std::sqrt(cell.icc);
    const double indiv_load = std::sqrt(1.0 - cell.icc);
    // Exchangeable errors: sigma (sqrt(rho) Z_cluster + sqrt(1-rho) Z_ij),
    // exact for icc >= 0.
    const double z_cluster = rng.normal();
    cluster.individuals.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
      IndividualRecord ind;
      ind.y = cell.mu + shift + sd * (shared_load * z_cluster + indiv_load * rng.normal());
      ind.x = xv;
      cluster.individuals.push_back(std::move(ind));
    }
    out.clusters.push_back(std::move(cluster));
  }
  return out;
}

}  // namespace

TrialDataset generate_trial(const Scenario& scenario, std::size_t n_clusters,
                            std::size_t m, std::uint64_t seed) {
  return generate_impl(scenario, nullptr, n_clusters, m, seed);
}

TrialDataset generate_trial_under_dtr(const Scenario& scenario, const EmbeddedDtr& dtr,
                                      std::size_t n_clusters, std::size_t m,
                                      std::uint64_t seed) {
  const auto all = embedded_dtrs(scenario.design);
  if (std::find(all.begin(), all.end(), dtr) == all.end())
    throw std::invalid_argument("regimen " + dtr.label() + " is not embedded in the " +
                                to_string(scenario.design) + " design");
  return generate_impl(scenario, &dtr, n_clusters, m, seed);
}

namespace {

enum class RepOutcome { Accept, Reject, Fail };

RepOutcome run_replication(const Scenario& scenario, std::size_t n_clusters,
                           std::size_t m, const MarginalMeanSpec& spec,
                           const Eigen::VectorXd& contrast, double z_crit,
                           const McOptions& options, std::uint64_t seed) {
  try {
    const TrialDataset data = generate_trial(scenario, n_clusters, m, seed);
    FitOptions fit_options;
    fit_options.shared_cov = options.shared_cov;
    fit_options.iterations = options.iterations;
    const FitResult result = fit(data, spec, fit_options);
    const ContrastResult test = wald_test(result, contrast);
    return std::abs(test.z) > z_crit ? RepOutcome::Reject : RepOutcome::Accept;
  } catch (const std::exception&) {
    return RepOutcome::Fail;
  }
}

McPowerResult mc_power_impl(const Scenario& scenario, std::size_t n_clusters,
                            std::size_t m, const Eigen::VectorXd& contrast, int reps,
                            std::uint64_t master_seed, const McOptions& options,
                            [[maybe_unused]] bool parallel) {
  validate_scenario(scenario);
  if (reps < 1) throw std::invalid_argument("reps must be >= 1");
  if (!(options.alpha > 0.0 && options.alpha < 1.0))
    throw std::invalid_argument("alpha must be in (0,1)");

  MarginalMeanSpec spec;
  spec.design = scenario.design;
  spec.p = scenario.covariate ? 1 : 0;
  Eigen::VectorXd c = contrast;
  if (c.size() == static_cast<Eigen::Index>(spec.q()) && spec.p > 0) {
    c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.dim()));
    c.head(contrast.size()) = contrast;
  }
  if (c.size() != static_cast<Eigen::Index>(spec.dim()))
    throw std::invalid_argument("contrast has length " + std::to_string(contrast.size()) +
                                ", expected " + std::to_string(spec.q()) + " or " +
                                std::to_string(spec.dim()));
  const double z_crit = normal_quantile(1.0 - options.alpha / 2.0);

  int rejections = 0;
  int failures = 0;
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic, 8) reduction(+ : rejections, failures) \
    if (parallel)
#endif
  for (int rep = 0; rep < reps; ++rep) {
    const RepOutcome outcome =
        run_replication(scenario, n_clusters, m, spec, c, z_crit, options,
                        derive_seed(master_seed, static_cast<std::uint64_t>(rep)));
    if (outcome == RepOutcome::Reject) ++rejections;
    if (outcome == RepOutcome::Fail) ++failures;
  }

  McPowerResult out;
  out.reps = reps;
  out.rejections = rejections;
  out.failures = failures;
  const int valid = reps - failures;
  out.power = valid > 0 ? static_cast<double>(rejections) / valid : 0.0;
  out.mc_se = valid > 0 ? std::sqrt(out.power * (1.0 - out.power) / valid) : 0.0;
  return out;
}

}  // namespace

McPowerResult mc_power(const Scenario& scenario, std::size_t n_clusters, std::size_t m,
                       const Eigen::VectorXd& contrast, int reps,
                       std::uint64_t master_seed, const McOptions& options) {
  return mc_power_impl(scenario, n_clusters, m, contrast, reps, master_seed, options,
                       options.parallel);
}

McPowerResult mc_power_serial(const Scenario& scenario, std::size_t n_clusters,
                              std::size_t m, const Eigen::VectorXd& contrast, int reps,
                              std::uint64_t master_seed, const McOptions& options) {
  return mc_power_impl(scenario, n_clusters, m, contrast, reps, master_seed, options,
                       /*parallel=*/false);
}

Scenario scenario_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("invalid scenario JSON: ") + e.what());
  }
  try {
    Scenario s;
    s.design = design_from_string(j.at("design").get<std::string>());
    s.p1 = j.at("p1").get<double>();
    s.p_neg1 = j.at("p_neg1").get<double>();
    const auto cells_list = design_cells(s.design);
    const auto& cj = j.at("cells");
    s.cells.resize(cells_list.size());
    std::size_t found = 0;
    for (std::size_t i = 0; i < cells_list.size(); ++i) {
      const std::string key = path_label(cells_list[i]);
      const std::string bare = key.substr(1, key.size() - 2);  // no parens
      const nlohmann::json* entry = nullptr;
      if (cj.contains(key)) entry = &cj.at(key);
      if (!entry && cj.contains(bare)) entry = &cj.at(bare);
      if (!entry)
        throw std::invalid_argument("scenario JSON missing cell \"" + bare + "\"");
      s.cells[i].mu = entry->at("mu").get<double>();
      s.cells[i].var = entry->at("var").get<double>();
      s.cells[i].icc = entry->at("icc").get<double>();
      ++found;
    }
    if (cj.size() != found)
      throw std::invalid_argument("scenario JSON has cells not in the design");
    s.covariate = j.value("covariate", false);
    s.eta = j.value("eta", 0.0);
    if (j.contains("k") && !j.at("k").is_null()) s.k = j.at("k").get<double>();
    validate_scenario(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("invalid scenario JSON: ") + e.what());
  }
}

std::string scenario_to_json(const Scenario& scenario) {
  validate_scenario(scenario);
  nlohmann::json j;
  j["design"] = to_string(scenario.design);
  j["p1"] = scenario.p1;
  j["p_neg1"] = scenario.p_neg1;
  nlohmann::json cells = nlohmann::json::object();
  const auto cells_list = design_cells(scenario.design);
  for (std::size_t i = 0; i < cells_list.size(); ++i) {
    const std::string key = path_label(cells_list[i]);
    cells[key.substr(1, key.size() - 2)] = {{"mu", scenario.cells[i].mu},
                                            {"var", scenario.cells[i].var},
                                            {"icc", scenario.cells[i].icc}};
  }
  j["cells"] = cells;
  j["covariate"] = scenario.covariate;
  if (scenario.covariate) {
    j["eta"] = scenario.eta;
    if (scenario.k) j["k"] = *scenario.k;
  }
  return j.dump(2);
}

Scenario read_scenario(const std::string& file_path) {
  std::ifstream in(file_path);
  if (!in) throw std::invalid_argument("cannot open '" + file_path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return scenario_from_json(buf.str());
}

}  // namespace smartcrt
