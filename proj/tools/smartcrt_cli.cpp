// Command-line front end: analysis of cluster-randomized SMART datasets,
// sample-size and detectable-effect calculators, scenario simulation,
// Monte Carlo power, and regimen moment summaries.
//
// Exit codes: 0 success, 2 input/validation error, 3 computation error.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "smartcrt/data.hpp"
#include "smartcrt/design.hpp"
#include "smartcrt/estimator.hpp"
#include "smartcrt/power.hpp"
#include "smartcrt/simulate.hpp"

namespace {

constexpr const char* kSchema = "smart-cluster/v1";

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw std::invalid_argument("cannot write '" + out_path + "'");
  out << text << "\n";
}

smartcrt::Scenario load_scenario(const std::string& preset, const std::string& file) {
  if (!preset.empty() && !file.empty())
    throw std::invalid_argument("give either --preset or --scenario, not both");
  if (!preset.empty()) return smartcrt::scenario_preset(preset);
  if (!file.empty()) return smartcrt::read_scenario(file);
  throw std::invalid_argument("a scenario is required (--preset or --scenario)");
}

struct SizeArgs {
  std::string design = "adept";
  int m = 0;
  double delta = 0.0;
  long n = 0;
  double rho = 0.0;
  double p1 = 0.0;
  double p_neg1 = 1.0;
  double alpha = 0.05;
  double power = 0.9;
  std::optional<double> cor2;
  bool ceiling = false;
  std::string out;
};

smartcrt::SampleSizeInputs to_inputs(const SizeArgs& a) {
  smartcrt::SampleSizeInputs in;
  in.design = smartcrt::design_from_string(a.design);
  in.m = a.m;
  in.delta = a.delta;
  in.rho = a.rho;
  in.p1 = a.p1;
  in.p_neg1 = a.p_neg1;
  in.alpha = a.alpha;
  in.power = a.power;
  in.cor2_yx = a.cor2;
  in.rounding = a.ceiling ? smartcrt::Rounding::Ceiling : smartcrt::Rounding::Nearest;
  return in;
}

nlohmann::json terms_json(const smartcrt::SampleSizeResult& r) {
  return {{"base", r.base},
          {"vif", r.vif},
          {"rerand", r.rerand},
          {"cov_reduction", r.cov_reduction}};
}

void add_size_flags(CLI::App* cmd, SizeArgs& a, bool mde) {
  cmd->add_option("--design", a.design, "adept or prototypical")->required();
  cmd->add_option("--m", a.m, "common cluster size")->required();
  if (mde)
    cmd->add_option("--n", a.n, "number of clusters")->required();
  else
    cmd->add_option("--delta", a.delta, "standardized effect size")->required();
  cmd->add_option("--rho", a.rho, "outcome ICC (conditional rho* when --cor2 is given)")
      ->required();
  cmd->add_option("--p1", a.p1, "response probability after first-stage treatment 1")
      ->required();
  cmd->add_option("--p-neg1", a.p_neg1,
                  "response probability after first-stage treatment -1 (prototypical)");
  cmd->add_option("--alpha", a.alpha, "test size (default .05)");
  cmd->add_option("--power", a.power, "target power (default .9)");
  cmd->add_option("--cor2", a.cor2,
                  "squared outcome-covariate correlation (enables the covariate formula)");
  if (!mde) cmd->add_flag("--ceiling", a.ceiling, "round up instead of to nearest");
  cmd->add_option("--out", a.out, "write JSON here instead of stdout");
}

int run_analyze(const std::string& design_name, const std::string& data_path,
                const std::vector<std::string>& contrast_specs, bool shared_cov,
                int iterations, const std::string& out_path) {
  const auto design = smartcrt::design_from_string(design_name);
  const smartcrt::TrialDataset data = smartcrt::read_dataset(data_path, design);

  // Refuse to fit with an unpopulated randomization cell: the weighted
  // estimating equations are only design-consistent when every cell that the
  // design can produce is represented.
  const auto report = smartcrt::validate(data);
  if (report.has_warnings()) {
    std::string msg = "design cell coverage failure";
    for (const auto& w : report.warnings) msg += "; " + w;
    throw std::runtime_error(msg);
  }

  smartcrt::MarginalMeanSpec spec{design, data.p};
  smartcrt::FitOptions options;
  options.shared_cov = shared_cov;
  options.iterations = iterations;
  const smartcrt::FitResult result = smartcrt::fit(data, spec, options);

  std::vector<std::pair<std::string, smartcrt::ContrastResult>> contrasts;
  for (const auto& text : contrast_specs) {
    const Eigen::VectorXd c = smartcrt::contrast_vector(text, spec);
    contrasts.emplace_back(text, smartcrt::wald_test(result, c));
  }
  emit(smartcrt::fit_to_json(result, contrasts), out_path);
  return 0;
}

int run_size(const SizeArgs& args) {
  const auto result = smartcrt::required_clusters(to_inputs(args));
  nlohmann::json j;
  j["schema"] = kSchema;
  j["design"] = args.design;
  j["n"] = result.n;
  j["n_raw"] = result.n_raw;
  j["formula"] = result.formula;
  j["terms"] = terms_json(result);
  emit(j.dump(2), args.out);
  return 0;
}

int run_mde(const SizeArgs& args) {
  const double delta = smartcrt::detectable_effect_size(to_inputs(args), args.n);
  // Factor breakdown at the returned delta, for the same auditability as size.
  smartcrt::SampleSizeInputs in = to_inputs(args);
  in.delta = delta;
  const auto result = smartcrt::required_clusters(in);
  nlohmann::json j;
  j["schema"] = kSchema;
  j["design"] = args.design;
  j["n"] = args.n;
  j["delta"] = delta;
  j["formula"] = result.formula;
  j["terms"] = terms_json(result);
  emit(j.dump(2), args.out);
  return 0;
}

int run_simulate(const std::string& preset, const std::string& scenario_file,
                 std::size_t n, std::size_t m, std::uint64_t seed,
                 const std::string& out_path) {
  const auto scenario = load_scenario(preset, scenario_file);
  const auto data = smartcrt::generate_trial(scenario, n, m, seed);
  if (out_path.empty())
    std::cout << smartcrt::to_csv(data);
  else
    smartcrt::write_csv_file(data, out_path);
  return 0;
}

int run_power(const std::string& preset, const std::string& scenario_file,
              std::size_t n, std::size_t m, int reps, double alpha,
              const std::string& contrast_spec, std::uint64_t seed, bool shared_cov,
              bool serial, const std::string& out_path) {
  const auto scenario = load_scenario(preset, scenario_file);
  smartcrt::MarginalMeanSpec spec{scenario.design, scenario.covariate ? 1u : 0u};
  const Eigen::VectorXd c = smartcrt::contrast_vector(contrast_spec, spec);
  smartcrt::McOptions options;
  options.alpha = alpha;
  options.shared_cov = shared_cov;
  options.parallel = !serial;
  const auto result = smartcrt::mc_power(scenario, n, m, c, reps, seed, options);

  nlohmann::json j;
  j["schema"] = kSchema;
  j["power"] = result.power;
  j["mc_se"] = result.mc_se;
  j["failures"] = result.failures;
  j["reps"] = result.reps;
  j["rejections"] = result.rejections;
  j["contrast"] = contrast_spec;
  emit(j.dump(2), out_path);
  return 0;
}

int run_moments(const std::string& preset, const std::string& scenario_file,
                const std::string& dtr_label, const std::string& out_path) {
  const auto scenario = load_scenario(preset, scenario_file);
  std::vector<smartcrt::EmbeddedDtr> dtrs;
  if (dtr_label.empty())
    dtrs = smartcrt::embedded_dtrs(scenario.design);
  else
    dtrs.push_back(smartcrt::dtr_from_label(dtr_label, scenario.design));

  nlohmann::json per_dtr = nlohmann::json::object();
  for (const auto& dtr : dtrs) {
    const auto cond = smartcrt::mixture_moments(scenario, dtr);
    nlohmann::json one;
    one["mean"] = cond.mean;
    one["variance"] = cond.variance;
    one["icc"] = cond.icc;
    if (scenario.covariate) {
      const auto unc = smartcrt::unconditional_moments(
          cond, scenario.eta, scenario.covariate_basis_variance());
      one["unconditional"] = {{"mean", unc.moments.mean},
                              {"variance", unc.moments.variance},
                              {"icc", unc.moments.icc}};
      one["cor2_yx"] = unc.cor2_yx;
    }
    per_dtr[dtr.label()] = one;
  }
  nlohmann::json j;
  j["schema"] = kSchema;
  j["design"] = smartcrt::to_string(scenario.design);
  j["dtrs"] = per_dtr;
  emit(j.dump(2), out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Design and analysis of cluster-randomized SMARTs"};
  app.require_subcommand(1);

  // analyze
  std::string an_design, an_data, an_out;
  std::vector<std::string> an_contrasts;
  bool an_shared = false;
  int an_iterations = 2;
  auto* analyze = app.add_subcommand("analyze", "fit the weighted regression to a CSV dataset");
  analyze->add_option("--design", an_design, "adept or prototypical")->required();
  analyze->add_option("--data", an_data, "CSV dataset path")->required();
  analyze->add_option("--contrast", an_contrasts,
                      "contrast: \"(1,1)-vs-(-1,.)\", stage1/stage2, or coefficients");
  analyze->add_flag("--shared-cov", an_shared, "average the working covariance across regimens");
  analyze->add_option("--iterations", an_iterations, "working-covariance updates (default 2)");
  analyze->add_option("--out", an_out, "write JSON here instead of stdout");

  // size / mde
  SizeArgs size_args, mde_args;
  auto* size = app.add_subcommand("size", "required number of clusters");
  add_size_flags(size, size_args, /*mde=*/false);
  auto* mde = app.add_subcommand("mde", "minimum detectable effect size");
  add_size_flags(mde, mde_args, /*mde=*/true);

  // simulate
  std::string sim_preset, sim_scenario, sim_out;
  std::size_t sim_n = 0, sim_m = 0;
  std::uint64_t sim_seed = 1;
  auto* simulate = app.add_subcommand("simulate", "generate a trial dataset as CSV");
  simulate->add_option("--preset", sim_preset, "built-in scenario name");
  simulate->add_option("--scenario", sim_scenario, "scenario JSON file");
  simulate->add_option("--n", sim_n, "number of clusters")->required();
  simulate->add_option("--m", sim_m, "cluster size")->required();
  simulate->add_option("--seed", sim_seed, "RNG seed (default 1)");
  simulate->add_option("--out", sim_out, "write CSV here instead of stdout");

  // power
  std::string pw_preset, pw_scenario, pw_contrast = "(1,1)-vs-(-1,.)", pw_out;
  std::size_t pw_n = 0, pw_m = 0;
  int pw_reps = 1000;
  double pw_alpha = 0.05;
  std::uint64_t pw_seed = 1;
  bool pw_shared = false, pw_serial = false;
  auto* power = app.add_subcommand("power", "Monte Carlo power for a contrast");
  power->add_option("--preset", pw_preset, "built-in scenario name");
  power->add_option("--scenario", pw_scenario, "scenario JSON file");
  power->add_option("--n", pw_n, "number of clusters")->required();
  power->add_option("--m", pw_m, "cluster size")->required();
  power->add_option("--reps", pw_reps, "replications (default 1000)");
  power->add_option("--alpha", pw_alpha, "test size (default .05)");
  power->add_option("--contrast", pw_contrast, "contrast (default \"(1,1)-vs-(-1,.)\")");
  power->add_option("--seed", pw_seed, "master seed (default 1)");
  power->add_flag("--shared-cov", pw_shared, "average the working covariance across regimens");
  power->add_flag("--serial", pw_serial, "force the serial reference path");
  power->add_option("--out", pw_out, "write JSON here instead of stdout");

  // moments
  std::string mo_preset, mo_scenario, mo_dtr, mo_out;
  auto* moments = app.add_subcommand("moments", "regimen-level moments of a scenario");
  moments->add_option("--preset", mo_preset, "built-in scenario name");
  moments->add_option("--scenario", mo_scenario, "scenario JSON file");
  moments->add_option("--dtr", mo_dtr, "single regimen label, e.g. \"(1,1)\"");
  moments->add_option("--out", mo_out, "write JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (analyze->parsed())
      return run_analyze(an_design, an_data, an_contrasts, an_shared, an_iterations, an_out);
    if (size->parsed()) return run_size(size_args);
    if (mde->parsed()) return run_mde(mde_args);
    if (simulate->parsed())
      return run_simulate(sim_preset, sim_scenario, sim_n, sim_m, sim_seed, sim_out);
    if (power->parsed())
      return run_power(pw_preset, pw_scenario, pw_n, pw_m, pw_reps, pw_alpha, pw_contrast,
                       pw_seed, pw_shared, pw_serial, pw_out);
    if (moments->parsed()) return run_moments(mo_preset, mo_scenario, mo_dtr, mo_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
