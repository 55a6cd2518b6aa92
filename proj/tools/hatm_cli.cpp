#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hatm/errors.hpp"
#include "hatm/estimation.hpp"
#include "hatm/math_utils.hpp"
#include "hatm/sim/harness.hpp"
#include "hatm/sim/logging.hpp"
#include "hatm/sim/metrics.hpp"
#include "hatm/sim/scenario.hpp"

namespace {

using nlohmann::json;

int exit_code(hatm::ErrorCode code) { return static_cast<int>(code) + 2; }

json metrics_json(const hatm::sim::Metrics& m) {
  json j;
  j["average_error_m"] = m.average_error;
  j["max_error_m"] = m.max_error;
  j["rms_error_m"] = {m.rms_error.x(), m.rms_error.y(), m.rms_error.z()};
  if (m.gamma_error) {
    j["gamma_error_deg"] = hatm::rad_to_deg(*m.gamma_error);
  }
  j["energy_proxy_Ns"] = m.energy_proxy;
  return j;
}

int run_simulate(const std::string& scenario_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed, const std::vector<std::string>& overrides) {
  std::vector<std::string> all_overrides = overrides;
  if (seed) all_overrides.push_back("noise.seed=" + std::to_string(*seed));

  json resolved;
  hatm::sim::Scenario scenario = hatm::sim::load_scenario_file(scenario_path, all_overrides, &resolved);
  const std::uint64_t hash = hatm::sim::scenario_hash(scenario);

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string log_path = (fs::path(out_dir) / "log.csv").string();
  const std::string sidecar_path = (fs::path(out_dir) / "log.json").string();
  const std::string mhe_path = (fs::path(out_dir) / "mhe_input.csv").string();

  try {
    const hatm::sim::SimResult result = hatm::sim::run_scenario(scenario);
    hatm::sim::write_log_with_sidecar(result.log, resolved, hash, log_path, sidecar_path);
    std::ofstream mhe(mhe_path);
    hatm::sim::write_estimator_input_csv(result.estimator_inputs, mhe);
    std::cout << metrics_json(result.metrics).dump(2) << "\n";
    return 0;
  } catch (const hatm::sim::SimAbort& abort) {
    hatm::sim::write_log_with_sidecar(abort.partial_log, resolved, hash, log_path, sidecar_path);
    std::cerr << "simulation aborted: " << abort.what() << " (partial log written)\n";
    return exit_code(abort.code());
  }
}

int run_estimate(const std::string& log_path, int horizon, double mass, double gravity,
                 const std::string& out_path) {
  std::ifstream in(log_path);
  if (!in) throw hatm::Error(hatm::ErrorCode::kBadInput, "cannot open " + log_path);
  const auto rows = hatm::sim::read_estimator_input_csv(in);
  if (rows.size() < 2) {
    throw hatm::Error(hatm::ErrorCode::kBadInput, "replay needs at least two samples");
  }

  hatm::MovingHorizonEstimator::Config cfg;
  cfg.horizon = horizon;
  cfg.period = rows[1].time - rows[0].time;
  cfg.params = hatm::EstimatorParams{mass, gravity};
  hatm::MovingHorizonEstimator estimator(cfg);
  hatm::AugmentedState prior;
  prior.position = rows.front().measurement.segment<3>(0);
  prior.velocity = rows.front().measurement.segment<3>(3);
  hatm::AugVector p0;
  p0 << 1e-2, 1e-2, 1e-2, 1e-2, 1e-2, 1e-2, 25.0, 25.0, 25.0;
  estimator.set_prior(prior, p0.asDiagonal());

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw hatm::Error(hatm::ErrorCode::kBadInput, "cannot open " + out_path);
    out = &file;
  }
  *out << "t";
  for (int i = 1; i <= hatm::kAugStateDim; ++i) *out << ",xhat" << i;
  *out << ",gamma_hat,cost,iterations\n";
  for (const auto& row : rows) {
    const auto sol = estimator.step(row.time, row.measurement, row.input);
    if (!sol) continue;
    const hatm::AugVector x = sol->trajectory.back().vector();
    *out << hatm::sim::format_double(row.time);
    for (int i = 0; i < hatm::kAugStateDim; ++i) *out << "," << hatm::sim::format_double(x[i]);
    const auto gh = estimator.inclination(*sol);
    *out << "," << hatm::sim::format_double(gh ? *gh : 0.0);
    *out << "," << hatm::sim::format_double(sol->diagnostics.cost);
    *out << "," << sol->diagnostics.iterations << "\n";
  }
  return 0;
}

int run_metrics(const std::string& log_path, double settle, std::optional<double> gamma_deg) {
  std::ifstream in(log_path);
  if (!in) throw hatm::Error(hatm::ErrorCode::kBadInput, "cannot open " + log_path);
  const hatm::sim::TrajectoryLog log = hatm::sim::read_log_csv(in);
  std::optional<double> gamma;
  if (gamma_deg) gamma = hatm::deg_to_rad(*gamma_deg);
  const auto metrics = hatm::sim::compute_tracking_metrics(log, settle, gamma);
  std::cout << metrics_json(metrics).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid aerial/terrestrial manipulator simulation toolkit"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  CLI::App* simulate = app.add_subcommand("simulate", "Run a closed-loop scenario");
  simulate->add_option("scenario", scenario_path, "Scenario file (JSON, comments allowed)")
      ->required();
  simulate->add_option("--out", out_dir, "Output directory");
  simulate->add_option("--seed", seed, "Override the noise seed");
  simulate->add_option("--override", overrides, "Scenario override key.path=value (repeatable)");

  std::string est_log, est_out;
  int horizon = 20;
  double mass = 2.4, gravity = 9.81;
  CLI::App* estimate = app.add_subcommand("estimate", "Replay a measurement log through the estimator");
  estimate->add_option("log", est_log, "CSV of t,y1..y10,u1..u4 rows")->required();
  estimate->add_option("--horizon", horizon, "Estimation window length");
  estimate->add_option("--mass", mass, "Vehicle mass used by the model");
  estimate->add_option("--gravity", gravity, "Gravity used by the model");
  estimate->add_option("--out", est_out, "Output file (stdout if omitted)");

  std::string met_log;
  double settle = 0.0;
  std::optional<double> gamma_deg;
  CLI::App* metrics = app.add_subcommand("metrics", "Compute tracking metrics of a simulation log");
  metrics->add_option("log", met_log, "log.csv produced by simulate")->required();
  metrics->add_option("--settle", settle, "Ignore records before this time (s)");
  metrics->add_option("--gamma-deg", gamma_deg, "True inclination for the estimate error");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return run_simulate(scenario_path, out_dir, seed, overrides);
    if (estimate->parsed()) return run_estimate(est_log, horizon, mass, gravity, est_out);
    if (metrics->parsed()) return run_metrics(met_log, settle, gamma_deg);
  } catch (const hatm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
