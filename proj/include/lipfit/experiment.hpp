#pragma once

// End-to-end runs of the stable-dynamics study: data generation, training,
// evaluation, simulation and report tables. Everything is a deterministic
// function of the config and its seeds.

#include "lipfit/bounds.hpp"
#include "lipfit/data.hpp"
#include "lipfit/dynamics.hpp"
#include "lipfit/network.hpp"
#include "lipfit/training.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lipfit {

inline constexpr const char* kExperimentSchema = "lipfit.experiment/1";

struct DatasetSpec {
  Index grid_per_dim = 3;
  Index uniform = 500;
  double noise = 0.0;
  std::uint64_t seed = 1;
  Index test = 10000;
  std::uint64_t test_seed = 2;
  Index covering_resolution = 41;
};

struct ModelSpec {
  std::string type = "lipnet";  // lipnet | mlp
  Architecture arch;
  std::uint64_t seed = 3;
  double psi_offset = 0.5;  // LipNet starts at η = L_data·e^psi_offset
};

struct FormulationSpec {
  Problem kind = Problem::P1;
  std::optional<double> rho;         // absolute
  std::optional<double> rho_factor;  // multiple of L_data
  double resolve(double l_data) const;
};

struct EvaluationSpec {
  Index pairs = 2000;
  int refine_steps = 20;
  std::uint64_t seed = 4;
};

struct SimulationSpec {
  double dt = 0.01;
  double horizon = 10.0;
  Index initial_conditions = 500;
  std::uint64_t seed = 5;
};

struct ExperimentConfig {
  Domain domain{{-2.0, -10.0, -2.0}, {2.0, 10.0, 2.0}};
  DatasetSpec dataset;
  ModelSpec model;
  FormulationSpec formulation;
  TrainConfig training;
  EvaluationSpec evaluation;
  SimulationSpec simulation;
  std::filesystem::path output = "run";

  // Throws Config errors that name the offending line of `text`.
  static ExperimentConfig parse(const std::string& text, const std::string& source = "config");
  static ExperimentConfig load(const std::filesystem::path& path);
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

// The benchmark system is the data generator of the study.
BatchFn generator();

struct DataManifest {
  Index n_train = 0;
  Index n_test = 0;
  double l_data = 0.0;
  CoveringEstimate covering;
  nlohmann::json to_json() const;
};

// Writes train.csv, test.csv and manifest.json under cfg.output.
DataManifest generate_data(const ExperimentConfig& cfg);

struct RunResult {
  std::string name;
  TrainingReport training;
  MetricsReport metrics;
  nlohmann::json to_json() const;
};

std::string default_run_name(const ExperimentConfig& cfg);

// Trains one model on cfg.output/train.csv and writes
// cfg.output/runs/<name>/{checkpoint.json, report.json}.
RunResult train_run(const ExperimentConfig& cfg, const std::string& name = "");

// Simulates each checkpoint against the benchmark system from shared initial
// conditions; writes per-model error curves, one sample trajectory per model,
// simulation.json and an SVG of the MSE curves into `out_dir`.
nlohmann::json simulate_models(const ExperimentConfig& cfg, const std::vector<std::filesystem::path>& checkpoints,
                               const std::vector<std::string>& labels, const std::filesystem::path& out_dir);

struct ReportSummary {
  Index runs = 0;
  std::vector<std::string> missing;  // run directories without a usable report
  std::vector<std::filesystem::path> files;
  nlohmann::json to_json() const;
};

inline constexpr const char* kTable1Header =
    "model,rho,train_mse,train_max,test_mse,test_max,emp_lipschitz,cert_lipschitz";
inline constexpr const char* kTable2Header = "weight_decay,train_mse,train_max,test_mse,test_max,emp_lipschitz";
inline constexpr const char* kTable3Header =
    "setup,layer,train_mse,train_max,test_mse,test_max,emp_lipschitz,cert_lipschitz";

// Collects <run_dir>/runs/*/report.json into table1.csv, table2.csv,
// table3.csv and, when simulation output exists, fig2.svg.
ReportSummary build_report(const std::filesystem::path& run_dir);

}  // namespace lipfit
