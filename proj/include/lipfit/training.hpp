#pragma once

#include "lipfit/data.hpp"
#include "lipfit/error.hpp"
#include "lipfit/network.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace lipfit {

enum class Problem { P1, P2, P3 };

std::string to_string(Problem p);
Problem problem_from_string(const std::string& s);

struct Formulation {
  Problem kind = Problem::P1;
  double rho = 0.0;  // P2 / P3 only
};

struct TrainConfig {
  int outer_iters = 12;
  int inner_steps = 2000;
  double lr = 1e-3;
  double lr_min = 0.0;  // floor of the per-round cosine schedule
  double mu0 = 1.0;
  double mu_growth = 10.0;      // β
  double violation_factor = 0.25;  // τ
  double tol_c = 1e-4;
  double mu_max = 1e8;
  double weight_decay = 0.0;  // MLP baseline only
  std::uint64_t seed = 0;
  int restarts = 1;  // independent initializations tried by train_multistart

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct AugLagState {
  Tensor lambda;    // N×m, one row per interpolation constraint
  double mu = 1.0;
  double nu = 0.0;  // multiplier of η − L_data − ρ ≤ 0 (P2)
  std::vector<double> history;  // max_i |c_i| after each outer round
};

enum class TrainStatus { Converged, NotConverged, Finished };

std::string to_string(TrainStatus s);

struct OuterRecord {
  int round = 0;
  double violation = 0.0;
  double mu = 0.0;
  double eta = 0.0;
  double objective = 0.0;
};

struct TrainingReport {
  std::string model;
  std::optional<Formulation> formulation;  // empty for the MLP baseline
  double weight_decay = 0.0;
  TrainStatus status = TrainStatus::Finished;
  double l_data = 0.0;
  double train_mse = 0.0;
  double train_max = 0.0;
  std::optional<double> eta;
  double final_violation = 0.0;
  double final_mu = 0.0;
  int outer_rounds = 0;
  int start = 0;  // which initialization won, see train_multistart
  long steps = 0;
  std::vector<OuterRecord> rounds;
  TrainConfig config;

  nlohmann::json to_json() const;
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what) : Error(ErrorKind::Divergence, what) {}
};

// Objectives, exposed for gradient checking. All are built on `tape` with the
// model's parameters bound in training mode.
ad::Var mse_objective(ad::Tape& tape, Model& model, const LabeledDataset& ds);
ad::Var weight_decay_objective(ad::Tape& tape, Model& model, const LabeledDataset& ds, double weight_decay);
// Augmented Lagrangian of P1 or P2 at the given multiplier state.
ad::Var augmented_lagrangian(ad::Tape& tape, LipNet& net, const LabeledDataset& ds, const Formulation& form,
                             const AugLagState& state, double l_data);

// Trains in place. P1/P2 run the augmented Lagrangian outer loop; P3 freezes
// η = ρ + L_data and minimizes the training MSE.
TrainingReport train(LipNet& net, const LabeledDataset& ds, const Formulation& form, const TrainConfig& cfg);

struct MultistartResult {
  LipNet net;
  TrainingReport report;
};

// Trains cfg.restarts copies initialized from seeds seed, seed+1, ... and
// keeps the best. P1/P2: converged runs first, then smaller η, then smaller
// violation. P3: smaller training MSE. A start that diverges is skipped; if
// every start diverges the last error is rethrown.
MultistartResult train_multistart(const Architecture& arch, double eta0, std::uint64_t seed, const LabeledDataset& ds,
                                  const Formulation& form, const TrainConfig& cfg);

// Minimizes MSE + weight_decay·|θ|² over all parameters.
TrainingReport train_mlp_baseline(MlpNet& net, const LabeledDataset& ds, double weight_decay, const TrainConfig& cfg);

struct MetricsReport {
  double train_mse = 0.0;
  double train_max = 0.0;
  double test_mse = 0.0;
  double test_max = 0.0;
  double empirical_lipschitz = 0.0;
  std::optional<double> certified_lipschitz;
  Index pairs = 0;
  int refine_steps = 0;

  nlohmann::json to_json() const;
};

struct MetricsOptions {
  Index pairs = 2000;
  int refine_steps = 20;
  std::uint64_t seed = 0;
};

MetricsReport evaluate_metrics(const Model& model, const LabeledDataset& train, const LabeledDataset& test,
                               const Domain& domain, const MetricsOptions& opts = {});

}  // namespace lipfit
