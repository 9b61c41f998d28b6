#include "lipfit/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lipfit {

std::string to_string(Problem p) {
  switch (p) {
    case Problem::P1: return "P1";
    case Problem::P2: return "P2";
    case Problem::P3: return "P3";
  }
  return "?";
}

Problem problem_from_string(const std::string& s) {
  if (s == "P1" || s == "p1") return Problem::P1;
  if (s == "P2" || s == "p2") return Problem::P2;
  if (s == "P3" || s == "p3") return Problem::P3;
  fail(ErrorKind::Config, "unknown formulation '" + s + "' (expected P1, P2 or P3)");
}

std::string to_string(TrainStatus s) {
  switch (s) {
    case TrainStatus::Converged: return "converged";
    case TrainStatus::NotConverged: return "not-converged";
    case TrainStatus::Finished: return "finished";
  }
  return "?";
}

void TrainConfig::validate() const {
  require(outer_iters >= 1 && inner_steps >= 1, ErrorKind::Config, "train: outer_iters and inner_steps must be >= 1");
  require(lr > 0.0 && lr_min >= 0.0 && lr_min <= lr, ErrorKind::Config, "train: need 0 <= lr_min <= lr, lr > 0");
  require(mu0 > 0.0 && mu_growth >= 1.0 && mu_max >= mu0, ErrorKind::Config, "train: invalid penalty schedule");
  require(violation_factor > 0.0 && violation_factor <= 1.0, ErrorKind::Config, "train: tau must be in (0, 1]");
  require(tol_c > 0.0, ErrorKind::Config, "train: tol_c must be positive");
  require(weight_decay >= 0.0, ErrorKind::Config, "train: weight_decay must be >= 0");
  require(restarts >= 1, ErrorKind::Config, "train: restarts must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"outer_iters", outer_iters},   {"inner_steps", inner_steps}, {"lr", lr},
          {"lr_min", lr_min},             {"mu0", mu0},                 {"mu_growth", mu_growth},
          {"violation_factor", violation_factor}, {"tol_c", tol_c},     {"mu_max", mu_max},
          {"weight_decay", weight_decay}, {"seed", seed},               {"restarts", restarts}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.outer_iters = j.value("outer_iters", c.outer_iters);
  c.inner_steps = j.value("inner_steps", c.inner_steps);
  c.lr = j.value("lr", c.lr);
  c.lr_min = j.value("lr_min", c.lr_min);
  c.mu0 = j.value("mu0", c.mu0);
  c.mu_growth = j.value("mu_growth", c.mu_growth);
  c.violation_factor = j.value("violation_factor", c.violation_factor);
  c.tol_c = j.value("tol_c", c.tol_c);
  c.mu_max = j.value("mu_max", c.mu_max);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.seed = j.value("seed", c.seed);
  c.restarts = j.value("restarts", c.restarts);
  return c;
}

nlohmann::json TrainingReport::to_json() const {
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : rounds) {
    rs.push_back({{"round", r.round}, {"violation", r.violation}, {"mu", r.mu}, {"eta", r.eta}, {"objective", r.objective}});
  }
  nlohmann::json j = {{"model", model},
                      {"status", to_string(status)},
                      {"l_data", l_data},
                      {"train_mse", train_mse},
                      {"train_max", train_max},
                      {"eta", eta ? nlohmann::json(*eta) : nlohmann::json(nullptr)},
                      {"final_violation", final_violation},
                      {"final_mu", final_mu},
                      {"outer_rounds", outer_rounds},
                      {"start", start},
                      {"steps", steps},
                      {"rounds", rs},
                      {"config", config.to_json()}};
  if (formulation) {
    j["formulation"] = to_string(formulation->kind);
    j["rho"] = formulation->rho;
  } else {
    j["formulation"] = nullptr;
    j["weight_decay"] = weight_decay;
  }
  return j;
}

nlohmann::json MetricsReport::to_json() const {
  return {{"train_mse", train_mse},
          {"train_max", train_max},
          {"test_mse", test_mse},
          {"test_max", test_max},
          {"empirical_lipschitz", empirical_lipschitz},
          {"certified_lipschitz", certified_lipschitz ? nlohmann::json(*certified_lipschitz) : nlohmann::json(nullptr)},
          {"pairs", pairs},
          {"refine_steps", refine_steps}};
}

// --- objectives ---------------------------------------------------------------

namespace {

ad::Var residual(ad::Tape& tape, Model& model, const LabeledDataset& ds) {
  require(ds.input_dim() == model.input_dim() && ds.output_dim() == model.output_dim(), ErrorKind::Dimension,
          "model and dataset dimensions differ");
  return ad::sub(model.forward(tape, tape.constant(ds.inputs), Mode::Train), tape.constant(ds.outputs));
}

double max_row_norm(const Tensor& c) { return c.rowwise().norm().maxCoeff(); }

}  // namespace

ad::Var mse_objective(ad::Tape& tape, Model& model, const LabeledDataset& ds) {
  return ad::scale(ad::sum_squares(residual(tape, model, ds)), 1.0 / static_cast<double>(ds.size()));
}

ad::Var weight_decay_objective(ad::Tape& tape, Model& model, const LabeledDataset& ds, double weight_decay) {
  ad::Var loss = mse_objective(tape, model, ds);
  if (weight_decay == 0.0) return loss;
  for (Parameter* p : model.parameters()) {
    loss = ad::add(loss, ad::scale(ad::sum_squares(tape.param(*p)), weight_decay));
  }
  return loss;
}

ad::Var augmented_lagrangian(ad::Tape& tape, LipNet& net, const LabeledDataset& ds, const Formulation& form,
                             const AugLagState& state, double l_data) {
  require(form.kind != Problem::P3, ErrorKind::Argument, "augmented_lagrangian: P3 has no constraints");
  require(state.lambda.rows() == ds.size() && state.lambda.cols() == ds.output_dim(), ErrorKind::Dimension,
          "augmented_lagrangian: multiplier shape mismatch");
  ad::Var c = residual(tape, net, ds);
  ad::Var lagr = ad::add(ad::sum(ad::hadamard(tape.constant(state.lambda), c)),
                         ad::scale(ad::sum_squares(c), 0.5 * state.mu));
  ad::Var eta = ad::exp(tape.param(net.psi_parameter()));
  // Objective divided by L_data: same minimizers, scale-free penalty balance.
  if (form.kind == Problem::P1) return ad::add(ad::scale(ad::max_scalar(eta, l_data), 1.0 / l_data), lagr);
  // (1/2μ)(max(0, ν + μ g)² − ν²) with g = η − L_data − ρ.
  ad::Var shifted = ad::add_scalar(ad::scale(eta, state.mu), state.nu - state.mu * (l_data + form.rho));
  ad::Var hinge = ad::scale(ad::square(ad::activate(shifted, Activation::Relu)), 0.5 / state.mu);
  return ad::add(ad::add_scalar(hinge, -0.5 * state.nu * state.nu / state.mu), lagr);
}

// --- optimizer ------------------------------------------------------------------

namespace {

class Adam {
 public:
  explicit Adam(std::vector<Parameter*> params) : params_(std::move(params)) {
    for (Parameter* p : params_) {
      m_.push_back(Tensor::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Tensor::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Parameter& p = *params_[k];
      if (!p.trainable) continue;
      m_[k] = kBeta1 * m_[k] + (1.0 - kBeta1) * p.grad;
      v_[k] = kBeta2 * v_[k] + (1.0 - kBeta2) * p.grad.cwiseProduct(p.grad);
      p.value.array() -= lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_, v_;
  long t_ = 0;
};

double cosine_lr(const TrainConfig& cfg, int step, int steps) {
  const double frac = steps > 1 ? static_cast<double>(step) / static_cast<double>(steps - 1) : 0.0;
  return cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

std::vector<Tensor> snapshot(const std::vector<Parameter*>& params) {
  std::vector<Tensor> out;
  for (Parameter* p : params) out.push_back(p->value);
  return out;
}

void restore(const std::vector<Parameter*>& params, const std::vector<Tensor>& values) {
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = values[k];
}

bool grads_finite(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) {
    if (p->trainable && !p->grad.allFinite()) return false;
  }
  return true;
}

// One gradient step; false if the loss or gradient is not finite.
template <class Build>
bool descend(const std::vector<Parameter*>& params, Adam& opt, double lr, Build&& build, double* loss_out) {
  for (Parameter* p : params) p->zero_grad();
  ad::Tape tape;
  ad::Var loss = build(tape);
  const double value = loss.scalar();
  if (!std::isfinite(value)) return false;
  tape.backward(loss);
  if (!grads_finite(params)) return false;
  opt.step(lr);
  if (loss_out != nullptr) *loss_out = value;
  return true;
}

void fill_fit(TrainingReport& r, const Model& model, const LabeledDataset& ds) {
  const Tensor res = model.evaluate(ds.inputs) - ds.outputs;
  r.train_mse = res.rowwise().squaredNorm().sum() / static_cast<double>(ds.size());
  r.train_max = max_row_norm(res);
}

[[noreturn]] void diverged(const std::vector<Parameter*>& params, const std::vector<Tensor>& good, const std::string& who,
                           long step) {
  restore(params, good);
  throw DivergenceError(who + ": non-finite loss or gradient at step " + std::to_string(step) +
                        "; parameters restored to the last good round");
}

}  // namespace

// --- trainers -------------------------------------------------------------------

namespace {
constexpr double kEtaSettle = 1e-3;
}

TrainingReport train(LipNet& net, const LabeledDataset& ds, const Formulation& form, const TrainConfig& cfg) {
  cfg.validate();
  ds.validate();
  require(form.rho >= 0.0 && std::isfinite(form.rho), ErrorKind::Config, "train: rho must be >= 0");
  require(ds.size() >= 2, ErrorKind::Argument, "train: need at least two samples");
  const double l_data = empirical_lipschitz_lower(ds);

  TrainingReport report;
  report.model = "lipnet";
  report.formulation = form;
  report.l_data = l_data;
  report.config = cfg;

  const std::vector<Parameter*> params = net.parameters();
  std::vector<Tensor> good = snapshot(params);
  long steps = 0;

  if (form.kind == Problem::P3) {
    net.set_eta(l_data + form.rho);
    net.set_psi_trainable(false);
    Adam opt(params);
    good = snapshot(params);
    for (int round = 0; round < cfg.outer_iters; ++round) {
      double loss = 0.0;
      for (int s = 0; s < cfg.inner_steps; ++s, ++steps) {
        if (!descend(params, opt, cosine_lr(cfg, s, cfg.inner_steps),
                     [&](ad::Tape& t) { return mse_objective(t, net, ds); }, &loss)) {
          diverged(params, good, "train P3", steps);
        }
      }
      good = snapshot(params);
      report.rounds.push_back({round + 1, 0.0, 0.0, net.eta(), loss});
    }
    report.status = TrainStatus::Finished;
    report.outer_rounds = cfg.outer_iters;
    report.steps = steps;
    report.eta = net.eta();
    fill_fit(report, net, ds);
    report.final_violation = report.train_max;
    return report;
  }

  net.set_psi_trainable(true);
  const double psi_cap = std::log(l_data + form.rho);
  if (form.kind == Problem::P2 && net.psi() > psi_cap) net.psi_parameter().value(0, 0) = psi_cap;

  AugLagState state;
  state.lambda = Tensor::Zero(ds.size(), ds.output_dim());
  state.mu = cfg.mu0;
  Adam opt(params);
  good = snapshot(params);
  double previous = std::numeric_limits<double>::infinity();
  for (int round = 0; round < cfg.outer_iters; ++round) {
    double loss = 0.0;
    const double eta_before = net.eta();
    for (int s = 0; s < cfg.inner_steps; ++s, ++steps) {
      if (!descend(params, opt, cosine_lr(cfg, s, cfg.inner_steps),
                   [&](ad::Tape& t) { return augmented_lagrangian(t, net, ds, form, state, l_data); }, &loss)) {
        diverged(params, good, "train " + to_string(form.kind), steps);
      }
      // P2 keeps η on the feasible side of its cap exactly.
      if (form.kind == Problem::P2 && net.psi() > psi_cap) net.psi_parameter().value(0, 0) = psi_cap;
    }
    good = snapshot(params);

    const Tensor c = net.evaluate(ds.inputs) - ds.outputs;
    const double violation = max_row_norm(c);
    state.history.push_back(violation);
    report.rounds.push_back({round + 1, violation, state.mu, net.eta(), loss});

    state.lambda += state.mu * c;
    if (form.kind == Problem::P2) {
      state.nu = std::max(0.0, state.nu + state.mu * (net.eta() - l_data - form.rho));
    }
    // P1 also waits for η to settle: feasibility alone is reached long before
    // the bound is minimal.
    const bool settled = form.kind != Problem::P1 || std::abs(net.eta() - eta_before) <= kEtaSettle * net.eta();
    if (violation <= cfg.tol_c && settled) break;
    if (violation > cfg.tol_c && violation > cfg.violation_factor * previous) state.mu = std::min(cfg.mu_max, state.mu * cfg.mu_growth);
    previous = violation;
  }

  const auto& h = state.history;
  bool monotone = true;
  for (std::size_t k = h.size() >= 3 ? h.size() - 3 : 0; k + 1 < h.size(); ++k) monotone = monotone && h[k + 1] <= h[k];
  report.status = h.back() <= cfg.tol_c && monotone ? TrainStatus::Converged : TrainStatus::NotConverged;
  report.final_violation = h.back();
  report.final_mu = state.mu;
  report.outer_rounds = static_cast<int>(h.size());
  report.steps = steps;
  report.eta = net.eta();
  fill_fit(report, net, ds);
  return report;
}

MultistartResult train_multistart(const Architecture& arch, double eta0, std::uint64_t seed, const LabeledDataset& ds,
                                  const Formulation& form, const TrainConfig& cfg) {
  cfg.validate();
  auto better = [&](const TrainingReport& a, const TrainingReport& b) {
    if (form.kind == Problem::P3) return a.train_mse < b.train_mse;
    const bool ca = a.status == TrainStatus::Converged, cb = b.status == TrainStatus::Converged;
    if (ca != cb) return ca;
    if (*a.eta != *b.eta) return *a.eta < *b.eta;
    return a.final_violation < b.final_violation;
  };
  std::optional<MultistartResult> best;
  std::optional<DivergenceError> last;
  for (int k = 0; k < cfg.restarts; ++k) {
    LipNet net(arch, eta0, seed + static_cast<std::uint64_t>(k));
    try {
      TrainingReport r = train(net, ds, form, cfg);
      r.start = k;
      if (!best || better(r, best->report)) best.emplace(MultistartResult{net, std::move(r)});
    } catch (const DivergenceError& e) {
      last = e;
    }
  }
  if (!best) throw *last;
  return std::move(*best);
}

TrainingReport train_mlp_baseline(MlpNet& net, const LabeledDataset& ds, double weight_decay, const TrainConfig& cfg) {
  cfg.validate();
  ds.validate();
  require(weight_decay >= 0.0 && std::isfinite(weight_decay), ErrorKind::Config, "weight_decay must be >= 0");

  TrainingReport report;
  report.model = "mlp";
  report.weight_decay = weight_decay;
  report.l_data = ds.size() >= 2 ? empirical_lipschitz_lower(ds) : 0.0;
  report.config = cfg;
  report.config.weight_decay = weight_decay;

  const std::vector<Parameter*> params = net.parameters();
  std::vector<Tensor> good = snapshot(params);
  Adam opt(params);
  long steps = 0;
  for (int round = 0; round < cfg.outer_iters; ++round) {
    double loss = 0.0;
    for (int s = 0; s < cfg.inner_steps; ++s, ++steps) {
      if (!descend(params, opt, cosine_lr(cfg, s, cfg.inner_steps),
                   [&](ad::Tape& t) { return weight_decay_objective(t, net, ds, weight_decay); }, &loss)) {
        diverged(params, good, "train mlp", steps);
      }
    }
    good = snapshot(params);
    report.rounds.push_back({round + 1, 0.0, 0.0, 0.0, loss});
  }
  report.status = TrainStatus::Finished;
  report.outer_rounds = cfg.outer_iters;
  report.steps = steps;
  fill_fit(report, net, ds);
  report.final_violation = report.train_max;
  return report;
}

MetricsReport evaluate_metrics(const Model& model, const LabeledDataset& train, const LabeledDataset& test,
                               const Domain& domain, const MetricsOptions& opts) {
  const SupLossEstimate tr = loss_on_points(model.as_batch_fn(), [&](const Tensor&) { return train.outputs; },
                                            train.inputs);
  const SupLossEstimate te = loss_on_points(model.as_batch_fn(), [&](const Tensor&) { return test.outputs; },
                                            test.inputs);
  MetricsReport m;
  m.train_mse = tr.mse;
  m.train_max = tr.sup;
  m.test_mse = te.mse;
  m.test_max = te.sup;
  m.empirical_lipschitz = empirical_lipschitz_net(model, domain, opts.pairs, opts.refine_steps, opts.seed);
  m.certified_lipschitz = model.certified_lipschitz();
  m.pairs = opts.pairs;
  m.refine_steps = opts.refine_steps;
  return m;
}

}  // namespace lipfit
