#include "doctest.h"

#include "lipfit/dynamics.hpp"
#include "lipfit/error.hpp"
#include "lipfit/linalg.hpp"
#include "lipfit/training.hpp"

using namespace lipfit;

namespace {

Architecture arch(Index in, Index out, Index width, Index depth, Activation a = Activation::Tanh,
                  LayerKind k = LayerKind::Sandwich) {
  Architecture ar;
  ar.input_dim = in;
  ar.output_dim = out;
  ar.width = width;
  ar.depth = depth;
  ar.activation = a;
  ar.layer = k;
  return ar;
}

LabeledDataset small_data(Index n, std::uint64_t seed) {
  const Domain dom({-2.0, -10.0, -2.0}, {2.0, 10.0, 2.0});
  return make_dataset(benchmark_vector_field().rhs, sample_uniform(dom, n, seed), 0.0, 0);
}

LabeledDataset two_points() {
  LabeledDataset ds;
  ds.inputs.resize(2, 1);
  ds.outputs.resize(2, 1);
  ds.inputs << 0, 1;
  ds.outputs << 0, 1;
  return ds;
}

AugLagState random_state(const LabeledDataset& ds, Rng& rng) {
  AugLagState s;
  s.lambda.resize(ds.size(), ds.output_dim());
  for (Index i = 0; i < s.lambda.size(); ++i) s.lambda.data()[i] = rng.normal();
  s.mu = 0.5 + 5.0 * rng.uniform();
  s.nu = 2.0 * rng.uniform();
  return s;
}

}  // namespace

TEST_CASE("objective gradients pass finite differences") {
  const LabeledDataset ds = small_data(6, 1);
  const double l_data = empirical_lipschitz_lower(ds);
  Rng rng(2);
  for (LayerKind k : {LayerKind::Spectral, LayerKind::Orthogonal, LayerKind::Sandwich}) {
    CAPTURE(to_string(k));
    // Off the kink of max(η, L_data).
    LipNet net(arch(3, 3, 8, 3, Activation::Tanh, k), 1.3 * l_data, 3);
    const auto params = net.parameters();
    for (Problem p : {Problem::P1, Problem::P2}) {
      const AugLagState st = random_state(ds, rng);
      const Formulation form{p, 0.5};
      const double err = grad_check(
          params, [&](ad::Tape& t) { return augmented_lagrangian(t, net, ds, form, st, l_data); }, 1e-6);
      CHECK(err <= 1e-5);
    }
    net.set_psi_trainable(false);
    CHECK(grad_check(params, [&](ad::Tape& t) { return mse_objective(t, net, ds); }, 1e-6) <= 1e-5);
  }
  MlpNet mlp(arch(3, 3, 8, 3), 4);
  CHECK(grad_check(mlp.parameters(), [&](ad::Tape& t) { return weight_decay_objective(t, mlp, ds, 0.1); }, 1e-6) <=
        1e-5);
}

TEST_CASE("P1 hinge: the objective is max(eta, L_data) scaled") {
  const LabeledDataset ds = two_points();
  LipNet net(arch(1, 1, 4, 1), 0.5, 0);
  AugLagState st;
  st.lambda = Tensor::Zero(2, 1);
  st.mu = 1e-300;  // penalty negligible
  ad::Tape tape;
  const Tensor c = net.evaluate(ds.inputs) - ds.outputs;
  const double value = augmented_lagrangian(tape, net, ds, {Problem::P1, 0.0}, st, 1.0).scalar();
  CHECK(value == doctest::Approx(1.0 + 0.5e-300 * c.squaredNorm()));
}

TEST_CASE("P1 reaches the minimal constant on two points") {
  const LabeledDataset ds = two_points();
  TrainConfig cfg;
  cfg.inner_steps = 1500;
  cfg.lr = 3e-3;
  cfg.seed = 1;
  LipNet net(arch(1, 1, 8, 2, Activation::Relu), std::exp(0.5), 2);
  const TrainingReport r = train(net, ds, {Problem::P1, 0.0}, cfg);
  // A fit with residual e at both points needs η ≥ 1 − 2e.
  CHECK(r.eta.value() >= 1.0 - 2.0 * r.train_max);
  CHECK(r.eta.value() <= 1.05);
  CHECK(r.train_max <= 1e-3);
  CHECK(r.status == TrainStatus::Converged);
  CHECK(r.l_data == 1.0);
}

TEST_CASE("P3 freezes the certificate") {
  const LabeledDataset ds = small_data(20, 5);
  const double l_data = empirical_lipschitz_lower(ds);
  TrainConfig cfg;
  cfg.outer_iters = 2;
  cfg.inner_steps = 50;
  for (double rho : {0.0, 0.5}) {
    LipNet net(arch(3, 3, 8, 2), 7.0, 1);
    const TrainingReport r = train(net, ds, {Problem::P3, rho}, cfg);
    CHECK(net.certified_lipschitz().value() == doctest::Approx(l_data + rho).epsilon(1e-14));
    CHECK_FALSE(net.psi_trainable());
    CHECK(r.status == TrainStatus::Finished);
    CHECK(r.steps == 100);
  }
}

TEST_CASE("P2 keeps eta under its cap") {
  const LabeledDataset ds = small_data(20, 6);
  const double l_data = empirical_lipschitz_lower(ds);
  TrainConfig cfg;
  cfg.outer_iters = 3;
  cfg.inner_steps = 100;
  LipNet net(arch(3, 3, 8, 2), 3.0 * l_data, 1);
  const double rho = 0.2 * l_data;
  const TrainingReport r = train(net, ds, {Problem::P2, rho}, cfg);
  CHECK(r.eta.value() <= l_data + rho + 1e-9);
  for (const auto& q : r.rounds) CHECK(q.eta <= l_data + rho + 1e-9);
}

TEST_CASE("training is deterministic") {
  const LabeledDataset ds = small_data(15, 7);
  TrainConfig cfg;
  cfg.outer_iters = 2;
  cfg.inner_steps = 60;
  LipNet a(arch(3, 3, 8, 2), 5.0, 1), b(arch(3, 3, 8, 2), 5.0, 1);
  const TrainingReport ra = train(a, ds, {Problem::P1, 0.0}, cfg);
  const TrainingReport rb = train(b, ds, {Problem::P1, 0.0}, cfg);
  CHECK(ra.eta == rb.eta);
  CHECK(a.evaluate(ds.inputs) == b.evaluate(ds.inputs));
  CHECK(ra.to_json() == rb.to_json());
}

TEST_CASE("multistart keeps the best start") {
  const LabeledDataset ds = two_points();
  TrainConfig cfg;
  cfg.inner_steps = 300;
  cfg.outer_iters = 4;
  cfg.restarts = 3;
  const MultistartResult best = train_multistart(arch(1, 1, 4, 1, Activation::Relu), 1.5, 10, ds, {Problem::P1, 0.0}, cfg);
  cfg.restarts = 1;
  for (int k = 0; k < 3; ++k) {
    LipNet net(arch(1, 1, 4, 1, Activation::Relu), 1.5, 10 + k);
    const TrainingReport r = train(net, ds, {Problem::P1, 0.0}, cfg);
    if (r.status == best.report.status) CHECK(best.report.eta.value() <= r.eta.value());
    if (k == best.report.start) CHECK(r.eta == best.report.eta);
  }
  CHECK(best.net.eta() == best.report.eta.value());
}

TEST_CASE("divergence restores the last good parameters") {
  const LabeledDataset ds = small_data(10, 8);
  TrainConfig cfg;
  cfg.outer_iters = 3;
  cfg.inner_steps = 20;
  cfg.lr = 1e300;
  MlpNet mlp(arch(3, 3, 8, 2, Activation::Relu), 2);
  const Tensor before = mlp.evaluate(ds.inputs);
  try {
    train_mlp_baseline(mlp, ds, 0.0, cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.kind() == ErrorKind::Divergence);
  }
  CHECK(mlp.evaluate(ds.inputs) == before);
}

TEST_CASE("weight decay shrinks the parameters") {
  const LabeledDataset ds = small_data(30, 9);
  TrainConfig cfg;
  cfg.outer_iters = 1;
  cfg.inner_steps = 400;
  cfg.lr = 3e-3;
  auto norm = [](MlpNet& m) {
    double s = 0;
    for (Parameter* p : m.parameters()) s += p->value.squaredNorm();
    return s;
  };
  MlpNet free(arch(3, 3, 16, 2, Activation::Relu), 3), decayed(arch(3, 3, 16, 2, Activation::Relu), 3);
  const TrainingReport r0 = train_mlp_baseline(free, ds, 0.0, cfg);
  const TrainingReport r1 = train_mlp_baseline(decayed, ds, 1.0, cfg);
  CHECK(norm(decayed) < norm(free));
  CHECK(r1.train_mse > r0.train_mse);
  CHECK(r0.status == TrainStatus::Finished);
  CHECK_FALSE(r0.formulation.has_value());
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lr = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.violation_factor = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.restarts = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.inner_steps = 7;
  cfg.restarts = 3;
  CHECK(TrainConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());
  CHECK(problem_from_string("P2") == Problem::P2);
  CHECK_THROWS_AS(problem_from_string("P4"), Error);
}

TEST_CASE("metrics of exact and offset models") {
  const Domain dom({-2.0, -10.0, -2.0}, {2.0, 10.0, 2.0});
  const LabeledDataset train = small_data(20, 1), test = small_data(30, 2);
  // A linear map for which the exact answer is known: y = x + c.
  std::vector<Parameter> w{Parameter("W1", Tensor::Identity(3, 3))};
  std::vector<Parameter> b{Parameter("b1", Tensor::Zero(1, 3))};
  b[0].value << 1.0, 2.0, 2.0;
  MlpNet shift(std::move(w), std::move(b), Activation::Identity);
  LabeledDataset tr = train, te = test;
  tr.outputs = train.inputs;
  te.outputs = test.inputs;
  const MetricsReport m = evaluate_metrics(shift, tr, te, dom, {200, 5, 1});
  CHECK(m.train_mse == doctest::Approx(9.0));
  CHECK(m.train_max == doctest::Approx(3.0));
  CHECK(m.test_mse == doctest::Approx(9.0));
  CHECK(m.test_max == doctest::Approx(3.0));
  CHECK(m.empirical_lipschitz == doctest::Approx(1.0));
  CHECK_FALSE(m.certified_lipschitz.has_value());

  tr.outputs.rowwise() += shift.bias(0).value.row(0);
  te.outputs.rowwise() += shift.bias(0).value.row(0);
  const MetricsReport exact = evaluate_metrics(shift, tr, te, dom, {10, 1, 1});
  CHECK(exact.train_max == 0.0);
  CHECK(exact.test_mse == 0.0);
}
