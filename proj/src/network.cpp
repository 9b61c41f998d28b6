#include "lipfit/network.hpp"

#include "lipfit/error.hpp"
#include "lipfit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace lipfit {

Tensor Model::evaluate(const Tensor& x) const {
  if (x.cols() != input_dim()) {
    fail(ErrorKind::Dimension,
         type_name() + " expects input width " + std::to_string(input_dim()) + ", got " + std::to_string(x.cols()));
  }
  ad::Tape tape;
  // Eval mode binds parameters as constants and does not touch model state.
  auto* self = const_cast<Model*>(this);
  Tensor out = self->forward(tape, tape.constant(x), Mode::Eval).value();
  require(out.allFinite(), ErrorKind::Numeric, type_name() + ": non-finite output");
  return out;
}

Vector Model::evaluate_point(const Vector& x) const {
  Tensor row = x.transpose();
  return evaluate(row).row(0).transpose();
}

BatchFn Model::as_batch_fn() const {
  return [this](const Tensor& pts) { return evaluate(pts); };
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (Parameter* p : const_cast<Model*>(this)->parameters()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

// --- MLP ----------------------------------------------------------------------

MlpNet::MlpNet(const Architecture& arch, std::uint64_t seed) : act_(arch.activation) {
  require(arch.input_dim >= 1 && arch.output_dim >= 1 && arch.width >= 1 && arch.depth >= 0, ErrorKind::Config,
          "mlp: dimensions must be positive");
  Rng rng(seed);
  Index prev = arch.input_dim;
  const double gain = arch.activation == Activation::Relu ? 2.0 : 1.0;
  for (Index k = 0; k <= arch.depth; ++k) {
    const bool head = k == arch.depth;
    const Index next = head ? arch.output_dim : arch.width;
    Tensor w(next, prev);
    const double stddev = std::sqrt((head ? 1.0 : gain) / static_cast<double>(prev));
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = stddev * rng.normal();
    weights_.emplace_back("W" + std::to_string(k + 1), std::move(w));
    biases_.emplace_back("b" + std::to_string(k + 1), Tensor::Zero(1, next));
    prev = next;
  }
}

MlpNet::MlpNet(std::vector<Parameter> weights, std::vector<Parameter> biases, Activation act)
    : weights_(std::move(weights)), biases_(std::move(biases)), act_(act) {
  require(!weights_.empty() && weights_.size() == biases_.size(), ErrorKind::Config, "mlp: weights/biases mismatch");
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    require(biases_[k].value.rows() == 1 && biases_[k].value.cols() == weights_[k].value.rows(), ErrorKind::Config,
            "mlp: bias " + std::to_string(k + 1) + " has wrong shape");
    if (k > 0) {
      require(weights_[k].value.cols() == weights_[k - 1].value.rows(), ErrorKind::Config,
              "mlp: layer " + std::to_string(k + 1) + " does not chain");
    }
  }
}

ad::Var MlpNet::forward(ad::Tape& tape, ad::Var x, Mode mode) {
  if (x.cols() != input_dim()) {
    fail(ErrorKind::Dimension, "mlp expects input width " + std::to_string(input_dim()));
  }
  auto bind = [&](Parameter& p) { return mode == Mode::Train ? tape.param(p) : tape.constant(p.value); };
  ad::Var h = x;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    h = ad::add_row(ad::matmul_nt(h, bind(weights_[k])), bind(biases_[k]));
    if (k + 1 < weights_.size()) h = ad::activate(h, act_);
  }
  return h;
}

std::vector<Parameter*> MlpNet::parameters() {
  std::vector<Parameter*> out;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    out.push_back(&weights_[k]);
    out.push_back(&biases_[k]);
  }
  return out;
}

namespace {

nlohmann::json tensor_json(const Tensor& t) {
  return {{"shape", {t.rows(), t.cols()}}, {"values", std::vector<double>(t.data(), t.data() + t.size())}};
}

Tensor tensor_from_json(const nlohmann::json& j) {
  const Index r = j.at("shape").at(0).get<Index>();
  const Index c = j.at("shape").at(1).get<Index>();
  const auto vals = j.at("values").get<std::vector<double>>();
  require(static_cast<Index>(vals.size()) == r * c, ErrorKind::Config, "checkpoint: value count mismatch");
  Tensor t(r, c);
  for (Index i = 0; i < r * c; ++i) t.data()[i] = vals[static_cast<std::size_t>(i)];
  require(t.allFinite(), ErrorKind::Numeric, "checkpoint: non-finite parameter");
  return t;
}

}  // namespace

nlohmann::json MlpNet::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    layers.push_back({{"W", tensor_json(weights_[k].value)}, {"b", tensor_json(biases_[k].value)}});
  }
  return {{"schema", kCheckpointSchema}, {"model", "mlp"}, {"activation", to_string(act_)}, {"layers", layers}};
}

nlohmann::json MlpNet::describe() const {
  std::vector<Index> widths{input_dim()};
  for (const Parameter& w : weights_) widths.push_back(w.value.rows());
  return {{"model", "mlp"},
          {"activation", to_string(act_)},
          {"widths", widths},
          {"parameters", parameter_count()},
          {"certified_lipschitz", nullptr}};
}

// --- LipNet -------------------------------------------------------------------

LipNet::LipNet(const Architecture& arch, double eta0, std::uint64_t seed) : psi_("psi", Tensor::Zero(1, 1)) {
  require(arch.input_dim >= 1 && arch.output_dim >= 1 && arch.width >= 1 && arch.depth >= 0, ErrorKind::Config,
          "lipnet: dimensions must be positive");
  require(eta0 > 0.0 && std::isfinite(eta0), ErrorKind::Argument, "lipnet: initial eta must be positive");
  Rng rng(seed);
  Index prev = arch.input_dim;
  for (Index k = 0; k <= arch.depth; ++k) {
    const bool head = k == arch.depth;
    const Index next = head ? arch.output_dim : arch.width;
    auto layer = make_layer(arch.layer, prev, next, head ? Activation::Identity : arch.activation);
    layer->initialize(rng);
    layers_.push_back(std::move(layer));
    prev = next;
  }
  set_eta(eta0);
}

LipNet::LipNet(std::vector<std::unique_ptr<Layer>> layers, double psi, bool psi_trainable)
    : psi_("psi", Tensor::Constant(1, 1, psi)), layers_(std::move(layers)) {
  require(!layers_.empty(), ErrorKind::Config, "lipnet: no layers");
  require(std::isfinite(psi), ErrorKind::Numeric, "lipnet: non-finite psi");
  for (std::size_t k = 1; k < layers_.size(); ++k) {
    require(layers_[k]->in_dim() == layers_[k - 1]->out_dim(), ErrorKind::Config,
            "lipnet: layer " + std::to_string(k + 1) + " does not chain");
  }
  psi_.trainable = psi_trainable;
}

LipNet::LipNet(const LipNet& other) : Model(other), psi_(other.psi_) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

void LipNet::set_eta(double eta) {
  require(eta > 0.0 && std::isfinite(eta), ErrorKind::Argument, "lipnet: eta must be positive and finite");
  psi_.value(0, 0) = std::log(eta);
}

ad::Var LipNet::forward(ad::Tape& tape, ad::Var x, Mode mode) {
  if (x.cols() != input_dim()) {
    fail(ErrorKind::Dimension, "lipnet expects input width " + std::to_string(input_dim()));
  }
  ad::Var psi = mode == Mode::Train ? tape.param(psi_) : tape.constant(psi_.value);
  ad::Var gain = ad::exp(ad::scale(psi, 0.5));  // √η
  ad::Var h = ad::scale_by(x, gain);
  for (auto& layer : layers_) h = layer->forward(tape, h, mode);
  return ad::scale_by(h, gain);
}

std::vector<Parameter*> LipNet::parameters() {
  std::vector<Parameter*> out{&psi_};
  for (auto& l : layers_) {
    for (Parameter* p : l->parameters()) out.push_back(p);
  }
  return out;
}

nlohmann::json LipNet::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) layers.push_back(l->to_json());
  return {{"schema", kCheckpointSchema},
          {"model", "lipnet"},
          {"psi", psi()},
          {"psi_trainable", psi_.trainable},
          {"layers", layers}};
}

nlohmann::json LipNet::describe() const {
  std::vector<Index> widths{input_dim()};
  for (const auto& l : layers_) widths.push_back(l->out_dim());
  return {{"model", "lipnet"},
          {"layer", to_string(layers_.front()->kind())},
          {"activation", to_string(layers_.front()->activation())},
          {"widths", widths},
          {"parameters", parameter_count()},
          {"psi", psi()},
          {"certified_lipschitz", eta()}};
}

// --- checkpoints --------------------------------------------------------------

std::unique_ptr<Model> model_from_json(const nlohmann::json& j) {
  try {
    require(j.value("schema", "") == kCheckpointSchema, ErrorKind::Config,
            "checkpoint: expected schema " + std::string(kCheckpointSchema));
    const std::string type = j.at("model").get<std::string>();
    if (type == "mlp") {
      std::vector<Parameter> ws, bs;
      std::size_t k = 0;
      for (const auto& layer : j.at("layers")) {
        ++k;
        ws.emplace_back("W" + std::to_string(k), tensor_from_json(layer.at("W")));
        bs.emplace_back("b" + std::to_string(k), tensor_from_json(layer.at("b")));
      }
      return std::make_unique<MlpNet>(std::move(ws), std::move(bs),
                                      activation_from_string(j.at("activation").get<std::string>()));
    }
    if (type == "lipnet") {
      std::vector<std::unique_ptr<Layer>> layers;
      for (const auto& layer : j.at("layers")) layers.push_back(Layer::from_json(layer));
      return std::make_unique<LipNet>(std::move(layers), j.at("psi").get<double>(), j.value("psi_trainable", true));
    }
    fail(ErrorKind::Config, "checkpoint: unknown model type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << model.to_json().dump() << '\n';
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

// --- empirical Lipschitz lower bound -------------------------------------------

double empirical_lipschitz(const BatchFn& f, const Domain& domain, const EmpiricalLipschitzOptions& opts) {
  require(opts.pairs >= 1, ErrorKind::Argument, "empirical_lipschitz: pairs must be >= 1");
  const Index n = domain.dim();
  const Index p = opts.pairs;
  Rng rng(opts.seed);

  auto clamp_row = [&](auto&& row) {
    for (Index d = 0; d < n; ++d) row(d) = std::clamp(row(d), domain.lower()[d], domain.upper()[d]);
  };

  Tensor a(p, n), b(p, n);
  for (Index i = 0; i < p; ++i) {
    for (Index d = 0; d < n; ++d) a(i, d) = rng.uniform(domain.lower()[d], domain.upper()[d]);
    // Half the pairs span the domain, half are local.
    const bool local = i % 2 == 1;
    for (Index d = 0; d < n; ++d) {
      b(i, d) = local ? a(i, d) + 0.05 * domain.width(d) * rng.normal() : rng.uniform(domain.lower()[d], domain.upper()[d]);
    }
    clamp_row(b.row(i));
    if ((a.row(i) - b.row(i)).norm() == 0.0) b(i, 0) = a(i, 0) > domain.lower()[0] ? domain.lower()[0] : domain.upper()[0];
  }
  Tensor fa = f(a);
  Tensor fb = f(b);
  auto quotient = [](const auto& x1, const auto& x2, const auto& y1, const auto& y2) {
    const double dx = (x1 - x2).norm();
    return dx > 0.0 ? (y1 - y2).norm() / dx : 0.0;
  };
  std::vector<double> q(static_cast<std::size_t>(p));
  std::vector<double> step(static_cast<std::size_t>(p), 0.25);
  double best = 0.0;
  for (Index i = 0; i < p; ++i) {
    q[i] = quotient(a.row(i), b.row(i), fa.row(i), fb.row(i));
    best = std::max(best, q[i]);
  }

  const Index per_pair = 1 + 2 * n;
  Tensor cand(p * per_pair, n);
  for (int it = 0; it < opts.refine_steps; ++it) {
    for (Index i = 0; i < p; ++i) {
      const double gap = (a.row(i) - b.row(i)).norm();
      cand.row(i * per_pair) = 0.5 * (a.row(i) + b.row(i));
      for (Index d = 0; d < n; ++d) {
        for (Index s = 0; s < 2; ++s) {
          const Index r = i * per_pair + 1 + 2 * d + s;
          cand.row(r) = b.row(i);
          cand(r, d) += (s == 0 ? 1.0 : -1.0) * step[i] * gap;
          clamp_row(cand.row(r));
        }
      }
    }
    const Tensor fc = f(cand);
    for (Index i = 0; i < p; ++i) {
      const Index base = i * per_pair;
      int choice = -1;
      double top = q[i];
      const double q_left = quotient(a.row(i), cand.row(base), fa.row(i), fc.row(base));
      const double q_right = quotient(cand.row(base), b.row(i), fc.row(base), fb.row(i));
      if (q_left > top) top = q_left, choice = 0;
      if (q_right > top) top = q_right, choice = 1;
      for (Index r = 1; r < per_pair; ++r) {
        const double qr = quotient(a.row(i), cand.row(base + r), fa.row(i), fc.row(base + r));
        if (qr > top) top = qr, choice = static_cast<int>(1 + r);
      }
      if (choice < 0) {
        step[i] *= 0.5;
        continue;
      }
      if (choice == 0) {
        b.row(i) = cand.row(base);
        fb.row(i) = fc.row(base);
      } else if (choice == 1) {
        a.row(i) = cand.row(base);
        fa.row(i) = fc.row(base);
      } else {
        const Index r = base + (choice - 1);
        b.row(i) = cand.row(r);
        fb.row(i) = fc.row(r);
      }
      q[i] = top;
      best = std::max(best, top);
    }
  }
  return best;
}

double empirical_lipschitz_net(const Model& net, const Domain& domain, Index pairs, int refine_steps,
                               std::uint64_t seed) {
  require(net.input_dim() == domain.dim(), ErrorKind::Dimension, "empirical_lipschitz_net: domain dimension mismatch");
  return empirical_lipschitz(net.as_batch_fn(), domain, {pairs, refine_steps, seed});
}

}  // namespace lipfit
