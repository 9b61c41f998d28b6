#pragma once

#include "lipfit/data.hpp"
#include "lipfit/layers.hpp"

#include "json.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lipfit {

inline constexpr const char* kCheckpointSchema = "lipfit.checkpoint/1";

struct Architecture {
  Index input_dim = 1;
  Index output_dim = 1;
  Index width = 16;
  Index depth = 2;  // hidden layers
  Activation activation = Activation::Relu;
  LayerKind layer = LayerKind::Sandwich;  // LipNet only
};

class Model {
 public:
  virtual ~Model() = default;

  virtual std::string type_name() const = 0;
  virtual Index input_dim() const = 0;
  virtual Index output_dim() const = 0;

  // Rows of x are samples.
  virtual ad::Var forward(ad::Tape& tape, ad::Var x, Mode mode) = 0;
  Tensor evaluate(const Tensor& x) const;
  Vector evaluate_point(const Vector& x) const;
  BatchFn as_batch_fn() const;

  // Architecture-guaranteed upper bound; empty when none exists.
  virtual std::optional<double> certified_lipschitz() const = 0;

  virtual std::vector<Parameter*> parameters() = 0;
  std::size_t parameter_count() const;

  virtual nlohmann::json to_json() const = 0;
  virtual nlohmann::json describe() const = 0;
  virtual std::unique_ptr<Model> clone() const = 0;
};

/// h_k = φ(W_k h_{k−1} + b_k), y = W_{K+1} h_K + b_{K+1}.
class MlpNet final : public Model {
 public:
  MlpNet(const Architecture& arch, std::uint64_t seed);
  MlpNet(std::vector<Parameter> weights, std::vector<Parameter> biases, Activation act);

  std::string type_name() const override { return "mlp"; }
  Index input_dim() const override { return weights_.front().value.cols(); }
  Index output_dim() const override { return weights_.back().value.rows(); }
  ad::Var forward(ad::Tape& tape, ad::Var x, Mode mode) override;
  std::optional<double> certified_lipschitz() const override { return std::nullopt; }
  std::vector<Parameter*> parameters() override;
  nlohmann::json to_json() const override;
  nlohmann::json describe() const override;
  std::unique_ptr<Model> clone() const override { return std::make_unique<MlpNet>(*this); }

  Activation activation() const { return act_; }
  std::size_t layer_count() const { return weights_.size(); }
  Parameter& weight(std::size_t k) { return weights_[k]; }
  Parameter& bias(std::size_t k) { return biases_[k]; }

 private:
  std::vector<Parameter> weights_;
  std::vector<Parameter> biases_;
  Activation act_;
};

/// y = √η · f̄_K(… f̄_1(√η · x)) with 1-Lipschitz layers f̄_k and η = e^ψ,
/// so Lip ≤ η exactly by construction. Hidden layers use the configured
/// activation; the final (head) layer is linear.
class LipNet final : public Model {
 public:
  LipNet(const Architecture& arch, double eta0, std::uint64_t seed);
  LipNet(std::vector<std::unique_ptr<Layer>> layers, double psi, bool psi_trainable);
  LipNet(const LipNet& other);

  std::string type_name() const override { return "lipnet"; }
  Index input_dim() const override { return layers_.front()->in_dim(); }
  Index output_dim() const override { return layers_.back()->out_dim(); }
  ad::Var forward(ad::Tape& tape, ad::Var x, Mode mode) override;
  std::optional<double> certified_lipschitz() const override { return eta(); }
  std::vector<Parameter*> parameters() override;
  nlohmann::json to_json() const override;
  nlohmann::json describe() const override;
  std::unique_ptr<Model> clone() const override { return std::make_unique<LipNet>(*this); }

  double psi() const { return psi_.value(0, 0); }
  double eta() const { return std::exp(psi()); }
  void set_eta(double eta);
  void set_psi_trainable(bool trainable) { psi_.trainable = trainable; }
  bool psi_trainable() const { return psi_.trainable; }
  Parameter& psi_parameter() { return psi_; }

  std::size_t layer_count() const { return layers_.size(); }
  Layer& layer(std::size_t k) { return *layers_[k]; }
  const Layer& layer(std::size_t k) const { return *layers_[k]; }

 private:
  Parameter psi_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

std::unique_ptr<Model> model_from_json(const nlohmann::json& j);
void save_checkpoint(const Model& model, const std::filesystem::path& path);
std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path);

struct EmpiricalLipschitzOptions {
  Index pairs = 2000;
  int refine_steps = 20;
  std::uint64_t seed = 0;
};

/// Largest difference quotient |f(a) − f(b)| / |a − b| found over sampled
/// pairs in the domain. Each pair is refined by local search: it moves to the
/// better half of its segment or to a coordinate-perturbed endpoint whenever
/// that raises the quotient, shrinking the probe step otherwise. Every value
/// is an actual quotient of two domain points, so the result is a lower bound
/// on Lip(f) over the domain.
double empirical_lipschitz(const BatchFn& f, const Domain& domain, const EmpiricalLipschitzOptions& opts);
double empirical_lipschitz_net(const Model& net, const Domain& domain, Index pairs, int refine_steps,
                               std::uint64_t seed);

}  // namespace lipfit
