#pragma once

#include "lipfit/autodiff.hpp"
#include "lipfit/rng.hpp"

#include "json.hpp"

#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace lipfit {

enum class LayerKind { Spectral, Orthogonal, Sandwich };

std::string to_string(LayerKind k);
LayerKind layer_kind_from_string(const std::string& s);

// Train mode may update internal warm-start state; Eval mode never mutates.
enum class Mode { Train, Eval };

// A layer that is 1-Lipschitz (Euclidean) for every value of its parameters,
// provided the activation is monotone with slopes in [0, 1].
class Layer {
 public:
  Layer(Index in_dim, Index out_dim, Activation act) : in_(in_dim), out_(out_dim), act_(act) {}
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  Index in_dim() const { return in_; }
  Index out_dim() const { return out_; }
  Activation activation() const { return act_; }

  // Rows of h are samples: (N×in) -> (N×out).
  virtual ad::Var forward(ad::Tape& tape, ad::Var h, Mode mode) = 0;
  Tensor apply(const Tensor& h) const;

  // Certified by construction, not estimated.
  double lipschitz_certificate() const { return 1.0; }

  virtual std::vector<Parameter*> parameters() = 0;
  virtual void initialize(Rng& rng) = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  nlohmann::json to_json() const;
  static std::unique_ptr<Layer> from_json(const nlohmann::json& j);

 protected:
  ad::Var bind(ad::Tape& tape, Parameter& p, Mode mode) const {
    return mode == Mode::Train ? tape.param(p) : tape.constant(p.value);
  }
  void check_input(const ad::Var& h) const;

 private:
  Index in_;
  Index out_;
  Activation act_;
};

std::unique_ptr<Layer> make_layer(LayerKind kind, Index in_dim, Index out_dim, Activation act);

/// φ(W h / σ̄(W) + b). σ̄ comes from power iteration warm-started at the
/// previous right singular vector; the backward pass treats σ̄ = uᵀWv with the
/// singular vectors held fixed. Evaluation recomputes σ̄ to tight tolerance.
class SpectralLayer final : public Layer {
 public:
  SpectralLayer(Index in_dim, Index out_dim, Activation act);
  SpectralLayer(const SpectralLayer& other);

  LayerKind kind() const override { return LayerKind::Spectral; }
  ad::Var forward(ad::Tape& tape, ad::Var h, Mode mode) override;
  std::vector<Parameter*> parameters() override { return {&w_, &b_}; }
  void initialize(Rng& rng) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<SpectralLayer>(*this); }

  Parameter& weight() { return w_; }
  Parameter& bias() { return b_; }
  // σ̄(W) at evaluation tolerance.
  double sigma() const;

 private:
  Parameter w_;
  Parameter b_;
  Vector warm_v_;
  mutable std::mutex cache_mutex_;
  mutable Tensor cached_w_;
  mutable double cached_sigma_ = 0.0;
  mutable Vector cached_u_, cached_v_;
};

/// φ(Q h + b) with Q built from the Cayley transform of free (u, v).
/// k = min(in, out); the stacked Cayley output is (max×k) with orthonormal
/// columns. For out ≥ in it is used as Q directly (an isometry); for out < in
/// its transpose is used (orthonormal rows, nonexpansive).
class OrthogonalLayer final : public Layer {
 public:
  OrthogonalLayer(Index in_dim, Index out_dim, Activation act);

  LayerKind kind() const override { return LayerKind::Orthogonal; }
  ad::Var forward(ad::Tape& tape, ad::Var h, Mode mode) override;
  std::vector<Parameter*> parameters() override { return {&u_, &v_, &b_}; }
  void initialize(Rng& rng) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<OrthogonalLayer>(*this); }

  Parameter& u() { return u_; }
  Parameter& v() { return v_; }
  Parameter& bias() { return b_; }
  // Effective out×in weight.
  Tensor weight() const;

 private:
  Parameter u_;
  Parameter v_;
  Parameter b_;
};

/// h ↦ √2 Aᵀ Ψ φ(√2 Ψ⁻¹ B h + b), Ψ = diag(e^d), with (Aᵀ, Bᵀ) = cayley(x, y)
/// so that A Aᵀ + B Bᵀ = I.
class SandwichLayer final : public Layer {
 public:
  SandwichLayer(Index in_dim, Index out_dim, Activation act);

  LayerKind kind() const override { return LayerKind::Sandwich; }
  ad::Var forward(ad::Tape& tape, ad::Var h, Mode mode) override;
  std::vector<Parameter*> parameters() override { return {&x_, &y_, &d_, &b_}; }
  void initialize(Rng& rng) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<SandwichLayer>(*this); }

  Parameter& x() { return x_; }
  Parameter& y() { return y_; }
  Parameter& log_scale() { return d_; }
  Parameter& bias() { return b_; }

 private:
  Parameter x_;  // out×out
  Parameter y_;  // in×out
  Parameter d_;  // 1×out
  Parameter b_;  // 1×out
};

}  // namespace lipfit
