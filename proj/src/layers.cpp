#include "lipfit/layers.hpp"

#include "lipfit/error.hpp"
#include "lipfit/linalg.hpp"

#include <cmath>
#include <numbers>

namespace lipfit {

namespace {

constexpr double kTrainTol = 1e-9;
constexpr int kTrainIters = 200;
constexpr double kEvalTol = 1e-13;
constexpr int kEvalIters = 5000;
constexpr double kBiasStd = 0.1;

void fill_normal(Tensor& t, Rng& rng, double stddev) {
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = stddev * rng.normal();
}

nlohmann::json tensor_json(const Tensor& t) {
  std::vector<double> vals(t.data(), t.data() + t.size());
  return {{"shape", {t.rows(), t.cols()}}, {"values", vals}};
}

void load_tensor(const nlohmann::json& j, Parameter& p, const std::string& layer) {
  const auto& shape = j.at("shape");
  const Index r = shape.at(0).get<Index>();
  const Index c = shape.at(1).get<Index>();
  require(r == p.value.rows() && c == p.value.cols(), ErrorKind::Config,
          layer + "." + p.name + ": shape [" + std::to_string(r) + "x" + std::to_string(c) + "] expected " +
              shape_string(p.value));
  const auto vals = j.at("values").get<std::vector<double>>();
  require(static_cast<Index>(vals.size()) == r * c, ErrorKind::Config, layer + "." + p.name + ": value count mismatch");
  for (Index i = 0; i < r * c; ++i) p.value.data()[i] = vals[static_cast<std::size_t>(i)];
  require(p.value.allFinite(), ErrorKind::Numeric, layer + "." + p.name + ": non-finite parameter");
  p.zero_grad();
}

// W/σ̄ with σ̄ = uᵀWv, u and v treated as constants in the adjoint.
ad::Var spectral_normalize(ad::Var w, const PowerIteration& pi) {
  const double sigma = pi.sigma;
  Tensor uvt = pi.u * pi.v.transpose();
  return w.tape->push(w.value() / sigma, {w}, [w, sigma, uvt = std::move(uvt)](ad::Tape& tp, const Tensor& g) {
    const double inner = g.cwiseProduct(tp.value(w.id)).sum();
    tp.accumulate(w.id, g / sigma - (inner / (sigma * sigma)) * uvt);
  });
}

}  // namespace

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Spectral: return "spectral";
    case LayerKind::Orthogonal: return "orthogonal";
    case LayerKind::Sandwich: return "sandwich";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "spectral") return LayerKind::Spectral;
  if (s == "orthogonal") return LayerKind::Orthogonal;
  if (s == "sandwich") return LayerKind::Sandwich;
  fail(ErrorKind::Config, "unknown layer kind '" + s + "'");
}

Tensor Layer::apply(const Tensor& h) const {
  ad::Tape tape;
  // Eval mode reads parameters by value and leaves the layer untouched.
  auto* self = const_cast<Layer*>(this);
  return self->forward(tape, tape.constant(h), Mode::Eval).value();
}

void Layer::check_input(const ad::Var& h) const {
  if (h.cols() != in_) {
    fail(ErrorKind::Dimension, to_string(kind()) + " layer expects input width " + std::to_string(in_) + ", got " +
                                   std::to_string(h.cols()));
  }
}

nlohmann::json Layer::to_json() const {
  nlohmann::json params = nlohmann::json::object();
  for (Parameter* p : const_cast<Layer*>(this)->parameters()) params[p->name] = tensor_json(p->value);
  return {{"kind", to_string(kind())}, {"activation", to_string(act_)}, {"in", in_}, {"out", out_}, {"params", params}};
}

std::unique_ptr<Layer> Layer::from_json(const nlohmann::json& j) {
  const LayerKind kind = layer_kind_from_string(j.at("kind").get<std::string>());
  auto layer = make_layer(kind, j.at("in").get<Index>(), j.at("out").get<Index>(),
                          activation_from_string(j.at("activation").get<std::string>()));
  const auto& params = j.at("params");
  for (Parameter* p : layer->parameters()) {
    require(params.contains(p->name), ErrorKind::Config, to_string(kind) + " layer: missing parameter " + p->name);
    load_tensor(params.at(p->name), *p, to_string(kind));
  }
  return layer;
}

std::unique_ptr<Layer> make_layer(LayerKind kind, Index in_dim, Index out_dim, Activation act) {
  require(in_dim >= 1 && out_dim >= 1, ErrorKind::Dimension, "layer dimensions must be >= 1");
  switch (kind) {
    case LayerKind::Spectral: return std::make_unique<SpectralLayer>(in_dim, out_dim, act);
    case LayerKind::Orthogonal: return std::make_unique<OrthogonalLayer>(in_dim, out_dim, act);
    case LayerKind::Sandwich: return std::make_unique<SandwichLayer>(in_dim, out_dim, act);
  }
  fail(ErrorKind::Argument, "unknown layer kind");
}

// --- spectral ---------------------------------------------------------------

SpectralLayer::SpectralLayer(Index in_dim, Index out_dim, Activation act)
    : Layer(in_dim, out_dim, act),
      w_("w", Tensor::Identity(out_dim, in_dim)),
      b_("b", Tensor::Zero(1, out_dim)) {}

SpectralLayer::SpectralLayer(const SpectralLayer& other)
    : Layer(other), w_(other.w_), b_(other.b_), warm_v_(other.warm_v_) {}

void SpectralLayer::initialize(Rng& rng) {
  fill_normal(w_.value, rng, 1.0 / std::sqrt(static_cast<double>(in_dim())));
  fill_normal(b_.value, rng, kBiasStd);
  warm_v_.resize(0);
  w_.zero_grad();
  b_.zero_grad();
}

double SpectralLayer::sigma() const {
  std::lock_guard<std::mutex> lock(cache_mutex_);
  if (cached_w_.rows() == w_.value.rows() && cached_w_.cols() == w_.value.cols() && cached_w_ == w_.value) {
    return cached_sigma_;
  }
  require(w_.value.allFinite(), ErrorKind::Numeric, "spectral layer: non-finite weight");
  const Vector start = warm_v_.size() == w_.value.cols() ? warm_v_ : default_start_vector(w_.value);
  const PowerIteration pi = power_iteration(w_.value, start, kEvalTol, kEvalIters);
  require(pi.sigma > 0.0, ErrorKind::Numeric, "spectral layer: zero weight matrix");
  cached_w_ = w_.value;
  cached_sigma_ = pi.sigma;
  cached_u_ = pi.u;
  cached_v_ = pi.v;
  return cached_sigma_;
}

ad::Var SpectralLayer::forward(ad::Tape& tape, ad::Var h, Mode mode) {
  check_input(h);
  ad::Var wn;
  if (mode == Mode::Train) {
    require(w_.value.allFinite(), ErrorKind::Numeric, "spectral layer: non-finite weight");
    const Vector start = warm_v_.size() == w_.value.cols() ? warm_v_ : default_start_vector(w_.value);
    const PowerIteration pi = power_iteration(w_.value, start, kTrainTol, kTrainIters);
    require(pi.sigma > 0.0, ErrorKind::Numeric, "spectral layer: zero weight matrix");
    warm_v_ = pi.v;
    wn = spectral_normalize(tape.param(w_), pi);
  } else {
    wn = tape.constant(w_.value / sigma());
  }
  ad::Var z = ad::add_row(ad::matmul_nt(h, wn), bind(tape, b_, mode));
  return ad::activate(z, activation());
}

// --- orthogonal -------------------------------------------------------------

OrthogonalLayer::OrthogonalLayer(Index in_dim, Index out_dim, Activation act)
    : Layer(in_dim, out_dim, act),
      u_("u", Tensor::Zero(std::min(in_dim, out_dim), std::min(in_dim, out_dim))),
      v_("v", Tensor::Zero(std::max(in_dim, out_dim) - std::min(in_dim, out_dim), std::min(in_dim, out_dim))),
      b_("b", Tensor::Zero(1, out_dim)) {}

void OrthogonalLayer::initialize(Rng& rng) {
  const double k = static_cast<double>(u_.value.rows());
  fill_normal(u_.value, rng, 1.0 / std::sqrt(k));
  fill_normal(v_.value, rng, 1.0 / std::sqrt(k + static_cast<double>(v_.value.rows())));
  fill_normal(b_.value, rng, kBiasStd);
  for (Parameter* p : parameters()) p->zero_grad();
}

Tensor OrthogonalLayer::weight() const {
  const CayleyResult c = cayley(u_.value, v_.value);
  Tensor s(c.q1.rows() + c.q2.rows(), c.q1.cols());
  s << c.q1, c.q2;
  if (out_dim() >= in_dim()) return s;
  return s.transpose();
}

ad::Var OrthogonalLayer::forward(ad::Tape& tape, ad::Var h, Mode mode) {
  check_input(h);
  const ad::CayleyVars c = ad::cayley(bind(tape, u_, mode), bind(tape, v_, mode));
  ad::Var s = ad::vstack(c.q1, c.q2);
  ad::Var lin = out_dim() >= in_dim() ? ad::matmul_nt(h, s) : ad::matmul(h, s);
  return ad::activate(ad::add_row(lin, bind(tape, b_, mode)), activation());
}

// --- sandwich ---------------------------------------------------------------

SandwichLayer::SandwichLayer(Index in_dim, Index out_dim, Activation act)
    : Layer(in_dim, out_dim, act),
      x_("x", Tensor::Zero(out_dim, out_dim)),
      y_("y", Tensor::Zero(in_dim, out_dim)),
      d_("d", Tensor::Zero(1, out_dim)),
      b_("b", Tensor::Zero(1, out_dim)) {}

void SandwichLayer::initialize(Rng& rng) {
  const double std_xy = std::sqrt(2.0 / static_cast<double>(2 * out_dim() + in_dim()));
  fill_normal(x_.value, rng, std_xy);
  fill_normal(y_.value, rng, std_xy);
  d_.value.setZero();
  fill_normal(b_.value, rng, kBiasStd);
  for (Parameter* p : parameters()) p->zero_grad();
}

ad::Var SandwichLayer::forward(ad::Tape& tape, ad::Var h, Mode mode) {
  check_input(h);
  const ad::CayleyVars c = ad::cayley(bind(tape, x_, mode), bind(tape, y_, mode));  // q1 = Aᵀ, q2 = Bᵀ
  ad::Var d = bind(tape, d_, mode);
  ad::Var psi = ad::exp(d);
  ad::Var psi_inv = ad::exp(ad::scale(d, -1.0));
  ad::Var pre = ad::add_row(ad::scale(ad::scale_cols(ad::matmul(h, c.q2), psi_inv), std::numbers::sqrt2),
                            bind(tape, b_, mode));
  ad::Var act = ad::scale_cols(ad::activate(pre, activation()), psi);
  return ad::scale(ad::matmul_nt(act, c.q1), std::numbers::sqrt2);
}

}  // namespace lipfit
