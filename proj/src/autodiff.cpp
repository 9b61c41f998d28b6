#include "lipfit/autodiff.hpp"

#include "lipfit/error.hpp"

#include <cmath>

namespace lipfit {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity" || s == "linear") return Activation::Identity;
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  fail(ErrorKind::Config, "unknown activation '" + s + "'");
}

namespace ad {

const Tensor& Var::value() const { return tape->value(id); }

double Var::scalar() const {
  const Tensor& v = value();
  require(v.rows() == 1 && v.cols() == 1, ErrorKind::Dimension, "scalar() on " + shape_string(v));
  return v(0, 0);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), nullptr, nullptr, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
  nodes_.push_back(Node{p.value, Tensor(), nullptr, p.trainable ? &p : nullptr, p.trainable});
  return Var{this, nodes_.size() - 1};
}

Var Tape::push(Tensor value, std::initializer_list<Var> parents, Backward fn) {
  bool needs = false;
  for (const Var& v : parents) needs = needs || nodes_[v.id].needs_grad;
  nodes_.push_back(Node{std::move(value), Tensor(), needs ? std::move(fn) : nullptr, nullptr, needs});
  return Var{this, nodes_.size() - 1};
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var root) {
  require(root.tape == this, ErrorKind::Argument, "backward: variable from another tape");
  const Tensor& rv = nodes_[root.id].value;
  require(rv.rows() == 1 && rv.cols() == 1, ErrorKind::Dimension, "backward root must be scalar");
  for (Node& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[root.id].needs_grad) return;
  nodes_[root.id].grad = Tensor::Ones(1, 1);
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorKind::Dimension, std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
  }
}

Tensor activation_value(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::Identity: return x;
    case Activation::Relu: return x.cwiseMax(0.0);
    case Activation::Tanh: return x.array().tanh().matrix();
  }
  return x;
}

Tensor activation_slope(const Tensor& x, const Tensor& y, Activation act) {
  switch (act) {
    case Activation::Identity: return Tensor::Ones(x.rows(), x.cols());
    case Activation::Relu: return (x.array() > 0.0).cast<double>().matrix();
    case Activation::Tanh: return (1.0 - y.array().square()).matrix();
  }
  return Tensor::Ones(x.rows(), x.cols());
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    fail(ErrorKind::Dimension, "matmul: inner dimensions " + shape_string(av) + " · " + shape_string(bv));
  }
  return t.push(av * bv, {a, b}, [a, b](Tape& tp, const Tensor& g) {
    if (tp.needs_grad(a.id)) tp.accumulate(a.id, g * tp.value(b.id).transpose());
    if (tp.needs_grad(b.id)) tp.accumulate(b.id, tp.value(a.id).transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = *a.tape;
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) {
    fail(ErrorKind::Dimension, "matmul_nt: inner dimensions " + shape_string(av) + " · " + shape_string(bv) + "ᵀ");
  }
  return t.push(av * bv.transpose(), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    if (tp.needs_grad(a.id)) tp.accumulate(a.id, g * tp.value(b.id));
    if (tp.needs_grad(b.id)) tp.accumulate(b.id, g.transpose() * tp.value(a.id));
  });
}

Var transpose(Var a) {
  return a.tape->push(a.value().transpose(), {a},
                      [a](Tape& tp, const Tensor& g) { tp.accumulate(a.id, g.transpose()); });
}

Var add(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "add");
  return a.tape->push(a.value() + b.value(), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    tp.accumulate(a.id, g);
    tp.accumulate(b.id, g);
  });
}

Var sub(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "sub");
  return a.tape->push(a.value() - b.value(), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    tp.accumulate(a.id, g);
    tp.accumulate(b.id, -g);
  });
}

Var scale(Var a, double s) {
  return a.tape->push(s * a.value(), {a}, [a, s](Tape& tp, const Tensor& g) { tp.accumulate(a.id, s * g); });
}

Var add_scalar(Var a, double s) {
  Tensor v = a.value().array() + s;
  return a.tape->push(std::move(v), {a}, [a](Tape& tp, const Tensor& g) { tp.accumulate(a.id, g); });
}

Var add_row(Var a, Var row) {
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    fail(ErrorKind::Dimension, "add_row: " + shape_string(rv) + " onto " + shape_string(av));
  }
  Tensor out = av.rowwise() + rv.row(0);
  return a.tape->push(std::move(out), {a, row}, [a, row](Tape& tp, const Tensor& g) {
    tp.accumulate(a.id, g);
    if (tp.needs_grad(row.id)) tp.accumulate(row.id, g.colwise().sum());
  });
}

Var scale_cols(Var a, Var row) {
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    fail(ErrorKind::Dimension, "scale_cols: " + shape_string(rv) + " onto " + shape_string(av));
  }
  Tensor out = av.array().rowwise() * rv.row(0).array();
  return a.tape->push(std::move(out), {a, row}, [a, row](Tape& tp, const Tensor& g) {
    const Tensor& rv2 = tp.value(row.id);
    if (tp.needs_grad(a.id)) {
      Tensor ga = g.array().rowwise() * rv2.row(0).array();
      tp.accumulate(a.id, ga);
    }
    if (tp.needs_grad(row.id)) {
      Tensor gr = (g.array() * tp.value(a.id).array()).colwise().sum();
      tp.accumulate(row.id, gr);
    }
  });
}

Var scale_by(Var a, Var s) {
  const double sv = s.scalar();
  return a.tape->push(sv * a.value(), {a, s}, [a, s, sv](Tape& tp, const Tensor& g) {
    if (tp.needs_grad(a.id)) tp.accumulate(a.id, sv * g);
    if (tp.needs_grad(s.id)) {
      Tensor gs(1, 1);
      gs(0, 0) = g.cwiseProduct(tp.value(a.id)).sum();
      tp.accumulate(s.id, gs);
    }
  });
}

Var hadamard(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "hadamard");
  return a.tape->push(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    if (tp.needs_grad(a.id)) tp.accumulate(a.id, g.cwiseProduct(tp.value(b.id)));
    if (tp.needs_grad(b.id)) tp.accumulate(b.id, g.cwiseProduct(tp.value(a.id)));
  });
}

Var activate(Var a, Activation act) {
  if (act == Activation::Identity) return a;
  Tensor y = activation_value(a.value(), act);
  Tensor slope = activation_slope(a.value(), y, act);
  return a.tape->push(std::move(y), {a}, [a, slope = std::move(slope)](Tape& tp, const Tensor& g) {
    tp.accumulate(a.id, g.cwiseProduct(slope));
  });
}

Var exp(Var a) {
  Tensor y = a.value().array().exp().matrix();
  Tensor yc = y;
  return a.tape->push(std::move(y), {a}, [a, yc = std::move(yc)](Tape& tp, const Tensor& g) {
    tp.accumulate(a.id, g.cwiseProduct(yc));
  });
}

Var square(Var a) {
  return a.tape->push(a.value().array().square().matrix(), {a}, [a](Tape& tp, const Tensor& g) {
    tp.accumulate(a.id, 2.0 * g.cwiseProduct(tp.value(a.id)));
  });
}

Var sum(Var a) {
  Tensor s(1, 1);
  s(0, 0) = a.value().sum();
  return a.tape->push(std::move(s), {a}, [a](Tape& tp, const Tensor& g) {
    const Tensor& av = tp.value(a.id);
    tp.accumulate(a.id, Tensor::Constant(av.rows(), av.cols(), g(0, 0)));
  });
}

Var sum_squares(Var a) {
  Tensor s(1, 1);
  s(0, 0) = a.value().squaredNorm();
  return a.tape->push(std::move(s), {a}, [a](Tape& tp, const Tensor& g) {
    tp.accumulate(a.id, (2.0 * g(0, 0)) * tp.value(a.id));
  });
}

Var inverse(Var a) {
  const Tensor& av = a.value();
  if (av.rows() != av.cols()) fail(ErrorKind::Dimension, "inverse of non-square " + shape_string(av));
  if (!av.allFinite()) fail(ErrorKind::Numeric, "inverse: non-finite input");
  Eigen::PartialPivLU<Tensor> lu(av);
  Tensor inv = lu.inverse();
  if (!inv.allFinite()) fail(ErrorKind::Numeric, "inverse: singular matrix");
  Tensor inv_t = inv.transpose();
  return a.tape->push(std::move(inv), {a}, [a, inv_t = std::move(inv_t)](Tape& tp, const Tensor& g) {
    tp.accumulate(a.id, -(inv_t * g * inv_t));
  });
}

Var vstack(Var top, Var bottom) {
  const Tensor& tv = top.value();
  const Tensor& bv = bottom.value();
  if (tv.cols() != bv.cols()) fail(ErrorKind::Dimension, "vstack: " + shape_string(tv) + " over " + shape_string(bv));
  Tensor out(tv.rows() + bv.rows(), tv.cols());
  out.topRows(tv.rows()) = tv;
  out.bottomRows(bv.rows()) = bv;
  const Index split = tv.rows();
  return top.tape->push(std::move(out), {top, bottom}, [top, bottom, split](Tape& tp, const Tensor& g) {
    if (tp.needs_grad(top.id)) tp.accumulate(top.id, g.topRows(split));
    if (tp.needs_grad(bottom.id)) tp.accumulate(bottom.id, g.bottomRows(g.rows() - split));
  });
}

Var identity_minus(Var a) {
  const Tensor& av = a.value();
  if (av.rows() != av.cols()) fail(ErrorKind::Dimension, "identity_minus of non-square " + shape_string(av));
  Tensor out = Tensor::Identity(av.rows(), av.cols()) - av;
  return a.tape->push(std::move(out), {a}, [a](Tape& tp, const Tensor& g) { tp.accumulate(a.id, -g); });
}

Var identity_plus(Var a) {
  const Tensor& av = a.value();
  if (av.rows() != av.cols()) fail(ErrorKind::Dimension, "identity_plus of non-square " + shape_string(av));
  Tensor out = Tensor::Identity(av.rows(), av.cols()) + av;
  return a.tape->push(std::move(out), {a}, [a](Tape& tp, const Tensor& g) { tp.accumulate(a.id, g); });
}

Var max_scalar(Var a, double c) {
  const double av = a.scalar();
  Tensor out(1, 1);
  out(0, 0) = av >= c ? av : c;
  const bool routes = av >= c;
  return a.tape->push(std::move(out), {a}, [a, routes](Tape& tp, const Tensor& g) {
    if (routes) tp.accumulate(a.id, g);
  });
}

}  // namespace ad
}  // namespace lipfit
