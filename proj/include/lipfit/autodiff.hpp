#pragma once

// Minimal reverse-mode differentiation over dense 2-D tensors.
//
// A Tape records every operation in creation order, so the node list is a
// topological order of the graph and backward() is a single reverse sweep.
// Tapes are single-use and single-threaded: build, backward once, discard.

#include "lipfit/tensor.hpp"

#include <functional>
#include <string>
#include <vector>

namespace lipfit {

enum class Activation { Identity, Relu, Tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Trainable tensor with its accumulated gradient.
struct Parameter {
  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor::Zero(value.rows(), value.cols());
  }

  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

namespace ad {

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const;
};

class Tape {
 public:
  // Receives the upstream adjoint of the node and pushes adjoints to parents.
  using Backward = std::function<void(Tape&, const Tensor& upstream)>;

  Var constant(Tensor value);
  // Leaf bound to a parameter. Its gradient is added into p.grad by backward()
  // when the parameter is trainable; otherwise it behaves as a constant.
  Var param(Parameter& p);

  Var push(Tensor value, std::initializer_list<Var> parents, Backward fn);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  // Adjoint after backward(); zero-sized if the node received none.
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  void accumulate(std::size_t id, const Tensor& g);

  // Root must be 1×1.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);  // a · bᵀ
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var add_row(Var a, Var row);       // broadcast 1×c row over every row of a
Var scale_cols(Var a, Var row);    // a(i,j) * row(0,j)
Var scale_by(Var a, Var s);        // s is 1×1
Var hadamard(Var a, Var b);
Var activate(Var a, Activation act);
Var exp(Var a);
Var square(Var a);
Var sum(Var a);
Var inverse(Var a);                // LU with partial pivoting
Var vstack(Var top, Var bottom);
Var identity_minus(Var a);         // I − a
Var identity_plus(Var a);          // I + a
// max(a, c) for scalar a; on a tie the adjoint flows to a.
Var max_scalar(Var a, double c);
Var sum_squares(Var a);

}  // namespace ad
}  // namespace lipfit
