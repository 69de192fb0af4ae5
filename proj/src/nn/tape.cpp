#include "ampere/nn/tape.hpp"

#include "ampere/core/error.hpp"

namespace ampere::nn {

Var Tape::record(Matrix value, bool needs_grad, Backward fn) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = record_ && needs_grad;
  if (n.needs_grad) n.fn = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::int32_t>(nodes_.size() - 1));
}

Var Tape::constant(Matrix value) { return record(std::move(value), false, nullptr); }

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) {
    return Var(this, it->second);
  }
  Parameter* target = &p;
  Var v = record(p.value, true, [target](Tape& t, std::int32_t self) {
    target->grad += t.nodes_[self].grad;
  });
  param_nodes_.emplace(&p, v.id());
  return v;
}

Var Tape::push(Matrix value, std::initializer_list<Var> inputs, Backward fn) {
  bool needs = false;
  for (const Var& v : inputs) needs = needs || nodes_[v.id()].needs_grad;
  return record(std::move(value), needs, std::move(fn));
}

Var Tape::push(Matrix value, const std::vector<Var>& inputs, Backward fn) {
  bool needs = false;
  for (const Var& v : inputs) needs = needs || nodes_[v.id()].needs_grad;
  return record(std::move(value), needs, std::move(fn));
}

Matrix& Tape::grad(std::int32_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(Var root) {
  if (root.value().size() != 1) {
    throw UsageError("backward() without a seed needs a scalar root");
  }
  backward(root, Matrix::Ones(1, 1));
}

void Tape::backward(Var root, const Matrix& seed) {
  if (!record_) throw UsageError("backward() on a non-recording tape");
  if (seed.rows() != root.rows() || seed.cols() != root.cols()) {
    throw UsageError("backward(): seed shape mismatch");
  }
  grad(root.id()) += seed;
  for (std::int32_t i = root.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.has_grad || !n.fn) continue;
    n.fn(*this, i);
  }
}

}  // namespace ampere::nn
