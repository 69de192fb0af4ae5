#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <unordered_map>
#include <vector>

#include "ampere/nn/matrix.hpp"
#include "ampere/nn/params.hpp"

namespace ampere::nn {

class Tape;

// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::int32_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Tape& tape() const { return *tape_; }
  std::int32_t id() const { return id_; }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::int32_t id_ = -1;
};

// Reverse-mode recorder. Nodes are appended in evaluation order, so
// backward() is a single reverse sweep. A non-recording tape keeps values
// only and skips all gradient bookkeeping.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::int32_t self)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix value);
  // Leaf bound to a parameter; one node per parameter per tape.
  Var param(Parameter& p);
  // Records an op result. `inputs` decide whether a gradient is needed.
  Var push(Matrix value, std::initializer_list<Var> inputs, Backward fn);
  Var push(Matrix value, const std::vector<Var>& inputs, Backward fn);

  const Matrix& value(std::int32_t id) const { return nodes_[id].value; }
  bool needs_grad(std::int32_t id) const { return nodes_[id].needs_grad; }
  // Gradient buffer of a node, zero-initialised on first access.
  Matrix& grad(std::int32_t id);

  // Seeds d(root)=1 (root must be 1x1) and accumulates into parameters.
  void backward(Var root);
  void backward(Var root, const Matrix& seed);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    bool has_grad = false;
    Backward fn;
  };

  Var record(Matrix value, bool needs_grad, Backward fn);

  bool record_;
  std::deque<Node> nodes_;  // stable references to values
  std::unordered_map<const Parameter*, std::int32_t> param_nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }

}  // namespace ampere::nn
