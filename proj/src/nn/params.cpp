#include "ampere/nn/params.hpp"

#include "ampere/core/error.hpp"

namespace ampere::nn {

std::string_view to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::text_encoder: return "text_encoder";
    case ParamGroup::visual_encoder: return "visual_encoder";
    case ParamGroup::fusion: return "fusion";
    case ParamGroup::other: return "other";
  }
  return "?";
}

Parameter& ParameterStore::add(const std::string& name, Matrix init,
                               ParamGroup group, bool decay) {
  Parameter p;
  p.grad = Matrix::Zero(init.rows(), init.cols());
  p.value = std::move(init);
  p.group = group;
  p.decay = decay;
  auto [it, inserted] = params_.emplace(name, std::move(p));
  if (!inserted) throw UsageError("duplicate parameter '" + name + "'");
  return it->second;
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw UsageError("unknown parameter '" + name + "'");
  return it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw UsageError("unknown parameter '" + name + "'");
  return it->second;
}

void ParameterStore::zero_grad() {
  for (auto& [_, p] : params_) p.grad.setZero();
}

std::size_t ParameterStore::count(std::string_view prefix) const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) {
    if (std::string_view(name).substr(0, prefix.size()) == prefix) {
      n += static_cast<std::size_t>(p.value.size());
    }
  }
  return n;
}

Matrix trunc_normal(int rows, int cols, double std, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double x;
    do {
      x = normal(rng);
    } while (std::abs(x) > 2.0 * std);
    m.data()[i] = x;
  }
  return m;
}

}  // namespace ampere::nn
