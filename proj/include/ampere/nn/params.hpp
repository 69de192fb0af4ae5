#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>

#include "ampere/nn/matrix.hpp"

namespace ampere::nn {

// Optimizer learning-rate groups.
enum class ParamGroup : std::uint8_t { text_encoder = 0, visual_encoder = 1, fusion = 2, other = 3 };
inline constexpr int kNumParamGroups = 4;

std::string_view to_string(ParamGroup g);

struct Parameter {
  Matrix value;
  Matrix grad;
  ParamGroup group = ParamGroup::other;
  bool decay = true;  // subject to weight decay
};

// Named parameters in deterministic (lexicographic) order. References stay
// valid for the lifetime of the store.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Matrix init, ParamGroup group,
                 bool decay);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  std::map<std::string, Parameter>& items() { return params_; }
  const std::map<std::string, Parameter>& items() const { return params_; }

  void zero_grad();
  // Total scalar count over names starting with `prefix`.
  std::size_t count(std::string_view prefix = "") const;

 private:
  std::map<std::string, Parameter> params_;
};

// Normal(0, std) resampled outside +-2 std.
Matrix trunc_normal(int rows, int cols, double std, std::mt19937_64& rng);

}  // namespace ampere::nn
