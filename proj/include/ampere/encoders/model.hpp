#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "ampere/core/config.hpp"
#include "ampere/core/types.hpp"
#include "ampere/nn/params.hpp"
#include "ampere/nn/tape.hpp"

namespace ampere {

// Parameters plus the config that shapes them.
//
// Naming: "visual.*", "text.*" and "fusion.*" fall in the matching optimizer
// groups; "head.*", "head_cat.*", "classifier.*" and "log_tau" are "other".
// In branch_specific mode a scoped name gets one copy per domain, stored as
// "<name>@P", "<name>@S", "<name>@L".
struct Model {
  ModelConfig config;
  nn::ParameterStore params;

  // Storage name of `base` for a given domain branch.
  std::string resolve(std::string_view base, Domain d) const;
  // Tape leaf for `base` on the branch of `d`.
  nn::Var param(nn::Tape& tape, std::string_view base, Domain d);
};

bool is_branch_scoped(std::string_view base, const ModelConfig& config);
nn::ParamGroup param_group_for(std::string_view name);

// Truncated normal with std 0.02 for embeddings and 0.02 * sqrt(768 / fan_in)
// for linear weights (0.02 at text width 768). Zero biases, unit
// layer-norm gains, zero segment embeddings, log_tau = log(temperature_init).
// Only the parameters reachable under config.modality and
// config.fusion_variant are created. Branch copies start identical.
Model init_model(const ModelConfig& config, std::uint64_t seed);

// One JSON header line {"config", "tensors": [{name, rows, cols}]} followed by
// the tensors as consecutive AMPT records in header order (float32).
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

// Zeroes the residual-branch outputs (attention out-projection and second
// MLP layer) of every block under `prefix`, turning those blocks into the
// identity map.
void make_identity_blocks(Model& model, std::string_view prefix);

}  // namespace ampere
