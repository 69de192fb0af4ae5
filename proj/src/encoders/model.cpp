#include "ampere/encoders/model.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "ampere/core/error.hpp"
#include "ampere/core/tensor_io.hpp"

namespace ampere {
namespace {

using nn::Matrix;

constexpr double kInitStd = 0.02;
// Linear weights keep the forward gain that std 0.02 gives at width 768:
// std = 0.02 * sqrt(768 / fan_in).
constexpr double kGainWidth = 768.0;

double linear_std(int fan_in) { return kInitStd * std::sqrt(kGainWidth / fan_in); }

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

enum class Init { normal, zero, one };

class Builder {
 public:
  Builder(Model& m, std::uint64_t seed) : model_(m), rng_(seed) {}

  void weight(const std::string& name, int rows, int cols, double std = kInitStd) {
    put(name, rows, cols, Init::normal, true, std);
  }
  void zeros(const std::string& name, int rows, int cols, bool decay = false) {
    put(name, rows, cols, Init::zero, decay);
  }
  void linear(const std::string& name, int in, int out) {
    weight(name + ".w", in, out, linear_std(in));
    zeros(name + ".b", 1, out);
  }
  void norm(const std::string& name, int d) {
    put(name + ".g", 1, d, Init::one, false);
    zeros(name + ".b", 1, d);
  }
  void attention(const std::string& p, int d) {
    for (const char* w : {"q", "k", "v", "o"}) linear(p + "attn." + w, d, d);
  }
  void mlp(const std::string& p, int d, int ratio) {
    linear(p + "mlp.fc1", d, d * ratio);
    linear(p + "mlp.fc2", d * ratio, d);
  }
  void self_block(const std::string& p, int d, int ratio) {
    norm(p + "ln1", d);
    attention(p, d);
    norm(p + "ln2", d);
    mlp(p, d, ratio);
  }
  void cross_block(const std::string& p, int d, int ratio) {
    norm(p + "ln_q", d);
    norm(p + "ln_kv", d);
    attention(p, d);
    norm(p + "ln2", d);
    mlp(p, d, ratio);
  }

 private:
  Matrix draw(int rows, int cols, Init init, double std) {
    switch (init) {
      case Init::normal: return nn::trunc_normal(rows, cols, std, rng_);
      case Init::zero: return Matrix::Zero(rows, cols);
      case Init::one: return Matrix::Ones(rows, cols);
    }
    return {};
  }

  void put(const std::string& base, int rows, int cols, Init init, bool decay, double std = 0.0) {
    const auto group = param_group_for(base);
    if (is_branch_scoped(base, model_.config)) {
      // Every branch starts from the same draw.
      const Matrix value = draw(rows, cols, init, std);
      for (Domain d : kAllDomains) model_.params.add(model_.resolve(base, d), value, group, decay);
    } else {
      model_.params.add(base, draw(rows, cols, init, std), group, decay);
    }
  }

  Model& model_;
  std::mt19937_64 rng_;
};

}  // namespace

bool is_branch_scoped(std::string_view base, const ModelConfig& config) {
  if (config.sharing != SharingMode::branch_specific) return false;
  if (config.sharing_scope == SharingScope::all) return base != "log_tau";
  return starts_with(base, "head.") || starts_with(base, "head_cat.") ||
         starts_with(base, "classifier.");
}

nn::ParamGroup param_group_for(std::string_view name) {
  if (starts_with(name, "text.")) return nn::ParamGroup::text_encoder;
  if (starts_with(name, "visual.")) return nn::ParamGroup::visual_encoder;
  if (starts_with(name, "fusion.")) return nn::ParamGroup::fusion;
  return nn::ParamGroup::other;
}

std::string Model::resolve(std::string_view base, Domain d) const {
  std::string name(base);
  if (is_branch_scoped(base, config)) {
    name += '@';
    name += to_string(d);
  }
  return name;
}

nn::Var Model::param(nn::Tape& tape, std::string_view base, Domain d) {
  return tape.param(params.at(resolve(base, d)));
}

Model init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model model;
  model.config = config;
  Builder b(model, seed);
  const int dv = config.d_visual, dt = config.d_text, r = config.mlp_ratio;
  const bool visual = config.modality != Modality::text_only;
  const bool text = config.modality != Modality::visual_only;

  if (visual) {
    const int patch_dim = config.patch_size * config.patch_size * config.channels;
    b.linear("visual.patch", patch_dim, dv);
    b.weight("visual.cls", 1, dv);
    b.weight("visual.pos", config.patches_per_frame() + 1, dv);
    for (int l = 0; l < config.frame_layers; ++l) {
      b.self_block("visual.frame." + std::to_string(l) + ".", dv, r);
    }
    b.weight("visual.temporal_pos", config.n_frames, dv);
    for (int l = 0; l < config.temporal_blocks; ++l) {
      b.self_block("visual.temporal." + std::to_string(l) + ".", dv, r);
    }
  }
  if (text) {
    b.weight("text.tok", std::max<int>(config.vocab.size(), 3), dt);
    b.weight("text.pos", config.m_tokens + 1, dt);
    for (int l = 0; l < config.text_layers; ++l) {
      b.self_block("text.layer." + std::to_string(l) + ".", dt, r);
    }
    b.linear("fusion.proj_t", dt, dv);
  }
  if (visual && config.modality == Modality::multimodal) b.linear("fusion.proj_v", dv, dv);

  if (config.modality == Modality::multimodal) {
    for (int l = 0; l < config.fusion_blocks; ++l) {
      const std::string i = std::to_string(l);
      switch (config.fusion_variant) {
        case FusionVariant::ours:
          b.self_block("fusion.block." + i + ".", dv, r);
          break;
        case FusionVariant::xa_t_as_q:
        case FusionVariant::xa_v_as_q:
          b.cross_block("fusion.xa." + i + ".", dv, r);
          break;
        case FusionVariant::coa:
          b.cross_block("fusion.coa." + i + ".t.", dv, r);
          b.cross_block("fusion.coa." + i + ".v.", dv, r);
          break;
        case FusionVariant::sum:
        case FusionVariant::cat:
          break;
      }
    }
    if (config.fusion_variant == FusionVariant::ours) b.zeros("fusion.seg", 2, dv, true);
  }
  if (config.modality == Modality::multimodal && config.fusion_variant == FusionVariant::cat) {
    b.linear("head_cat", 2 * dv, config.d_embed);
  } else {
    b.linear("head", dv, config.d_embed);
  }
  b.linear("classifier", config.d_embed, config.num_classes);
  model.params.add("log_tau", Matrix::Constant(1, 1, std::log(config.temperature_init)),
                   nn::ParamGroup::other, false);
  return model;
}

void make_identity_blocks(Model& model, std::string_view prefix) {
  for (auto& [name, p] : model.params.items()) {
    if (!starts_with(name, prefix)) continue;
    const auto base = std::string_view(name).substr(0, name.find('@'));
    const bool residual_out = base.find("attn.o.") != std::string_view::npos ||
                              base.find("mlp.fc2.") != std::string_view::npos;
    if (residual_out) p.value.setZero();
  }
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  nlohmann::json header;
  header["config"] = model.config;
  auto& index = header["tensors"] = nlohmann::json::array();
  for (const auto& [name, p] : model.params.items()) {
    index.push_back({{"name", name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write checkpoint: " + path.string());
  f << header.dump() << '\n';
  for (const auto& [name, p] : model.params.items()) {
    Tensor t({static_cast<std::uint32_t>(p.value.rows()), static_cast<std::uint32_t>(p.value.cols())});
    for (Eigen::Index i = 0; i < p.value.size(); ++i) t.data[i] = static_cast<float>(p.value.data()[i]);
    write_tensor(f, t);
  }
  if (!f) throw DataError("failed writing checkpoint: " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("missing checkpoint: " + path.string());
  std::string line;
  if (!std::getline(f, line)) throw DataError("empty checkpoint: " + path.string());
  auto header = nlohmann::json::parse(line, nullptr, false);
  if (!header.is_object() || !header.contains("config") || !header.contains("tensors")) {
    throw DataError("malformed checkpoint header: " + path.string());
  }
  // Rebuild the parameter layout from the config, then overwrite values.
  Model model = init_model(header["config"].get<ModelConfig>(), 0);
  std::size_t loaded = 0;
  for (const auto& entry : header["tensors"]) {
    const std::string name = entry.at("name");
    if (!model.params.contains(name)) throw DataError("checkpoint has unknown tensor '" + name + "'");
    auto& p = model.params.at(name);
    const Tensor t = read_tensor(f);
    if (t.rank() != 2 || t.shape[0] != p.value.rows() || t.shape[1] != p.value.cols()) {
      throw DataError("checkpoint tensor '" + name + "' has the wrong shape");
    }
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = t.data[i];
    ++loaded;
  }
  if (loaded != model.params.items().size()) {
    throw DataError("checkpoint is missing tensors: " + path.string());
  }
  return model;
}

}  // namespace ampere
