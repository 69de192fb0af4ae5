#include "ampere/core/config.hpp"

#include "ampere/core/error.hpp"

namespace ampere {

using nlohmann::json;

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<E, const char*>, N>& table,
             const char* what) {
  for (const auto& [v, name] : table) {
    if (s == name) return v;
  }
  throw UsageError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

template <typename E, std::size_t N>
std::string_view enum_name(E v, const std::array<std::pair<E, const char*>, N>& table) {
  for (const auto& [e, name] : table) {
    if (e == v) return name;
  }
  return "?";
}

constexpr std::array<std::pair<FusionVariant, const char*>, 6> kVariantNames{{
    {FusionVariant::ours, "ours"},
    {FusionVariant::sum, "sum"},
    {FusionVariant::cat, "cat"},
    {FusionVariant::xa_t_as_q, "xa_t_as_q"},
    {FusionVariant::xa_v_as_q, "xa_v_as_q"},
    {FusionVariant::coa, "coa"},
}};
constexpr std::array<std::pair<SharingMode, const char*>, 2> kSharingNames{{
    {SharingMode::shared, "shared"},
    {SharingMode::branch_specific, "branch_specific"},
}};
constexpr std::array<std::pair<SharingScope, const char*>, 2> kScopeNames{{
    {SharingScope::final_linear, "final_linear"},
    {SharingScope::all, "all"},
}};
constexpr std::array<std::pair<Modality, const char*>, 3> kModalityNames{{
    {Modality::multimodal, "multimodal"},
    {Modality::visual_only, "visual_only"},
    {Modality::text_only, "text_only"},
}};

void require_positive(int v, const char* name) {
  if (v <= 0) throw UsageError(std::string("config: ") + name + " must be > 0");
}

}  // namespace

std::string_view to_string(FusionVariant v) { return enum_name(v, kVariantNames); }
FusionVariant parse_fusion_variant(std::string_view s) {
  return parse_enum(s, kVariantNames, "fusion variant");
}
std::string_view to_string(SharingMode v) { return enum_name(v, kSharingNames); }
SharingMode parse_sharing_mode(std::string_view s) {
  return parse_enum(s, kSharingNames, "sharing mode");
}
std::string_view to_string(SharingScope v) { return enum_name(v, kScopeNames); }
SharingScope parse_sharing_scope(std::string_view s) {
  return parse_enum(s, kScopeNames, "sharing scope");
}
std::string_view to_string(Modality v) { return enum_name(v, kModalityNames); }
Modality parse_modality(std::string_view s) {
  return parse_enum(s, kModalityNames, "modality");
}

ModelConfig ModelConfig::full_dims() {
  ModelConfig c;
  c.d_visual = 512;
  c.d_text = 768;
  c.d_embed = 128;
  c.heads = 8;
  c.text_layers = 6;
  return c;
}

void ModelConfig::validate() const {
  require_positive(n_frames, "n_frames");
  require_positive(m_tokens, "m_tokens");
  require_positive(d_visual, "d_visual");
  require_positive(d_text, "d_text");
  require_positive(d_embed, "d_embed");
  require_positive(fusion_blocks, "fusion_blocks");
  require_positive(text_layers, "text_layers");
  require_positive(temporal_blocks, "temporal_blocks");
  require_positive(frame_layers, "frame_layers");
  require_positive(heads, "heads");
  require_positive(mlp_ratio, "mlp_ratio");
  require_positive(frame_height, "frame_height");
  require_positive(frame_width, "frame_width");
  require_positive(channels, "channels");
  require_positive(patch_size, "patch_size");
  require_positive(num_classes, "num_classes");
  if (d_visual % heads != 0) throw UsageError("config: heads must divide d_visual");
  if (d_text % heads != 0) throw UsageError("config: heads must divide d_text");
  if (!(temperature_init > 0.0)) throw UsageError("config: temperature_init must be > 0");
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"n_frames", c.n_frames},
           {"m_tokens", c.m_tokens},
           {"d_visual", c.d_visual},
           {"d_text", c.d_text},
           {"d_embed", c.d_embed},
           {"fusion_variant", std::string(to_string(c.fusion_variant))},
           {"sharing", std::string(to_string(c.sharing))},
           {"sharing_scope", std::string(to_string(c.sharing_scope))},
           {"modality", std::string(to_string(c.modality))},
           {"fusion_blocks", c.fusion_blocks},
           {"text_layers", c.text_layers},
           {"temporal_blocks", c.temporal_blocks},
           {"frame_layers", c.frame_layers},
           {"heads", c.heads},
           {"mlp_ratio", c.mlp_ratio},
           {"frame_height", c.frame_height},
           {"frame_width", c.frame_width},
           {"channels", c.channels},
           {"patch_size", c.patch_size},
           {"num_classes", c.num_classes},
           {"temperature_init", c.temperature_init},
           {"vocab", c.vocab.entries()}};
}

// Missing keys keep their defaults so hand-written configs can stay short.
void from_json(const json& j, ModelConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (auto it = j.find(key); it != j.end()) it->get_to(field);
  };
  get("n_frames", c.n_frames);
  get("m_tokens", c.m_tokens);
  get("d_visual", c.d_visual);
  get("d_text", c.d_text);
  get("d_embed", c.d_embed);
  get("fusion_blocks", c.fusion_blocks);
  get("text_layers", c.text_layers);
  get("temporal_blocks", c.temporal_blocks);
  get("frame_layers", c.frame_layers);
  get("heads", c.heads);
  get("mlp_ratio", c.mlp_ratio);
  get("frame_height", c.frame_height);
  get("frame_width", c.frame_width);
  get("channels", c.channels);
  get("patch_size", c.patch_size);
  get("num_classes", c.num_classes);
  get("temperature_init", c.temperature_init);
  if (auto it = j.find("fusion_variant"); it != j.end()) {
    c.fusion_variant = parse_fusion_variant(it->get<std::string>());
  }
  if (auto it = j.find("sharing"); it != j.end()) {
    c.sharing = parse_sharing_mode(it->get<std::string>());
  }
  if (auto it = j.find("sharing_scope"); it != j.end()) {
    c.sharing_scope = parse_sharing_scope(it->get<std::string>());
  }
  if (auto it = j.find("modality"); it != j.end()) {
    c.modality = parse_modality(it->get<std::string>());
  }
  if (auto it = j.find("vocab"); it != j.end()) {
    c.vocab = Vocab(it->get<std::vector<std::string>>());
  }
}

}  // namespace ampere
