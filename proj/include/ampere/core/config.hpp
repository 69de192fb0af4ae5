#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "ampere/core/types.hpp"
#include "ampere/core/vocab.hpp"
#include "json.hpp"

namespace ampere {

enum class FusionVariant : std::uint8_t { ours, sum, cat, xa_t_as_q, xa_v_as_q, coa };
inline constexpr std::array<FusionVariant, 6> kAllFusionVariants{
    FusionVariant::ours,      FusionVariant::sum,       FusionVariant::cat,
    FusionVariant::xa_t_as_q, FusionVariant::xa_v_as_q, FusionVariant::coa};

enum class SharingMode : std::uint8_t { shared, branch_specific };

// Which parameters get one copy per domain when sharing is branch_specific.
enum class SharingScope : std::uint8_t { final_linear, all };

// Which inputs feed the embedding: both, frames only (e = Linear(v)) or text
// only.
enum class Modality : std::uint8_t { multimodal, visual_only, text_only };

std::string_view to_string(FusionVariant v);
FusionVariant parse_fusion_variant(std::string_view s);
std::string_view to_string(SharingMode v);
SharingMode parse_sharing_mode(std::string_view s);
std::string_view to_string(SharingScope v);
SharingScope parse_sharing_scope(std::string_view s);
std::string_view to_string(Modality v);
Modality parse_modality(std::string_view s);

struct ModelConfig {
  int n_frames = 8;
  int m_tokens = 32;
  int d_visual = 32;
  int d_text = 48;
  int d_embed = 16;
  FusionVariant fusion_variant = FusionVariant::ours;
  SharingMode sharing = SharingMode::shared;
  SharingScope sharing_scope = SharingScope::final_linear;
  Modality modality = Modality::multimodal;
  int fusion_blocks = 4;
  int text_layers = 2;
  int temporal_blocks = 4;
  int frame_layers = 2;
  int heads = 4;
  int mlp_ratio = 4;
  int frame_height = 12;
  int frame_width = 12;
  int channels = 3;
  int patch_size = 4;
  int num_classes = 1;
  double temperature_init = 0.07;
  Vocab vocab;

  // Full-scale widths: 512 visual, 768 text, 128 embedding, 8 heads.
  static ModelConfig full_dims();

  int patches_per_frame() const {
    return (frame_height / patch_size) * (frame_width / patch_size);
  }

  // Throws UsageError naming the offending field.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace ampere
