#pragma once

#include <vector>

#include "ampere/core/types.hpp"
#include "ampere/encoders/encoders.hpp"
#include "ampere/textproc/summarize.hpp"

namespace ampere {

struct ProjectedFeatures {
  nn::Var visual;  // (n+1) x d_visual: v, z_1..z_n
  nn::Var text;    // (m+1) x d_visual: y_0, y_1..y_m
  std::vector<bool> text_valid;  // length m
};

ProjectedFeatures project_features(nn::Tape& tape, Model& model, const VisualFeatures& vf,
                                   const TextFeatures& tf, Domain d);

// Unit-norm 1 x d_embed embedding from projected features. The model must
// hold the parameters of `variant`.
nn::Var fuse(nn::Tape& tape, Model& model, FusionVariant variant, const ProjectedFeatures& pf,
             Domain d);

// Full pipeline for one instance on the branch of its domain, honouring
// config.modality and config.fusion_variant. Non-ok summaries feed their
// fallback text.
nn::Var embed(nn::Tape& tape, Model& model, const ProductInstance& instance,
              const SummaryRecord& summary);
// Same with an explicit branch, for feeding one payload to different branches.
nn::Var embed(nn::Tape& tape, Model& model, const ProductInstance& instance,
              const SummaryRecord& summary, Domain branch);

std::vector<float> embed_instance(const Model& model, const ProductInstance& instance,
                                  const SummaryRecord& summary);

// Embeds every instance with its summary from `summaries` (keyed by
// instance id). Throws DataError for an instance without a summary.
std::vector<EmbeddingRecord> embed_all(const Model& model,
                                       const std::vector<ProductInstance>& instances,
                                       const textproc::SummaryTable& summaries);

}  // namespace ampere
