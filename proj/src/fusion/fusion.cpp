#include "ampere/fusion/fusion.hpp"

#include "ampere/core/error.hpp"

namespace ampere {

using nn::AttentionMask;
using nn::Matrix;
using nn::Tape;
using nn::Var;

namespace {

Var head(Tape& t, Model& model, Var x, Domain d) {
  return nn::l2_normalize_rows(
      nn::linear(x, model.param(t, "head.w", d), model.param(t, "head.b", d)));
}

bool all_valid(const std::vector<bool>& v) {
  return std::find(v.begin(), v.end(), false) == v.end();
}

// Keys: `prefix` always-allowed rows followed by the text rows.
AttentionMask text_key_mask(Eigen::Index queries, Eigen::Index prefix,
                            const std::vector<bool>& text_valid) {
  const auto m = static_cast<Eigen::Index>(text_valid.size());
  AttentionMask mask(queries, prefix + 1 + m);
  mask.setConstant(true);
  for (Eigen::Index j = 0; j < m; ++j) mask.col(prefix + 1 + j).setConstant(text_valid[j]);
  return mask;
}

}  // namespace

ProjectedFeatures project_features(Tape& t, Model& model, const VisualFeatures& vf,
                                   const TextFeatures& tf, Domain d) {
  ProjectedFeatures pf;
  pf.visual = nn::linear(nn::concat_rows({vf.v, vf.z}), model.param(t, "fusion.proj_v.w", d),
                         model.param(t, "fusion.proj_v.b", d));
  pf.text = nn::linear(nn::concat_rows({tf.y0, tf.y}), model.param(t, "fusion.proj_t.w", d),
                       model.param(t, "fusion.proj_t.b", d));
  pf.text_valid = tf.valid;
  return pf;
}

Var fuse(Tape& t, Model& model, FusionVariant variant, const ProjectedFeatures& pf, Domain d) {
  const int blocks = model.config.fusion_blocks;
  const Eigen::Index nv = pf.visual.rows();
  const Eigen::Index nt = pf.text.rows();
  const bool padded = !all_valid(pf.text_valid);
  switch (variant) {
    case FusionVariant::sum:
      return head(t, model, nn::add(nn::slice_rows(pf.visual, 0, 1), nn::slice_rows(pf.text, 0, 1)), d);

    case FusionVariant::cat: {
      Var joint = nn::concat_cols(nn::slice_rows(pf.visual, 0, 1), nn::slice_rows(pf.text, 0, 1));
      return nn::l2_normalize_rows(
          nn::linear(joint, model.param(t, "head_cat.w", d), model.param(t, "head_cat.b", d)));
    }

    case FusionVariant::ours: {
      Var seg = model.param(t, "fusion.seg", d);
      Var x = nn::concat_rows({nn::add_row(pf.visual, nn::slice_rows(seg, 0, 1)),
                               nn::add_row(pf.text, nn::slice_rows(seg, 1, 1))});
      const AttentionMask mask = text_key_mask(nv + nt, nv, pf.text_valid);
      for (int l = 0; l < blocks; ++l) {
        x = self_block(t, model, "fusion.block." + std::to_string(l) + ".", d, x,
                       padded ? &mask : nullptr);
      }
      return head(t, model, nn::add(nn::slice_rows(x, 0, 1), nn::slice_rows(x, nv, 1)), d);
    }

    case FusionVariant::xa_t_as_q: {
      Var x = pf.text;
      for (int l = 0; l < blocks; ++l) {
        x = cross_block(t, model, "fusion.xa." + std::to_string(l) + ".", d, x, pf.visual);
      }
      return head(t, model, nn::slice_rows(x, 0, 1), d);
    }

    case FusionVariant::xa_v_as_q: {
      const AttentionMask mask = text_key_mask(nv, 0, pf.text_valid);
      Var x = pf.visual;
      for (int l = 0; l < blocks; ++l) {
        x = cross_block(t, model, "fusion.xa." + std::to_string(l) + ".", d, x, pf.text,
                        padded ? &mask : nullptr);
      }
      return head(t, model, nn::slice_rows(x, 0, 1), d);
    }

    case FusionVariant::coa: {
      const AttentionMask mask = text_key_mask(nv, 0, pf.text_valid);
      Var vis = pf.visual, txt = pf.text;
      for (int l = 0; l < blocks; ++l) {
        const std::string p = "fusion.coa." + std::to_string(l) + ".";
        Var txt_next = cross_block(t, model, p + "t.", d, txt, vis);
        Var vis_next = cross_block(t, model, p + "v.", d, vis, txt, padded ? &mask : nullptr);
        txt = txt_next;
        vis = vis_next;
      }
      return head(t, model, nn::add(nn::slice_rows(vis, 0, 1), nn::slice_rows(txt, 0, 1)), d);
    }
  }
  throw UsageError("unknown fusion variant");
}

Var embed(Tape& t, Model& model, const ProductInstance& instance, const SummaryRecord& summary,
          Domain branch) {
  const auto& cfg = model.config;
  VisualFeatures vf;
  TextFeatures tf;
  if (cfg.modality != Modality::text_only) {
    Var z = encode_frames(t, model, sample_frames(instance, cfg.n_frames), branch);
    vf = temporal_aggregate(t, model, z, branch);
  }
  if (cfg.modality != Modality::visual_only) {
    const std::string text = textproc::encoder_text(summary);
    tf = encode_tokens(t, model, tokenize(text, cfg.m_tokens, cfg.vocab), branch);
  }
  switch (cfg.modality) {
    case Modality::visual_only:
      return head(t, model, vf.v, branch);
    case Modality::text_only:
      return head(t, model,
                  nn::linear(tf.y0, model.param(t, "fusion.proj_t.w", branch),
                             model.param(t, "fusion.proj_t.b", branch)),
                  branch);
    case Modality::multimodal:
      break;
  }
  return fuse(t, model, cfg.fusion_variant, project_features(t, model, vf, tf, branch), branch);
}

Var embed(Tape& t, Model& model, const ProductInstance& instance, const SummaryRecord& summary) {
  return embed(t, model, instance, summary, instance.domain);
}

std::vector<float> embed_instance(const Model& model, const ProductInstance& instance,
                                  const SummaryRecord& summary) {
  // A non-recording tape never touches gradients, so the parameters are
  // only read.
  Tape t(false);
  const Matrix e = embed(t, const_cast<Model&>(model), instance, summary).value();
  std::vector<float> out(static_cast<std::size_t>(e.size()));
  for (Eigen::Index i = 0; i < e.size(); ++i) out[i] = static_cast<float>(e.data()[i]);
  return out;
}

std::vector<EmbeddingRecord> embed_all(const Model& model,
                                       const std::vector<ProductInstance>& instances,
                                       const textproc::SummaryTable& summaries) {
  std::vector<EmbeddingRecord> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) {
    auto it = summaries.find(inst.instance_id);
    if (it == summaries.end()) throw DataError("no summary for instance '" + inst.instance_id + "'");
    out.push_back({inst.product_id, inst.instance_id, inst.domain,
                   embed_instance(model, inst, it->second)});
  }
  return out;
}

}  // namespace ampere
