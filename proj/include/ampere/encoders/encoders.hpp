#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "ampere/core/types.hpp"
#include "ampere/core/vocab.hpp"
#include "ampere/encoders/model.hpp"
#include "ampere/nn/ops.hpp"

namespace ampere {

struct FrameSequence {
  Tensor frames;                       // (n, H, W, C)
  std::vector<std::uint32_t> indices;  // source frame of each sampled frame
};

// floor(i*T/n) for T >= n; a single frame repeated n times; for 1 < T < n
// the T frames cycle until n are filled.
std::vector<std::uint32_t> frame_indices(std::uint32_t num_frames, int n);
FrameSequence sample_frames(const ProductInstance& instance, int n);

struct TokenSequence {
  std::vector<std::int32_t> ids;  // length m
  std::vector<bool> valid;        // false at padding
};

// Greedy longest match over the vocabulary (whole pre-tokens first, then
// code-point spans), [UNK] for unmatched code points, first m kept, right
// padded.
TokenSequence tokenize(std::string_view text, int m, const Vocab& vocab);

// Pre-norm transformer block: x + Attn(LN(x)), then + MLP(LN(x)).
nn::Var self_block(nn::Tape& tape, Model& model, const std::string& prefix, Domain d, nn::Var x,
                   const nn::AttentionMask* mask = nullptr);
// Same, with queries from `x` and keys/values from `ctx`.
nn::Var cross_block(nn::Tape& tape, Model& model, const std::string& prefix, Domain d, nn::Var x,
                    nn::Var ctx, const nn::AttentionMask* mask = nullptr);

// Frame-CLS state of each frame after patch embedding and frame_layers
// blocks in which frame tokens attend within their frame and the CLS tokens
// also attend to each other across frames. Returns n x d_visual.
nn::Var encode_frames(nn::Tape& tape, Model& model, const FrameSequence& frames, Domain d);

struct VisualFeatures {
  nn::Var v;  // 1 x d_visual
  nn::Var z;  // n x d_visual, as fed in
};

// Learned temporal positions, temporal_blocks blocks, mean over frames.
VisualFeatures temporal_aggregate(nn::Tape& tape, Model& model, nn::Var z, Domain d);

struct TextFeatures {
  nn::Var y0;                // 1 x d_text
  nn::Var y;                 // m x d_text, zero at padding
  std::vector<bool> valid;   // length m
};

TextFeatures encode_tokens(nn::Tape& tape, Model& model, const TokenSequence& tokens, Domain d);

}  // namespace ampere
