#include "ampere/encoders/encoders.hpp"

#include <algorithm>
#include <cstring>

#include "ampere/core/error.hpp"

namespace ampere {

using nn::AttentionMask;
using nn::Matrix;
using nn::Tape;
using nn::Var;

std::vector<std::uint32_t> frame_indices(std::uint32_t num_frames, int n) {
  if (n < 1) throw UsageError("frame count must be >= 1");
  if (num_frames < 1) throw UsageError("instance has no frames");
  std::vector<std::uint32_t> idx(static_cast<std::size_t>(n));
  const auto un = static_cast<std::uint64_t>(n);
  for (std::uint64_t i = 0; i < un; ++i) {
    idx[i] = num_frames >= un ? static_cast<std::uint32_t>(i * num_frames / un)
                              : static_cast<std::uint32_t>(i % num_frames);
  }
  return idx;
}

FrameSequence sample_frames(const ProductInstance& instance, int n) {
  const auto& src = instance.frames;
  if (src.rank() != 4) throw UsageError("frames must be a (T, H, W, C) tensor");
  FrameSequence fs;
  fs.indices = frame_indices(src.shape[0], n);
  fs.frames = Tensor({static_cast<std::uint32_t>(n), src.shape[1], src.shape[2], src.shape[3]});
  const std::size_t frame_size = static_cast<std::size_t>(src.shape[1]) * src.shape[2] * src.shape[3];
  for (std::size_t i = 0; i < fs.indices.size(); ++i) {
    std::memcpy(fs.frames.data.data() + i * frame_size, src.data.data() + fs.indices[i] * frame_size,
                frame_size * sizeof(float));
  }
  return fs;
}

TokenSequence tokenize(std::string_view text, int m, const Vocab& vocab) {
  if (m < 1) throw UsageError("token budget must be >= 1");
  std::vector<std::int32_t> ids;
  for (const auto& word : pretokenize(text)) {
    if (static_cast<int>(ids.size()) >= m) break;
    if (auto id = vocab.find(word); id >= 0) {
      ids.push_back(id);
      continue;
    }
    const auto cps = utf8_codepoints(word);
    std::size_t i = 0;
    while (i < cps.size()) {
      std::int32_t match = Vocab::kUnk;
      std::size_t len = 1;
      const std::size_t longest = std::min(vocab.max_piece_codepoints(), cps.size() - i);
      for (std::size_t l = longest; l >= 1; --l) {
        std::string piece;
        for (std::size_t k = i; k < i + l; ++k) piece += cps[k];
        if (auto id = vocab.find(piece); id >= 0) {
          match = id;
          len = l;
          break;
        }
      }
      ids.push_back(match);
      i += len;
    }
  }
  if (static_cast<int>(ids.size()) > m) ids.resize(static_cast<std::size_t>(m));
  TokenSequence ts;
  ts.valid.assign(static_cast<std::size_t>(m), false);
  std::fill_n(ts.valid.begin(), ids.size(), true);
  ids.resize(static_cast<std::size_t>(m), Vocab::kPad);
  ts.ids = std::move(ids);
  return ts;
}

namespace {

Var attend(Tape& t, Model& model, const std::string& p, Domain d, Var q_in, Var kv_in,
           const AttentionMask* mask) {
  auto P = [&](const std::string& n) { return model.param(t, p + n, d); };
  Var q = nn::linear(q_in, P("attn.q.w"), P("attn.q.b"));
  Var k = nn::linear(kv_in, P("attn.k.w"), P("attn.k.b"));
  Var v = nn::linear(kv_in, P("attn.v.w"), P("attn.v.b"));
  Var a = nn::attention(q, k, v, model.config.heads, mask);
  return nn::linear(a, P("attn.o.w"), P("attn.o.b"));
}

Var mlp(Tape& t, Model& model, const std::string& p, Domain d, Var x) {
  auto P = [&](const std::string& n) { return model.param(t, p + n, d); };
  Var h = nn::layer_norm(x, P("ln2.g"), P("ln2.b"));
  h = nn::gelu(nn::linear(h, P("mlp.fc1.w"), P("mlp.fc1.b")));
  return nn::add(x, nn::linear(h, P("mlp.fc2.w"), P("mlp.fc2.b")));
}

}  // namespace

Var self_block(Tape& t, Model& model, const std::string& p, Domain d, Var x,
               const AttentionMask* mask) {
  Var h = nn::layer_norm(x, model.param(t, p + "ln1.g", d), model.param(t, p + "ln1.b", d));
  x = nn::add(x, attend(t, model, p, d, h, h, mask));
  return mlp(t, model, p, d, x);
}

Var cross_block(Tape& t, Model& model, const std::string& p, Domain d, Var x, Var ctx,
                const AttentionMask* mask) {
  Var hq = nn::layer_norm(x, model.param(t, p + "ln_q.g", d), model.param(t, p + "ln_q.b", d));
  Var hkv = nn::layer_norm(ctx, model.param(t, p + "ln_kv.g", d), model.param(t, p + "ln_kv.b", d));
  x = nn::add(x, attend(t, model, p, d, hq, hkv, mask));
  return mlp(t, model, p, d, x);
}

Var encode_frames(Tape& t, Model& model, const FrameSequence& fs, Domain d) {
  const auto& cfg = model.config;
  const auto& shape = fs.frames.shape;
  if (shape.size() != 4) throw UsageError("frames must be a (n, H, W, C) tensor");
  const int n = static_cast<int>(shape[0]);
  const int H = static_cast<int>(shape[1]), W = static_cast<int>(shape[2]),
            C = static_cast<int>(shape[3]);
  const int ps = cfg.patch_size;
  if (H % ps != 0 || W % ps != 0) {
    throw UsageError("frame size " + std::to_string(H) + "x" + std::to_string(W) +
                     " is not divisible by patch size " + std::to_string(ps));
  }
  if (H != cfg.frame_height || W != cfg.frame_width || C != cfg.channels) {
    throw UsageError("frame shape does not match the model config");
  }
  const int gh = H / ps, gw = W / ps, P = gh * gw;
  const int patch_dim = ps * ps * C;

  Matrix patches(static_cast<Eigen::Index>(n) * P, patch_dim);
  const float* src = fs.frames.data.data();
  for (int f = 0; f < n; ++f) {
    for (int py = 0; py < gh; ++py) {
      for (int px = 0; px < gw; ++px) {
        double* row = patches.row(static_cast<Eigen::Index>(f) * P + py * gw + px).data();
        int c0 = 0;
        for (int y = 0; y < ps; ++y) {
          const float* line =
              src + ((static_cast<std::size_t>(f) * H + py * ps + y) * W + px * ps) * C;
          for (int k = 0; k < ps * C; ++k) row[c0++] = line[k];
        }
      }
    }
  }

  Var emb = nn::linear(t.constant(std::move(patches)), model.param(t, "visual.patch.w", d),
                       model.param(t, "visual.patch.b", d));
  Var cls = model.param(t, "visual.cls", d);
  Var pos = model.param(t, "visual.pos", d);
  std::vector<Var> rows, tiles;
  std::vector<std::int32_t> cls_rows;
  for (int f = 0; f < n; ++f) {
    cls_rows.push_back(f * (P + 1));
    rows.push_back(cls);
    rows.push_back(nn::slice_rows(emb, static_cast<Eigen::Index>(f) * P, P));
    tiles.push_back(pos);
  }
  Var x = nn::add(nn::concat_rows(rows), nn::concat_rows(tiles));

  // Within-frame attention plus CLS <-> CLS across frames.
  const int len = n * (P + 1);
  AttentionMask mask(len, len);
  for (int i = 0; i < len; ++i) {
    for (int j = 0; j < len; ++j) {
      mask(i, j) = (i / (P + 1) == j / (P + 1)) || (i % (P + 1) == 0 && j % (P + 1) == 0);
    }
  }
  for (int l = 0; l < cfg.frame_layers; ++l) {
    x = self_block(t, model, "visual.frame." + std::to_string(l) + ".", d, x, &mask);
  }
  return nn::gather_rows(x, cls_rows);
}

VisualFeatures temporal_aggregate(Tape& t, Model& model, Var z, Domain d) {
  if (z.rows() != model.config.n_frames) {
    throw UsageError("temporal_aggregate expects " + std::to_string(model.config.n_frames) +
                     " frame features");
  }
  Var x = nn::add(z, model.param(t, "visual.temporal_pos", d));
  for (int l = 0; l < model.config.temporal_blocks; ++l) {
    x = self_block(t, model, "visual.temporal." + std::to_string(l) + ".", d, x);
  }
  return {nn::mean_rows(x), z};
}

TextFeatures encode_tokens(Tape& t, Model& model, const TokenSequence& ts, Domain d) {
  const int m = model.config.m_tokens;
  if (static_cast<int>(ts.ids.size()) != m || static_cast<int>(ts.valid.size()) != m) {
    throw UsageError("token sequence length differs from m_tokens");
  }
  Var table = model.param(t, "text.tok", d);
  std::vector<std::int32_t> ids;
  ids.reserve(static_cast<std::size_t>(m) + 1);
  ids.push_back(Vocab::kCls);
  for (auto id : ts.ids) {
    if (id < 0 || id >= table.rows()) throw UsageError("token id outside the vocabulary");
    ids.push_back(id);
  }
  Var x = nn::add(nn::gather_rows(table, ids), model.param(t, "text.pos", d));

  const bool any_pad = std::find(ts.valid.begin(), ts.valid.end(), false) != ts.valid.end();
  AttentionMask mask(m + 1, m + 1);
  for (int j = 0; j <= m; ++j) mask.col(j).setConstant(j == 0 || ts.valid[j - 1]);
  for (int l = 0; l < model.config.text_layers; ++l) {
    x = self_block(t, model, "text.layer." + std::to_string(l) + ".", d, x, any_pad ? &mask : nullptr);
  }
  TextFeatures out;
  out.y0 = nn::slice_rows(x, 0, 1);
  out.y = nn::slice_rows(x, 1, m);
  if (any_pad) {
    Matrix keep = Matrix::Zero(m, m);
    for (int i = 0; i < m; ++i) keep(i, i) = ts.valid[i] ? 1.0 : 0.0;
    out.y = nn::matmul(t.constant(std::move(keep)), out.y);
  }
  out.valid = ts.valid;
  return out;
}

}  // namespace ampere
