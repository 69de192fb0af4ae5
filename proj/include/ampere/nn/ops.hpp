#pragma once

#include <cstdint>
#include <vector>

#include "ampere/nn/tape.hpp"

namespace ampere::nn {

// Elementwise a + b (same shape).
Var add(Var a, Var b);
// Adds a 1 x d row to every row of x.
Var add_row(Var x, Var row);
Var scale(Var x, double s);
Var matmul(Var a, Var b);
// x W + b with b a 1 x out row.
Var linear(Var x, Var w, Var b);
// Exact (erf) GELU.
Var gelu(Var x);
// Row-wise layer normalisation with 1 x d gain and bias.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

// Multi-head scaled dot-product attention over already-projected q, k, v.
// `mask` (rows = q rows, cols = k rows) marks allowed pairs; every query
// row must allow at least one key.
Var attention(Var q, Var k, Var v, int heads, const AttentionMask* mask = nullptr);

Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(Var a, Var b);
Var slice_rows(Var x, Eigen::Index start, Eigen::Index count);
Var mean_rows(Var x);
Var l2_normalize_rows(Var x);
// Row lookup: out[i] = table[ids[i]].
Var gather_rows(Var table, const std::vector<std::int32_t>& ids);
// Sum of 1x1 values.
Var sum_scalars(const std::vector<Var>& terms);

// Symmetric in-batch InfoNCE between matching rows of a and b with
// temperature exp(log_tau). Returns 1x1.
Var info_nce(Var a, Var b, Var log_tau);
// Mean softmax cross-entropy of logits rows against class labels. Returns 1x1.
Var cross_entropy(Var logits, const std::vector<std::int32_t>& labels);

}  // namespace ampere::nn
