#include <cmath>
#include <functional>
#include <random>

#include "ampere/core/error.hpp"
#include "ampere/nn/ops.hpp"
#include "doctest.h"
#include "fd_check.hpp"

using namespace ampere;
using namespace ampere::nn;

using testing::random_matrix;

namespace {

double max_fd_error(ParameterStore& store, const std::function<Var(Tape&, ParameterStore&)>& fn) {
  return testing::max_fd_error(store, [&](Tape& t) { return fn(t, store); });
}

}  // namespace

TEST_CASE("elementwise and matrix ops match finite differences") {
  std::mt19937_64 rng(1);
  ParameterStore s;
  s.add("a", random_matrix(3, 4, rng), ParamGroup::other, true);
  s.add("b", random_matrix(3, 4, rng), ParamGroup::other, true);
  s.add("w", random_matrix(4, 5, rng), ParamGroup::other, true);
  s.add("bias", random_matrix(1, 5, rng), ParamGroup::other, true);
  s.add("row", random_matrix(1, 4, rng), ParamGroup::other, true);
  auto fn = [](Tape& t, ParameterStore& s) {
    Var a = t.param(s.at("a"));
    Var b = t.param(s.at("b"));
    Var x = add_row(add(a, scale(b, 0.5)), t.param(s.at("row")));
    Var y = linear(gelu(x), t.param(s.at("w")), t.param(s.at("bias")));
    Var z = matmul(slice_rows(x, 1, 2), t.param(s.at("w")));
    return concat_rows({y, mean_rows(y), z});
  };
  CHECK(max_fd_error(s, fn) < 1e-6);
}

TEST_CASE("layer norm, normalisation and gather match finite differences") {
  std::mt19937_64 rng(2);
  ParameterStore s;
  s.add("x", random_matrix(4, 6, rng), ParamGroup::other, true);
  s.add("gain", random_matrix(1, 6, rng), ParamGroup::other, true);
  s.add("bias", random_matrix(1, 6, rng), ParamGroup::other, true);
  s.add("table", random_matrix(5, 6, rng), ParamGroup::other, true);
  auto fn = [](Tape& t, ParameterStore& s) {
    Var x = layer_norm(t.param(s.at("x")), t.param(s.at("gain")), t.param(s.at("bias")));
    Var g = gather_rows(t.param(s.at("table")), {0, 3, 3, 1});
    return l2_normalize_rows(concat_cols(x, g));
  };
  CHECK(max_fd_error(s, fn) < 1e-6);
}

TEST_CASE("masked multi-head attention matches finite differences") {
  std::mt19937_64 rng(3);
  ParameterStore s;
  s.add("q", random_matrix(5, 8, rng), ParamGroup::other, true);
  s.add("k", random_matrix(6, 8, rng), ParamGroup::other, true);
  s.add("v", random_matrix(6, 8, rng), ParamGroup::other, true);
  AttentionMask mask = AttentionMask::Constant(5, 6, true);
  mask(0, 2) = mask(1, 5) = mask(4, 0) = false;
  auto fn = [&mask](Tape& t, ParameterStore& s) {
    return attention(t.param(s.at("q")), t.param(s.at("k")), t.param(s.at("v")), 2, &mask);
  };
  CHECK(max_fd_error(s, fn) < 1e-6);
}

TEST_CASE("masked keys do not influence attention output") {
  std::mt19937_64 rng(4);
  Tape t(false);
  Matrix q = random_matrix(3, 4, rng), k = random_matrix(4, 4, rng), v = random_matrix(4, 4, rng);
  AttentionMask mask = AttentionMask::Constant(3, 4, true);
  mask.col(3).setConstant(false);
  const Matrix base = attention(t.constant(q), t.constant(k), t.constant(v), 2, &mask).value();
  k.row(3).setConstant(100.0);
  v.row(3).setConstant(-50.0);
  const Matrix perturbed = attention(t.constant(q), t.constant(k), t.constant(v), 2, &mask).value();
  CHECK((base - perturbed).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("loss ops match finite differences") {
  std::mt19937_64 rng(5);
  ParameterStore s;
  s.add("a", random_matrix(4, 3, rng), ParamGroup::other, true);
  s.add("b", random_matrix(4, 3, rng), ParamGroup::other, true);
  s.add("log_tau", Matrix::Constant(1, 1, std::log(0.3)), ParamGroup::other, false);
  s.add("w", random_matrix(3, 5, rng), ParamGroup::other, true);
  auto fn = [](Tape& t, ParameterStore& s) {
    Var a = l2_normalize_rows(t.param(s.at("a")));
    Var b = l2_normalize_rows(t.param(s.at("b")));
    Var nce = info_nce(a, b, t.param(s.at("log_tau")));
    Var ce = cross_entropy(matmul(a, t.param(s.at("w"))), {0, 4, 2, 2});
    return sum_scalars({nce, ce});
  };
  CHECK(max_fd_error(s, fn) < 1e-6);
}

TEST_CASE("shape errors are reported") {
  Tape t;
  Var a = t.constant(Matrix::Zero(2, 3));
  Var b = t.constant(Matrix::Zero(3, 2));
  CHECK_THROWS_AS(add(a, b), UsageError);
  CHECK_THROWS_AS(matmul(a, a), UsageError);
  CHECK_THROWS_AS(attention(a, a, a, 2), UsageError);
  CHECK_THROWS_AS(cross_entropy(a, {0, 3}), UsageError);
}
