#include "ampere/nn/ops.hpp"

#include <cmath>
#include <memory>

#include "ampere/core/error.hpp"

namespace ampere::nn {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw UsageError(std::string(op) + ": shape mismatch");
  }
}

// Row-wise softmax of `s` in place, restricted to entries where `allowed`.
void softmax_rows(Matrix& s, const AttentionMask* mask) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      if (!mask || (*mask)(i, j)) mx = std::max(mx, s(i, j));
    }
    if (!std::isfinite(mx)) throw UsageError("attention: query row with no allowed key");
    double z = 0.0;
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      if (!mask || (*mask)(i, j)) {
        s(i, j) = std::exp(s(i, j) - mx);
        z += s(i, j);
      } else {
        s(i, j) = 0.0;
      }
    }
    s.row(i) /= z;
  }
}

}  // namespace

Var add(Var a, Var b) {
  check_same_shape(a, b, "add");
  Tape& t = a.tape();
  const auto ia = a.id(), ib = b.id();
  return t.push(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, std::int32_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad(ia) += g;
    if (t.needs_grad(ib)) t.grad(ib) += g;
  });
}

Var add_row(Var x, Var row) {
  if (row.rows() != 1 || row.cols() != x.cols()) throw UsageError("add_row: shape mismatch");
  Tape& t = x.tape();
  const auto ix = x.id(), ir = row.id();
  Matrix out = x.value().rowwise() + row.value().row(0);
  return t.push(std::move(out), {x, row}, [ix, ir](Tape& t, std::int32_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ix)) t.grad(ix) += g;
    if (t.needs_grad(ir)) t.grad(ir) += g.colwise().sum();
  });
}

Var scale(Var x, double s) {
  Tape& t = x.tape();
  const auto ix = x.id();
  return t.push(x.value() * s, {x}, [ix, s](Tape& t, std::int32_t self) {
    t.grad(ix) += t.grad(self) * s;
  });
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw UsageError("matmul: inner dimension mismatch");
  Tape& t = a.tape();
  const auto ia = a.id(), ib = b.id();
  Matrix out;
  out.noalias() = a.value() * b.value();
  return t.push(std::move(out), {a, b}, [ia, ib](Tape& t, std::int32_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad(ia).noalias() += g * t.value(ib).transpose();
    if (t.needs_grad(ib)) t.grad(ib).noalias() += t.value(ia).transpose() * g;
  });
}

Var linear(Var x, Var w, Var b) {
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    throw UsageError("linear: shape mismatch");
  }
  Tape& t = x.tape();
  const auto ix = x.id(), iw = w.id(), ib = b.id();
  Matrix out;
  out.noalias() = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  return t.push(std::move(out), {x, w, b}, [ix, iw, ib](Tape& t, std::int32_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ix)) t.grad(ix).noalias() += g * t.value(iw).transpose();
    if (t.needs_grad(iw)) t.grad(iw).noalias() += t.value(ix).transpose() * g;
    if (t.needs_grad(ib)) t.grad(ib) += g.colwise().sum();
  });
}

Var gelu(Var x) {
  Tape& t = x.tape();
  const auto ix = x.id();
  const Matrix& xv = x.value();
  Matrix out(xv.rows(), xv.cols());
  for (Eigen::Index i = 0; i < xv.size(); ++i) {
    const double v = xv.data()[i];
    out.data()[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  return t.push(std::move(out), {x}, [ix](Tape& t, std::int32_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& xv = t.value(ix);
    Matrix& gx = t.grad(ix);
    for (Eigen::Index i = 0; i < xv.size(); ++i) {
      const double v = xv.data()[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      gx.data()[i] += g.data()[i] * (cdf + v * pdf);
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Eigen::Index d = x.cols();
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d) {
    throw UsageError("layer_norm: shape mismatch");
  }
  Tape& t = x.tape();
  const Matrix& xv = x.value();
  Matrix xhat(xv.rows(), d);
  Eigen::VectorXd inv_std(xv.rows());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    const double mu = xv.row(i).mean();
    const double var = (xv.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - mu) * inv_std(i);
  }
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  const auto ix = x.id(), ig = gain.id(), ib = bias.id();
  return t.push(std::move(out), {x, gain, bias},
                [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                    Tape& t, std::int32_t self) {
                  const Matrix& g = t.grad(self);
                  if (t.needs_grad(ig)) {
                    t.grad(ig) += (g.array() * xhat.array()).colwise().sum().matrix();
                  }
                  if (t.needs_grad(ib)) t.grad(ib) += g.colwise().sum();
                  if (!t.needs_grad(ix)) return;
                  const auto gamma = t.value(ig).row(0).array();
                  Matrix& gx = t.grad(ix);
                  const double d = static_cast<double>(xhat.cols());
                  for (Eigen::Index i = 0; i < g.rows(); ++i) {
                    Eigen::ArrayXd dxhat = (g.row(i).array() * gamma).transpose();
                    const double m1 = dxhat.sum() / d;
                    const double m2 = (dxhat * xhat.row(i).array().transpose()).sum() / d;
                    gx.row(i).array() += inv_std(i) *
                        (dxhat - m1 - xhat.row(i).array().transpose() * m2).transpose();
                  }
                });
}

Var attention(Var q, Var k, Var v, int heads, const AttentionMask* mask) {
  const Eigen::Index d = q.cols();
  if (k.cols() != d || v.cols() != d || k.rows() != v.rows()) {
    throw UsageError("attention: shape mismatch");
  }
  if (heads <= 0 || d % heads != 0) throw UsageError("attention: heads must divide width");
  if (mask && (mask->rows() != q.rows() || mask->cols() != k.rows())) {
    throw UsageError("attention: mask shape mismatch");
  }
  Tape& t = q.tape();
  const Eigen::Index dh = d / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Matrix& qv = q.value();
  const Matrix& kv = k.value();
  const Matrix& vv = v.value();
  Matrix out(qv.rows(), d);
  auto probs = std::make_shared<std::vector<Matrix>>(heads);
  for (int h = 0; h < heads; ++h) {
    Matrix s;
    s.noalias() = qv.middleCols(h * dh, dh) * kv.middleCols(h * dh, dh).transpose();
    s *= inv_scale;
    softmax_rows(s, mask);
    out.middleCols(h * dh, dh).noalias() = s * vv.middleCols(h * dh, dh);
    (*probs)[h] = std::move(s);
  }
  if (!t.recording()) probs.reset();
  const auto iq = q.id(), ik = k.id(), iv = v.id();
  return t.push(std::move(out), {q, k, v},
                [iq, ik, iv, heads, dh, inv_scale, probs](Tape& t, std::int32_t self) {
                  const Matrix& g = t.grad(self);
                  const Matrix& qv = t.value(iq);
                  const Matrix& kv = t.value(ik);
                  const Matrix& vv = t.value(iv);
                  const bool gq = t.needs_grad(iq), gk = t.needs_grad(ik),
                             gv = t.needs_grad(iv);
                  for (int h = 0; h < heads; ++h) {
                    const Matrix& p = (*probs)[h];
                    const auto gh = g.middleCols(h * dh, dh);
                    if (gv) t.grad(iv).middleCols(h * dh, dh).noalias() += p.transpose() * gh;
                    if (!gq && !gk) continue;
                    Matrix dp;
                    dp.noalias() = gh * vv.middleCols(h * dh, dh).transpose();
                    Eigen::VectorXd rowdot = (dp.array() * p.array()).rowwise().sum();
                    Matrix ds = (p.array() * (dp.colwise() - rowdot).array()).matrix();
                    ds *= inv_scale;
                    if (gq) t.grad(iq).middleCols(h * dh, dh).noalias() += ds * kv.middleCols(h * dh, dh);
                    if (gk) t.grad(ik).middleCols(h * dh, dh).noalias() += ds.transpose() * qv.middleCols(h * dh, dh);
                  }
                });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw UsageError("concat_rows: no inputs");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw UsageError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::int32_t> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(r);
    r += p.rows();
  }
  Tape& t = parts.front().tape();
  return t.push(std::move(out), parts, [ids, offsets](Tape& t, std::int32_t self) {
    const Matrix& g = t.grad(self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!t.needs_grad(ids[i])) continue;
      Matrix& gi = t.grad(ids[i]);
      gi += g.middleRows(offsets[i], gi.rows());
    }
  });
}

Var concat_cols(Var a, Var b) {
  if (a.rows() != b.rows()) throw UsageError("concat_cols: row mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a.value();
  out.rightCols(b.cols()) = b.value();
  const auto ia = a.id(), ib = b.id();
  const Eigen::Index ca = a.cols(), cb = b.cols();
  return a.tape().push(std::move(out), {a, b}, [ia, ib, ca, cb](Tape& t, std::int32_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad(ia) += g.leftCols(ca);
    if (t.needs_grad(ib)) t.grad(ib) += g.rightCols(cb);
  });
}

Var slice_rows(Var x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x.rows()) {
    throw UsageError("slice_rows: range out of bounds");
  }
  const auto ix = x.id();
  return x.tape().push(x.value().middleRows(start, count), {x},
                       [ix, start, count](Tape& t, std::int32_t self) {
                         t.grad(ix).middleRows(start, count) += t.grad(self);
                       });
}

Var mean_rows(Var x) {
  const auto ix = x.id();
  const double n = static_cast<double>(x.rows());
  Matrix out = x.value().colwise().mean();
  return x.tape().push(std::move(out), {x}, [ix, n](Tape& t, std::int32_t self) {
    t.grad(ix).rowwise() += t.grad(self).row(0) / n;
  });
}

Var l2_normalize_rows(Var x) {
  const Matrix& xv = x.value();
  Eigen::VectorXd norms = xv.rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (!(norms(i) > 0.0)) throw UsageError("l2_normalize_rows: zero row");
  }
  Matrix out = xv.array().colwise() / norms.array();
  const auto ix = x.id();
  return x.tape().push(std::move(out), {x}, [ix, norms](Tape& t, std::int32_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Eigen::VectorXd dots = (g.array() * y.array()).rowwise().sum();
    Matrix gx = g - (y.array().colwise() * dots.array()).matrix();
    t.grad(ix) += (gx.array().colwise() / norms.array()).matrix();
  });
}

Var gather_rows(Var table, const std::vector<std::int32_t>& ids) {
  const Matrix& tv = table.value();
  Matrix out(static_cast<Eigen::Index>(ids.size()), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tv.rows()) throw UsageError("gather_rows: id out of range");
    out.row(static_cast<Eigen::Index>(i)) = tv.row(ids[i]);
  }
  const auto it = table.id();
  return table.tape().push(std::move(out), {table}, [it, ids](Tape& t, std::int32_t self) {
    const Matrix& g = t.grad(self);
    Matrix& gt = t.grad(it);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      gt.row(ids[i]) += g.row(static_cast<Eigen::Index>(i));
    }
  });
}

Var sum_scalars(const std::vector<Var>& terms) {
  if (terms.empty()) throw UsageError("sum_scalars: no terms");
  double s = 0.0;
  std::vector<std::int32_t> ids;
  for (const Var& v : terms) {
    if (v.value().size() != 1) throw UsageError("sum_scalars: non-scalar term");
    s += v.value()(0, 0);
    ids.push_back(v.id());
  }
  return terms.front().tape().push(Matrix::Constant(1, 1, s), terms,
                                   [ids](Tape& t, std::int32_t self) {
                                     const double g = t.grad(self)(0, 0);
                                     for (auto id : ids) {
                                       if (t.needs_grad(id)) t.grad(id)(0, 0) += g;
                                     }
                                   });
}

Var info_nce(Var a, Var b, Var log_tau) {
  check_same_shape(a, b, "info_nce");
  if (log_tau.value().size() != 1) throw UsageError("info_nce: log_tau must be 1x1");
  const Eigen::Index n = a.rows();
  const double inv_tau = std::exp(-log_tau.value()(0, 0));
  Matrix s;
  s.noalias() = a.value() * b.value().transpose();
  s *= inv_tau;
  // Row softmax (a -> b) and column softmax (b -> a).
  Matrix pr = s, pc = s;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = s.row(i).maxCoeff();
    pr.row(i) = (s.row(i).array() - mx).exp();
    const double z = pr.row(i).sum();
    pr.row(i) /= z;
    loss += -(s(i, i) - mx - std::log(z));
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    const double mx = s.col(j).maxCoeff();
    pc.col(j) = (s.col(j).array() - mx).exp();
    const double z = pc.col(j).sum();
    pc.col(j) /= z;
    loss += -(s(j, j) - mx - std::log(z));
  }
  loss /= 2.0 * static_cast<double>(n);
  const auto ia = a.id(), ib = b.id(), it = log_tau.id();
  return a.tape().push(
      Matrix::Constant(1, 1, loss), {a, b, log_tau},
      [ia, ib, it, n, inv_tau, s, pr, pc](Tape& t, std::int32_t self) {
        const double g = t.grad(self)(0, 0);
        // d loss / d s
        Matrix ds = (pr + pc) * (0.5 / static_cast<double>(n));
        ds.diagonal().array() -= 1.0 / static_cast<double>(n);
        ds *= g;
        if (t.needs_grad(ia)) t.grad(ia).noalias() += inv_tau * ds * t.value(ib);
        if (t.needs_grad(ib)) t.grad(ib).noalias() += inv_tau * ds.transpose() * t.value(ia);
        if (t.needs_grad(it)) t.grad(it)(0, 0) += -(ds.array() * s.array()).sum();
      });
}

Var cross_entropy(Var logits, const std::vector<std::int32_t>& labels) {
  const Matrix& z = logits.value();
  if (static_cast<Eigen::Index>(labels.size()) != z.rows()) {
    throw UsageError("cross_entropy: label count mismatch");
  }
  Matrix p(z.rows(), z.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const auto y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= z.cols()) throw UsageError("cross_entropy: label out of range");
    const double mx = z.row(i).maxCoeff();
    p.row(i) = (z.row(i).array() - mx).exp();
    const double zsum = p.row(i).sum();
    p.row(i) /= zsum;
    loss += -(z(i, y) - mx - std::log(zsum));
  }
  const double n = static_cast<double>(z.rows());
  loss /= n;
  const auto il = logits.id();
  return logits.tape().push(Matrix::Constant(1, 1, loss), {logits},
                            [il, p, labels, n](Tape& t, std::int32_t self) {
                              Matrix d = p;
                              for (std::size_t i = 0; i < labels.size(); ++i) {
                                d(static_cast<Eigen::Index>(i), labels[i]) -= 1.0;
                              }
                              t.grad(il) += d * (t.grad(self)(0, 0) / n);
                            });
}

}  // namespace ampere::nn
