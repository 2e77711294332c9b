// SPDX-License-Identifier: Apache-2.0
#include "taskspace/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "taskspace/errors.hpp"

namespace taskspace::ad {

const Tensor& Var::value() const { return tape->value(id); }

double Var::item() const {
  const Tensor& v = value();
  if (v.size() != 1) throw ContractError("item() on non-scalar of shape " + shape_str(v.shape()));
  return v[0];
}

Var Tape::leaf(Tensor value, const Tensor* ref, bool requires_grad) {
  Node n;
  n.own = std::move(value);
  n.ref = ref;
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad_slot(std::uint32_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(value(id).shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.has_grad) return n.grad;
  return Tensor(value(v.id).shape(), 0.0);
}

Var Tape::push(const char* op, Tensor value, std::initializer_list<Var> inputs, Backward fn) {
  return push(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

Var Tape::push(const char* op, Tensor value, std::span<const Var> inputs, Backward fn) {
  if (!value.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
  Node n;
  n.own = std::move(value);
  n.op = op;
  for (const Var& in : inputs) n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::backward(Var root) {
  if (value(root.id).size() != 1)
    throw ContractError("backward root must be scalar, got shape " + shape_str(value(root.id).shape()));
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  grad_slot(root.id)[0] = 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    // Interior gradients are consumed exactly once; only leaf grads are kept.
    const Tensor g = std::move(n.grad);
    n.has_grad = false;
    if (!g.all_finite()) throw NumericError(std::string("non-finite gradient flowing into ") + n.op);
    n.backward(*this, g);
  }
}

namespace {

void require(bool cond, const char* op, const std::string& what) {
  if (!cond) throw ContractError(std::string(op) + ": " + what);
}

void accumulate(Tape& t, Var v, const Tensor& g) {
  if (!t.requires_grad(v.id)) return;
  auto& slot = t.grad_slot(v.id).vec();
  const auto& src = g.vec();
  for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += src[i];
}

bool is_matrix(const Tensor& t) { return t.rank() == 2; }

// out (m x n) += a (m x k) * b (k x n)
void gemm_nn(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

// out (m x n) += a (m x k) * b^T, b is (n x k)
void gemm_nt(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      out[i * n + j] += s;
    }
  }
}

// out (k x n) += a^T * b, a is (m x k), b is (m x n)
void gemm_tn(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      double* orow = out + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

}  // namespace

Var add(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require(x.shape() == y.shape(), "add", "shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  return a.tape->push("add", std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    accumulate(t, a, g);
    accumulate(t, b, g);
  });
}

Var sub(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require(x.shape() == y.shape(), "sub", "shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  return a.tape->push("sub", std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    accumulate(t, a, g);
    if (t.requires_grad(b.id)) {
      auto& s = t.grad_slot(b.id);
      for (std::size_t i = 0; i < s.size(); ++i) s[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require(x.shape() == y.shape(), "mul", "shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return a.tape->push("mul", std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(a.id);
    const Tensor& y = t.value(b.id);
    if (t.requires_grad(a.id)) {
      auto& s = t.grad_slot(a.id);
      for (std::size_t i = 0; i < s.size(); ++i) s[i] += g[i] * y[i];
    }
    if (t.requires_grad(b.id)) {
      auto& s = t.grad_slot(b.id);
      for (std::size_t i = 0; i < s.size(); ++i) s[i] += g[i] * x[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.vec()) v *= s;
  return a.tape->push("scale", std::move(out), {a}, [a, s](Tape& t, const Tensor& g) {
    if (!t.requires_grad(a.id)) return;
    auto& slot = t.grad_slot(a.id);
    for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += s * g[i];
  });
}

Var square(Var a) { return mul(a, a); }

Var add_bias(Var a, Var bias) {
  const Tensor& x = a.value();
  const Tensor& b = bias.value();
  require(is_matrix(x), "add_bias", "input must be a matrix");
  require(b.size() == x.cols(), "add_bias",
          "bias length " + std::to_string(b.size()) + " vs columns " + std::to_string(x.cols()));
  Tensor out = x;
  const std::size_t r = x.rows(), c = x.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += b[j];
  return a.tape->push("add_bias", std::move(out), {a, bias}, [a, bias, r, c](Tape& t, const Tensor& g) {
    accumulate(t, a, g);
    if (t.requires_grad(bias.id)) {
      auto& s = t.grad_slot(bias.id);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) s[j] += g[i * c + j];
    }
  });
}

Var matmul(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require(is_matrix(x) && is_matrix(y), "matmul", "operands must be matrices");
  const std::size_t m = x.rows(), k = x.cols(), n = y.cols();
  require(y.rows() == k, "matmul", "inner extents differ: " + shape_str(x.shape()) + " x " + shape_str(y.shape()));
  Tensor out({m, n}, 0.0);
  gemm_nn(x.data().data(), y.data().data(), out.data().data(), m, k, n);
  return a.tape->push("matmul", std::move(out), {a, b}, [a, b, m, k, n](Tape& t, const Tensor& g) {
    if (t.requires_grad(a.id))
      gemm_nt(g.data().data(), t.value(b.id).data().data(), t.grad_slot(a.id).data().data(), m, n, k);
    if (t.requires_grad(b.id))
      gemm_tn(t.value(a.id).data().data(), g.data().data(), t.grad_slot(b.id).data().data(), m, k, n);
  });
}

Var matmul_nt(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require(is_matrix(x) && is_matrix(y), "matmul_nt", "operands must be matrices");
  const std::size_t m = x.rows(), k = x.cols(), n = y.rows();
  require(y.cols() == k, "matmul_nt", "inner extents differ: " + shape_str(x.shape()) + " x " + shape_str(y.shape()) + "^T");
  Tensor out({m, n}, 0.0);
  gemm_nt(x.data().data(), y.data().data(), out.data().data(), m, k, n);
  return a.tape->push("matmul_nt", std::move(out), {a, b}, [a, b, m, k, n](Tape& t, const Tensor& g) {
    // C = A B^T: dA = dC B, dB = dC^T A
    if (t.requires_grad(a.id))
      gemm_nn(g.data().data(), t.value(b.id).data().data(), t.grad_slot(a.id).data().data(), m, n, k);
    if (t.requires_grad(b.id))
      gemm_tn(g.data().data(), t.value(a.id).data().data(), t.grad_slot(b.id).data().data(), m, n, k);
  });
}

Var softmax_rows(Var a) {
  const Tensor& x = a.value();
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out = x;
  for (std::size_t i = 0; i < r; ++i) {
    double* row = out.data().data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (row[j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < c; ++j) row[j] /= z;
  }
  const std::uint32_t self = static_cast<std::uint32_t>(a.tape->size());
  return a.tape->push("softmax", std::move(out), {a}, [a, self, r, c](Tape& t, const Tensor& g) {
    if (!t.requires_grad(a.id)) return;
    const Tensor& y = t.value(self);
    auto& s = t.grad_slot(a.id);
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
      for (std::size_t j = 0; j < c; ++j) s[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
    }
  });
}

Var log_softmax_rows(Var a) {
  const Tensor& x = a.value();
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out = x;
  for (std::size_t i = 0; i < r; ++i) {
    double* row = out.data().data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) row[j] -= lse;
  }
  const std::uint32_t self = static_cast<std::uint32_t>(a.tape->size());
  return a.tape->push("log_softmax", std::move(out), {a}, [a, self, r, c](Tape& t, const Tensor& g) {
    if (!t.requires_grad(a.id)) return;
    const Tensor& y = t.value(self);
    auto& s = t.grad_slot(a.id);
    for (std::size_t i = 0; i < r; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < c; ++j) gs += g[i * c + j];
      for (std::size_t j = 0; j < c; ++j) s[i * c + j] += g[i * c + j] - std::exp(y[i * c + j]) * gs;
    }
  });
}

Var log(Var a) {
  Tensor out = a.value();
  for (auto& v : out.vec()) v = std::log(v);
  return a.tape->push("log", std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    if (!t.requires_grad(a.id)) return;
    const Tensor& x = t.value(a.id);
    auto& s = t.grad_slot(a.id);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += g[i] / x[i];
  });
}

Var tanh(Var a) {
  Tensor out = a.value();
  for (auto& v : out.vec()) v = std::tanh(v);
  const std::uint32_t self = static_cast<std::uint32_t>(a.tape->size());
  return a.tape->push("tanh", std::move(out), {a}, [a, self](Tape& t, const Tensor& g) {
    if (!t.requires_grad(a.id)) return;
    const Tensor& y = t.value(self);
    auto& s = t.grad_slot(a.id);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var gelu(Var a) {
  Tensor out = a.value();
  for (auto& v : out.vec()) v = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  return a.tape->push("gelu", std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    if (!t.requires_grad(a.id)) return;
    const Tensor& x = t.value(a.id);
    auto& s = t.grad_slot(a.id);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double v = x[i];
      const double th = std::tanh(kGeluC * (v + kGeluA * v * v * v));
      const double d = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      s[i] += g[i] * d;
    }
  });
}

Var layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
  const Tensor& in = x.value();
  require(is_matrix(in), "layer_norm", "input must be a matrix");
  const std::size_t r = in.rows(), c = in.cols();
  require(gamma.value().size() == c && beta.value().size() == c, "layer_norm", "gain/bias length mismatch");
  std::vector<double> xhat(r * c), inv(r);
  Tensor out({r, c}, 0.0);
  const Tensor& gm = gamma.value();
  const Tensor& bt = beta.value();
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = in.data().data() + i * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(c);
    inv[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (row[j] - mu) * inv[i];
      out[i * c + j] = xhat[i * c + j] * gm[j] + bt[j];
    }
  }
  return x.tape->push(
      "layer_norm", std::move(out), {x, gamma, beta},
      [x, gamma, beta, r, c, xhat = std::move(xhat), inv = std::move(inv)](Tape& t, const Tensor& g) {
        const Tensor& gm = t.value(gamma.id);
        if (t.requires_grad(gamma.id)) {
          auto& s = t.grad_slot(gamma.id);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) s[j] += g[i * c + j] * xhat[i * c + j];
        }
        if (t.requires_grad(beta.id)) {
          auto& s = t.grad_slot(beta.id);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) s[j] += g[i * c + j];
        }
        if (t.requires_grad(x.id)) {
          auto& s = t.grad_slot(x.id);
          const double invc = 1.0 / static_cast<double>(c);
          for (std::size_t i = 0; i < r; ++i) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double dxh = g[i * c + j] * gm[j];
              m1 += dxh;
              m2 += dxh * xhat[i * c + j];
            }
            m1 *= invc;
            m2 *= invc;
            for (std::size_t j = 0; j < c; ++j) {
              const double dxh = g[i * c + j] * gm[j];
              s[i * c + j] += inv[i] * (dxh - m1 - xhat[i * c + j] * m2);
            }
          }
        }
      });
}

Var embedding(Var table, std::span<const std::uint32_t> ids) {
  const Tensor& tb = table.value();
  require(is_matrix(tb), "embedding", "table must be a matrix");
  require(!ids.empty(), "embedding", "empty id list");
  const std::size_t d = tb.cols();
  std::vector<std::uint32_t> idv(ids.begin(), ids.end());
  Tensor out({idv.size(), d}, 0.0);
  for (std::size_t i = 0; i < idv.size(); ++i) {
    require(idv[i] < tb.rows(), "embedding", "id " + std::to_string(idv[i]) + " out of range");
    std::copy_n(tb.data().data() + idv[i] * d, d, out.data().data() + i * d);
  }
  return table.tape->push("embedding", std::move(out), {table}, [table, d, idv = std::move(idv)](Tape& t, const Tensor& g) {
    if (!t.requires_grad(table.id)) return;
    auto& s = t.grad_slot(table.id);
    for (std::size_t i = 0; i < idv.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) s[idv[i] * d + j] += g[i * d + j];
  });
}

Var concat_rows(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require(is_matrix(x) && is_matrix(y) && x.cols() == y.cols(), "concat_rows",
          "column mismatch " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  const std::size_t ra = x.rows(), rb = y.rows(), c = x.cols();
  std::vector<double> data(x.vec());
  data.insert(data.end(), y.vec().begin(), y.vec().end());
  return a.tape->push("concat_rows", Tensor({ra + rb, c}, std::move(data)), {a, b},
                      [a, b, ra, rb, c](Tape& t, const Tensor& g) {
                        if (t.requires_grad(a.id)) {
                          auto& s = t.grad_slot(a.id);
                          for (std::size_t i = 0; i < ra * c; ++i) s[i] += g[i];
                        }
                        if (t.requires_grad(b.id)) {
                          auto& s = t.grad_slot(b.id);
                          for (std::size_t i = 0; i < rb * c; ++i) s[i] += g[ra * c + i];
                        }
                      });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  const std::size_t r = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require(is_matrix(p.value()) && p.value().rows() == r, "concat_cols", "row mismatch");
    widths.push_back(p.value().cols());
    total += widths.back();
  }
  Tensor out({r, total}, 0.0);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + off + j] = v[i * widths[k] + j];
    off += widths[k];
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return parts[0].tape->push("concat_cols", std::move(out), parts,
                             [ins, widths, r, total](Tape& t, const Tensor& g) {
                               std::size_t off = 0;
                               for (std::size_t k = 0; k < ins.size(); ++k) {
                                 if (t.requires_grad(ins[k].id)) {
                                   auto& s = t.grad_slot(ins[k].id);
                                   for (std::size_t i = 0; i < r; ++i)
                                     for (std::size_t j = 0; j < widths[k]; ++j)
                                       s[i * widths[k] + j] += g[i * total + off + j];
                                 }
                                 off += widths[k];
                               }
                             });
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
  const Tensor& x = a.value();
  require(is_matrix(x) && count > 0 && start + count <= x.rows(), "slice_rows", "range out of bounds");
  const std::size_t c = x.cols();
  std::vector<double> data(x.vec().begin() + start * c, x.vec().begin() + (start + count) * c);
  return a.tape->push("slice_rows", Tensor({count, c}, std::move(data)), {a}, [a, start, count, c](Tape& t, const Tensor& g) {
    if (!t.requires_grad(a.id)) return;
    auto& s = t.grad_slot(a.id);
    for (std::size_t i = 0; i < count * c; ++i) s[start * c + i] += g[i];
  });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
  const Tensor& x = a.value();
  require(is_matrix(x) && count > 0 && start + count <= x.cols(), "slice_cols", "range out of bounds");
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out({r, count}, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = x[i * c + start + j];
  return a.tape->push("slice_cols", std::move(out), {a}, [a, start, count, r, c](Tape& t, const Tensor& g) {
    if (!t.requires_grad(a.id)) return;
    auto& s = t.grad_slot(a.id);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < count; ++j) s[i * c + start + j] += g[i * count + j];
  });
}

Var mask_add(Var a, const Tensor& mask) {
  const Tensor& x = a.value();
  require(x.size() == mask.size(), "mask_add", "mask size mismatch");
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += mask[i];
  return a.tape->push("mask", std::move(out), {a}, [a](Tape& t, const Tensor& g) { accumulate(t, a, g); });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().vec()) s += v;
  return a.tape->push("sum", Tensor::scalar(s), {a}, [a](Tape& t, const Tensor& g) {
    if (!t.requires_grad(a.id)) return;
    auto& slot = t.grad_slot(a.id);
    for (auto& v : slot.vec()) v += g[0];
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  double s = 0.0;
  for (double v : a.value().vec()) s += v;
  return a.tape->push("mean", Tensor::scalar(s / n), {a}, [a, n](Tape& t, const Tensor& g) {
    if (!t.requires_grad(a.id)) return;
    auto& slot = t.grad_slot(a.id);
    for (auto& v : slot.vec()) v += g[0] / n;
  });
}

Var pick(Var a, std::size_t index) {
  require(index < a.value().size(), "pick", "index " + std::to_string(index) + " out of range");
  return a.tape->push("pick", Tensor::scalar(a.value()[index]), {a}, [a, index](Tape& t, const Tensor& g) {
    if (!t.requires_grad(a.id)) return;
    t.grad_slot(a.id)[index] += g[0];
  });
}

Var dot_const(Var a, const Tensor& w) {
  const Tensor& x = a.value();
  require(x.size() == w.size(), "dot_const", "weight size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w[i];
  return a.tape->push("dot_const", Tensor::scalar(s), {a}, [a, w](Tape& t, const Tensor& g) {
    if (!t.requires_grad(a.id)) return;
    auto& slot = t.grad_slot(a.id);
    for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += g[0] * w[i];
  });
}

namespace {

Var run_objective(const Objective& fn, Tape& tape, const ParamVector& params, std::vector<Var>& leaves, bool grads) {
  leaves.clear();
  leaves.reserve(params.count());
  for (std::size_t i = 0; i < params.count(); ++i) leaves.push_back(tape.borrow(params[i], grads));
  Var out = fn(tape, leaves);
  if (out.tape != &tape) throw ContractError("objective returned a value from a different tape");
  if (out.value().size() != 1)
    throw ContractError("objective must return a scalar, got shape " + shape_str(out.value().shape()));
  return out;
}

}  // namespace

ValueAndGrad value_and_grad(const Objective& fn, const ParamVector& params) {
  Tape tape;
  std::vector<Var> leaves;
  Var out = run_objective(fn, tape, params, leaves, true);
  tape.backward(out);
  ValueAndGrad r;
  r.value = out.item();
  for (std::size_t i = 0; i < params.count(); ++i) r.grad.add(params.name(i), tape.grad(leaves[i]));
  return r;
}

double evaluate(const Objective& fn, const ParamVector& params) {
  Tape tape;
  std::vector<Var> leaves;
  return run_objective(fn, tape, params, leaves, false).item();
}

ParamVector finite_diff_grad(const Objective& fn, const ParamVector& params, double h) {
  if (!(h > 0.0)) throw ArgumentError("finite difference step must be positive");
  ParamVector work = params;
  ParamVector grad = params.zeros_like();
  for (std::size_t k = 0; k < work.count(); ++k) {
    for (std::size_t i = 0; i < work[k].size(); ++i) {
      const double orig = work[k][i];
      work[k][i] = orig + h;
      const double fp = evaluate(fn, work);
      work[k][i] = orig - h;
      const double fm = evaluate(fn, work);
      work[k][i] = orig;
      grad[k][i] = (fp - fm) / (2.0 * h);
    }
  }
  return grad;
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) throw ContractError("max_relative_error: length mismatch");
  double diff = 0.0, scale = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / scale;
}

}  // namespace taskspace::ad
