#include "kaid/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "kaid/error.hpp"

namespace kaid::nn {

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(const Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var{this, it->second};
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.requires_grad = grad_enabled_ && p.trainable;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var{this, nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const {
  const auto& n = nodes_.at(v.id);
  return n.external ? *n.external : n.value;
}

const Tensor& Tape::grad(Var v) const {
  const auto& n = nodes_.at(v.id);
  return n.param ? n.param->grad : n.grad;
}

Tensor& Tape::grad_mut(std::size_t id) {
  auto& n = nodes_[id];
  const Tensor& val = n.external ? *n.external : n.value;
  Tensor& g = n.param ? n.param->grad : n.grad;
  if (g.shape != val.shape) g = Tensor(val.shape);
  return g;
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (const auto& in : inputs) {
      if (in.tape != this) throw ValidationError("op mixes variables from different tapes");
      if (nodes_[in.id].requires_grad) n.requires_grad = true;
    }
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

void Tape::backward(Var loss, double scale) {
  if (nodes_.empty() || loss.tape != this || loss.id >= nodes_.size()) {
    throw ValidationError("backward called before a forward pass was recorded");
  }
  if (!grad_enabled_) throw ValidationError("backward called on a tape without gradient recording");
  if (backward_done_) throw ValidationError("backward already ran on this tape");
  if (value(loss).size() != 1) throw ValidationError("backward expects a scalar loss");
  backward_done_ = true;
  if (!nodes_[loss.id].requires_grad) return;
  grad_mut(loss.id).data[0] += scale;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.requires_grad || !n.backward) continue;
    if (n.grad.shape != n.value.shape) continue;  // nothing flowed into this node
    n.backward(*this, i);
  }
}

namespace {

void require(bool cond, const char* op, const std::string& what) {
  if (!cond) throw ValidationError(std::string(op) + ": " + what);
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  require(B.rows() == k, "matmul", "inner dimensions differ: " + shape_string(A.shape) + " x " + shape_string(B.shape));
  Tensor C = Tensor::matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    double* c = C.row_ptr(i);
    const double* arow = A.row_ptr(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = B.row_ptr(p);
      for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
    }
  }
  return t.record(std::move(C), {a, b}, [a, b, m, k, n](Tape& tp, std::size_t self) {
    const auto& G = tp.grad_of(self);
    const auto& A = tp.value(a);
    const auto& B = tp.value(b);
    if (tp.needs(a.id)) {
      auto& gA = tp.grad_mut(a.id);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          const double* g = G.row_ptr(i);
          const double* brow = B.row_ptr(p);
          for (std::size_t j = 0; j < n; ++j) s += g[j] * brow[j];
          gA.data[i * k + p] += s;
        }
      }
    }
    if (tp.needs(b.id)) {
      auto& gB = tp.grad_mut(b.id);
      for (std::size_t i = 0; i < m; ++i) {
        const double* g = G.row_ptr(i);
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A.at(i, p);
          double* gb = gB.data.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gb[j] += av * g[j];
        }
      }
    }
  });
}

Var linear(Var x, Var weight, Var bias) {
  Tape& t = *x.tape;
  const auto& X = t.value(x);
  const auto& W = t.value(weight);
  const auto& b = t.value(bias);
  const std::size_t rows = X.rows(), in = X.cols(), out = W.cols();
  require(W.rows() == in, "linear",
          "weight " + shape_string(W.shape) + " does not accept input " + shape_string(X.shape));
  require(b.size() == out, "linear", "bias size does not match output width");
  Tensor Y = Tensor::matrix(rows, out);
  for (std::size_t r = 0; r < rows; ++r) {
    double* y = Y.row_ptr(r);
    std::copy(b.data.begin(), b.data.end(), y);
    const double* xr = X.row_ptr(r);
    for (std::size_t i = 0; i < in; ++i) {
      const double xv = xr[i];
      if (xv == 0.0) continue;
      const double* w = W.row_ptr(i);
      for (std::size_t o = 0; o < out; ++o) y[o] += xv * w[o];
    }
  }
  return t.record(std::move(Y), {x, weight, bias}, [x, weight, bias, rows, in, out](Tape& tp, std::size_t self) {
    const auto& G = tp.grad_of(self);
    const auto& X = tp.value(x);
    const auto& W = tp.value(weight);
    if (tp.needs(x.id)) {
      auto& gX = tp.grad_mut(x.id);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* g = G.row_ptr(r);
        double* gx = gX.row_ptr(r);
        for (std::size_t i = 0; i < in; ++i) {
          const double* w = W.row_ptr(i);
          double s = 0.0;
          for (std::size_t o = 0; o < out; ++o) s += g[o] * w[o];
          gx[i] += s;
        }
      }
    }
    if (tp.needs(weight.id)) {
      auto& gW = tp.grad_mut(weight.id);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* g = G.row_ptr(r);
        const double* xr = X.row_ptr(r);
        for (std::size_t i = 0; i < in; ++i) {
          const double xv = xr[i];
          if (xv == 0.0) continue;
          double* gw = gW.row_ptr(i);
          for (std::size_t o = 0; o < out; ++o) gw[o] += xv * g[o];
        }
      }
    }
    if (tp.needs(bias.id)) {
      auto& gb = tp.grad_mut(bias.id);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* g = G.row_ptr(r);
        for (std::size_t o = 0; o < out; ++o) gb.data[o] += g[o];
      }
    }
  });
}

Var add(Var a, Var b) {
  Tape& t = *a.tape;
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  require(A.size() == B.size(), "add", "shapes differ: " + shape_string(A.shape) + " vs " + shape_string(B.shape));
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.data[i] += B.data[i];
  return t.record(std::move(C), {a, b}, [a, b](Tape& tp, std::size_t self) {
    const auto& G = tp.grad_of(self);
    for (auto v : {a, b}) {
      if (!tp.needs(v.id)) continue;
      auto& g = tp.grad_mut(v.id);
      for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += G.data[i];
    }
  });
}

Var scale(Var x, double factor) {
  Tape& t = *x.tape;
  Tensor Y = t.value(x);
  for (auto& v : Y.data) v *= factor;
  return t.record(std::move(Y), {x}, [x, factor](Tape& tp, std::size_t self) {
    const auto& G = tp.grad_of(self);
    auto& g = tp.grad_mut(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += factor * G.data[i];
  });
}

Var gelu(Var x) {
  Tape& t = *x.tape;
  Tensor Y = t.value(x);
  for (auto& v : Y.data) v = 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2));
  return t.record(std::move(Y), {x}, [x](Tape& tp, std::size_t self) {
    const auto& G = tp.grad_of(self);
    const auto& X = tp.value(x);
    auto& g = tp.grad_mut(x.id);
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = X.data[i];
      const double d = 0.5 * (1.0 + std::erf(v * M_SQRT1_2)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
      g.data[i] += d * G.data[i];
    }
  });
}

Var relu(Var x) {
  Tape& t = *x.tape;
  Tensor Y = t.value(x);
  for (auto& v : Y.data) v = v > 0.0 ? v : 0.0;
  return t.record(std::move(Y), {x}, [x](Tape& tp, std::size_t self) {
    const auto& G = tp.grad_of(self);
    const auto& X = tp.value(x);
    auto& g = tp.grad_mut(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (X.data[i] > 0.0) g.data[i] += G.data[i];
    }
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Tape& t = *x.tape;
  const auto& X = t.value(x);
  const auto& gm = t.value(gamma);
  const auto& bt = t.value(beta);
  const std::size_t rows = X.rows(), h = X.cols();
  require(gm.size() == h && bt.size() == h, "layer_norm", "gain/bias width does not match input");
  Tensor Y = Tensor::matrix(rows, h);
  auto xhat = std::make_shared<Tensor>(Tensor::matrix(rows, h));
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = X.row_ptr(r);
    double mean = 0.0;
    for (std::size_t i = 0; i < h; ++i) mean += xr[i];
    mean /= static_cast<double>(h);
    double var = 0.0;
    for (std::size_t i = 0; i < h; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<double>(h);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    double* xh = xhat->row_ptr(r);
    double* y = Y.row_ptr(r);
    for (std::size_t i = 0; i < h; ++i) {
      xh[i] = (xr[i] - mean) * is;
      y[i] = gm.data[i] * xh[i] + bt.data[i];
    }
  }
  return t.record(std::move(Y), {x, gamma, beta}, [x, gamma, beta, xhat, inv_std, rows, h](Tape& tp, std::size_t self) {
    const auto& G = tp.grad_of(self);
    const auto& gm = tp.value(gamma);
    if (tp.needs(gamma.id) || tp.needs(beta.id)) {
      Tensor* gg = tp.needs(gamma.id) ? &tp.grad_mut(gamma.id) : nullptr;
      Tensor* gb = tp.needs(beta.id) ? &tp.grad_mut(beta.id) : nullptr;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* g = G.row_ptr(r);
        const double* xh = xhat->row_ptr(r);
        for (std::size_t i = 0; i < h; ++i) {
          if (gg) gg->data[i] += g[i] * xh[i];
          if (gb) gb->data[i] += g[i];
        }
      }
    }
    if (tp.needs(x.id)) {
      auto& gx = tp.grad_mut(x.id);
      const double inv_h = 1.0 / static_cast<double>(h);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* g = G.row_ptr(r);
        const double* xh = xhat->row_ptr(r);
        double mean_d = 0.0, mean_dx = 0.0;
        for (std::size_t i = 0; i < h; ++i) {
          const double d = g[i] * gm.data[i];
          mean_d += d;
          mean_dx += d * xh[i];
        }
        mean_d *= inv_h;
        mean_dx *= inv_h;
        double* out = gx.row_ptr(r);
        for (std::size_t i = 0; i < h; ++i) {
          const double d = g[i] * gm.data[i];
          out[i] += (*inv_std)[r] * (d - mean_d - xh[i] * mean_dx);
        }
      }
    }
  });
}

Var attention(Var q, Var k, Var v, std::size_t heads) {
  Tape& t = *q.tape;
  const auto& Q = t.value(q);
  const auto& K = t.value(k);
  const auto& V = t.value(v);
  const std::size_t T = Q.rows(), H = Q.cols();
  require(K.rows() == T && V.rows() == T && K.cols() == H && V.cols() == H, "attention", "Q, K, V shapes differ");
  require(heads > 0 && H % heads == 0, "attention", "hidden size not divisible by head count");
  const std::size_t dh = H / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  auto probs = std::make_shared<std::vector<double>>(heads * T * T);
  Tensor O = Tensor::matrix(T, H);
  std::vector<double> srow(T);
  for (std::size_t hd = 0; hd < heads; ++hd) {
    const std::size_t off = hd * dh;
    for (std::size_t i = 0; i < T; ++i) {
      const double* qi = Q.row_ptr(i) + off;
      double mx = -INFINITY;
      for (std::size_t j = 0; j < T; ++j) {
        const double* kj = K.row_ptr(j) + off;
        double s = 0.0;
        for (std::size_t d = 0; d < dh; ++d) s += qi[d] * kj[d];
        srow[j] = s * sc;
        mx = std::max(mx, srow[j]);
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < T; ++j) {
        srow[j] = std::exp(srow[j] - mx);
        sum += srow[j];
      }
      double* p = probs->data() + (hd * T + i) * T;
      double* oi = O.row_ptr(i) + off;
      for (std::size_t j = 0; j < T; ++j) {
        p[j] = srow[j] / sum;
        const double* vj = V.row_ptr(j) + off;
        for (std::size_t d = 0; d < dh; ++d) oi[d] += p[j] * vj[d];
      }
    }
  }
  return t.record(std::move(O), {q, k, v}, [q, k, v, probs, T, H, heads, dh, sc](Tape& tp, std::size_t self) {
    const auto& G = tp.grad_of(self);
    const auto& Q = tp.value(q);
    const auto& K = tp.value(k);
    const auto& V = tp.value(v);
    Tensor* gQ = tp.needs(q.id) ? &tp.grad_mut(q.id) : nullptr;
    Tensor* gK = tp.needs(k.id) ? &tp.grad_mut(k.id) : nullptr;
    Tensor* gV = tp.needs(v.id) ? &tp.grad_mut(v.id) : nullptr;
    std::vector<double> dp(T);
    for (std::size_t hd = 0; hd < heads; ++hd) {
      const std::size_t off = hd * dh;
      for (std::size_t i = 0; i < T; ++i) {
        const double* p = probs->data() + (hd * T + i) * T;
        const double* gi = G.row_ptr(i) + off;
        double dot = 0.0;
        for (std::size_t j = 0; j < T; ++j) {
          const double* vj = V.row_ptr(j) + off;
          double s = 0.0;
          for (std::size_t d = 0; d < dh; ++d) s += gi[d] * vj[d];
          dp[j] = s;
          dot += s * p[j];
          if (gV) {
            double* gv = gV->row_ptr(j) + off;
            for (std::size_t d = 0; d < dh; ++d) gv[d] += p[j] * gi[d];
          }
        }
        for (std::size_t j = 0; j < T; ++j) {
          const double ds = p[j] * (dp[j] - dot) * sc;
          if (ds == 0.0) continue;
          if (gQ) {
            double* gq = gQ->row_ptr(i) + off;
            const double* kj = K.row_ptr(j) + off;
            for (std::size_t d = 0; d < dh; ++d) gq[d] += ds * kj[d];
          }
          if (gK) {
            double* gk = gK->row_ptr(j) + off;
            const double* qi = Q.row_ptr(i) + off;
            for (std::size_t d = 0; d < dh; ++d) gk[d] += ds * qi[d];
          }
        }
      }
    }
  });
}

Var embedding(Var table, std::span<const std::size_t> ids) {
  Tape& t = *table.tape;
  const auto& E = t.value(table);
  const std::size_t h = E.cols();
  Tensor Y = Tensor::matrix(ids.size(), h);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    require(ids[r] < E.rows(), "embedding", "id " + std::to_string(ids[r]) + " outside table of " +
                                                std::to_string(E.rows()) + " rows");
    std::copy(E.row_ptr(ids[r]), E.row_ptr(ids[r]) + h, Y.row_ptr(r));
  }
  std::vector<std::size_t> kept(ids.begin(), ids.end());
  return t.record(std::move(Y), {table}, [table, kept = std::move(kept), h](Tape& tp, std::size_t self) {
    const auto& G = tp.grad_of(self);
    auto& gE = tp.grad_mut(table.id);
    for (std::size_t r = 0; r < kept.size(); ++r) {
      double* dst = gE.row_ptr(kept[r]);
      const double* src = G.row_ptr(r);
      for (std::size_t i = 0; i < h; ++i) dst[i] += src[i];
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  Tape& t = *parts.front().tape;
  const std::size_t rows = t.value(parts.front()).rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const auto& v = t.value(p);
    require(v.rows() == rows, "concat_cols", "row counts differ");
    widths.push_back(v.cols());
    total += v.cols();
  }
  Tensor Y = Tensor::matrix(rows, total);
  std::size_t off = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& v = t.value(parts[p]);
    for (std::size_t r = 0; r < rows; ++r) std::copy(v.row_ptr(r), v.row_ptr(r) + widths[p], Y.row_ptr(r) + off);
    off += widths[p];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record(std::move(Y), parts, [inputs, widths, rows, total](Tape& tp, std::size_t self) {
    const auto& G = tp.grad_of(self);
    std::size_t off = 0;
    for (std::size_t p = 0; p < inputs.size(); ++p) {
      if (tp.needs(inputs[p].id)) {
        auto& g = tp.grad_mut(inputs[p].id);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* src = G.data.data() + r * total + off;
          double* dst = g.row_ptr(r);
          for (std::size_t i = 0; i < widths[p]; ++i) dst[i] += src[i];
        }
      }
      off += widths[p];
    }
  });
}

Var concat_cols(Var a, Var b) {
  const Var parts[] = {a, b};
  return concat_cols(std::span<const Var>(parts));
}

Var mean_rows(Var x, std::span<const std::size_t> rows) {
  Tape& t = *x.tape;
  const auto& X = t.value(x);
  require(!rows.empty(), "mean_rows", "empty row list");
  const std::size_t h = X.cols();
  Tensor Y = Tensor::matrix(1, h);
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (auto r : rows) {
    require(r < X.rows(), "mean_rows", "row index out of range");
    const double* xr = X.row_ptr(r);
    for (std::size_t i = 0; i < h; ++i) Y.data[i] += xr[i];
  }
  for (auto& v : Y.data) v *= inv;
  std::vector<std::size_t> kept(rows.begin(), rows.end());
  return t.record(std::move(Y), {x}, [x, kept = std::move(kept), h, inv](Tape& tp, std::size_t self) {
    const auto& G = tp.grad_of(self);
    auto& g = tp.grad_mut(x.id);
    for (auto r : kept) {
      double* dst = g.row_ptr(r);
      for (std::size_t i = 0; i < h; ++i) dst[i] += inv * G.data[i];
    }
  });
}

Var row(Var x, std::size_t r) {
  const std::size_t idx[] = {r};
  return mean_rows(x, idx);
}

Var unfold(Var x, std::size_t width, std::size_t min_rows) {
  Tape& t = *x.tape;
  const auto& X = t.value(x);
  require(width >= 1, "unfold", "window width must be positive");
  const std::size_t T = X.rows(), e = X.cols();
  const std::size_t padded = std::max({T, min_rows, width});
  const std::size_t out_rows = padded - width + 1;
  Tensor Y = Tensor::matrix(out_rows, width * e);
  for (std::size_t r = 0; r < out_rows; ++r) {
    for (std::size_t j = 0; j < width && r + j < T; ++j) {
      std::copy(X.row_ptr(r + j), X.row_ptr(r + j) + e, Y.row_ptr(r) + j * e);
    }
  }
  return t.record(std::move(Y), {x}, [x, width, T, e, out_rows](Tape& tp, std::size_t self) {
    const auto& G = tp.grad_of(self);
    auto& g = tp.grad_mut(x.id);
    for (std::size_t r = 0; r < out_rows; ++r) {
      for (std::size_t j = 0; j < width && r + j < T; ++j) {
        const double* src = G.row_ptr(r) + j * e;
        double* dst = g.row_ptr(r + j);
        for (std::size_t i = 0; i < e; ++i) dst[i] += src[i];
      }
    }
  });
}

Var max_rows(Var x) {
  Tape& t = *x.tape;
  const auto& X = t.value(x);
  require(X.rows() > 0, "max_rows", "empty input");
  const std::size_t h = X.cols();
  Tensor Y = Tensor::matrix(1, h);
  std::vector<std::size_t> arg(h, 0);
  for (std::size_t c = 0; c < h; ++c) {
    double best = X.at(0, c);
    for (std::size_t r = 1; r < X.rows(); ++r) {
      if (X.at(r, c) > best) {
        best = X.at(r, c);
        arg[c] = r;
      }
    }
    Y.data[c] = best;
  }
  return t.record(std::move(Y), {x}, [x, arg = std::move(arg), h](Tape& tp, std::size_t self) {
    const auto& G = tp.grad_of(self);
    auto& g = tp.grad_mut(x.id);
    for (std::size_t c = 0; c < h; ++c) g.at(arg[c], c) += G.data[c];
  });
}

void validate_distribution(std::span<const double> p, double tolerance) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw ValidationError("target distribution has a negative or NaN entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > tolerance) {
    throw ValidationError("target distribution sums to " + std::to_string(sum) + ", not 1");
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double m = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (auto& v : out) {
    v = std::exp(v - m);
    sum += v;
  }
  for (auto& v : out) v /= sum;
  return out;
}

double cross_entropy_value(std::span<const double> target, std::span<const double> logits) {
  require(target.size() == logits.size(), "cross_entropy", "target and logits differ in class count");
  validate_distribution(target);
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - m);
  const double log_z = m + std::log(sum);
  double loss = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] != 0.0) loss -= target[i] * (logits[i] - log_z);
  }
  return loss;
}

Var cross_entropy(Var logits, std::span<const double> target) {
  Tape& t = *logits.tape;
  const auto& Z = t.value(logits);
  require(Z.rows() == 1, "cross_entropy", "expects a single row of logits");
  const double loss = cross_entropy_value(target, Z.data);
  auto q = softmax(Z.data);
  std::vector<double> p(target.begin(), target.end());
  return t.record(Tensor::row({loss}), {logits}, [logits, q = std::move(q), p = std::move(p)](Tape& tp, std::size_t self) {
    const double up = tp.grad_of(self).data[0];
    double mass = 0.0;
    for (double v : p) mass += v;
    auto& g = tp.grad_mut(logits.id);
    for (std::size_t i = 0; i < q.size(); ++i) g.data[i] += up * (q[i] * mass - p[i]);
  });
}

}  // namespace kaid::nn
