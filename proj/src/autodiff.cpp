#include "sofs/autodiff.hpp"

#include <cmath>

#include "sofs/tensor_ops.hpp"

namespace sofs {

Var Graph::check(Var v) const {
  if (v.g != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw ContractError("variable does not belong to this graph");
  return v;
}

Var Graph::leaf(Tensor value, bool requires_grad, std::string name) {
  auto n = std::make_unique<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->is_leaf = true;
  n->op = "leaf";
  n->name = std::move(name);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::emit(Tensor value, const char* op, std::vector<int> parents,
                std::function<void(Graph&, int)> backprop) {
  auto n = std::make_unique<Node>();
  n->value = std::move(value);
  n->op = op;
  bool rg = false;
  for (int p : parents) rg = rg || node(p).requires_grad;
  n->requires_grad = rg;
  n->parents = std::move(parents);
  if (rg) n->backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Graph::accumulate(int id, const Tensor& g) {
  Node& n = node(id);
  if (!n.requires_grad) return;
  require_same_shape("grad", n.grad.shape(), g.shape());
  float* dst = n.grad.data();
  const float* src = g.data();
  for (long long i = 0; i < g.size(); ++i) dst[i] += src[i];
}

const Tensor& Graph::grad(Var v) const {
  const Node& n = node(check(v).id);
  if (!n.requires_grad) throw ContractError("gradient requested for a non-requires-grad node");
  return n.grad;
}

void Graph::backward(Var loss) {
  check(loss);
  if (value(loss).size() != 1)
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_str(value(loss).shape()));
  for (auto& n : nodes_)
    if (n->requires_grad) n->grad = Tensor(n->value.shape());
  node(loss.id).grad[0] = 1.0f;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = node(id);
    if (n.requires_grad && n.backprop) n.backprop(*this, id);
  }
}

std::vector<std::pair<std::string, const Tensor*>> Graph::gradient_map() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (const auto& n : nodes_)
    if (n->is_leaf && n->requires_grad) out.emplace_back(n->name, &n->grad);
  return out;
}

// ---------- operations ----------

Var Graph::matmul(Var a, Var b) {
  check(a);
  check(b);
  Tensor out = ops::matmul(value(a), value(b));
  return emit(std::move(out), "matmul", {a.id, b.id}, [a = a.id, b = b.id](Graph& g, int self) {
    const Tensor& dc = g.grad_ref(self);
    if (g.node(a).requires_grad) g.accumulate(a, ops::matmul_nt(dc, g.node(b).value));
    if (g.node(b).requires_grad)
      g.accumulate(b, ops::matmul(ops::transpose(g.node(a).value), dc));
  });
}

Var Graph::matmul_nt(Var a, Var b) {
  check(a);
  check(b);
  Tensor out = ops::matmul_nt(value(a), value(b));
  return emit(std::move(out), "matmul_nt", {a.id, b.id}, [a = a.id, b = b.id](Graph& g, int self) {
    const Tensor& dc = g.grad_ref(self);
    if (g.node(a).requires_grad) g.accumulate(a, ops::matmul(dc, g.node(b).value));
    if (g.node(b).requires_grad)
      g.accumulate(b, ops::matmul(ops::transpose(dc), g.node(a).value));
  });
}

Var Graph::add(Var a, Var b) {
  check(a);
  check(b);
  return emit(ops::add(value(a), value(b)), "add", {a.id, b.id},
              [a = a.id, b = b.id](Graph& g, int self) {
                g.accumulate(a, g.grad_ref(self));
                g.accumulate(b, g.grad_ref(self));
              });
}

Var Graph::sub(Var a, Var b) {
  check(a);
  check(b);
  return emit(ops::sub(value(a), value(b)), "sub", {a.id, b.id},
              [a = a.id, b = b.id](Graph& g, int self) {
                const Tensor& dc = g.grad_ref(self);
                g.accumulate(a, dc);
                if (g.node(b).requires_grad) g.accumulate(b, ops::scale(dc, -1.0f));
              });
}

Var Graph::mul(Var a, Var b) {
  check(a);
  check(b);
  return emit(ops::mul(value(a), value(b)), "mul", {a.id, b.id},
              [a = a.id, b = b.id](Graph& g, int self) {
                const Tensor& dc = g.grad_ref(self);
                if (g.node(a).requires_grad) g.accumulate(a, ops::mul(dc, g.node(b).value));
                if (g.node(b).requires_grad) g.accumulate(b, ops::mul(dc, g.node(a).value));
              });
}

Var Graph::div(Var a, Var b) {
  check(a);
  check(b);
  Tensor out = ops::div(value(a), value(b));
  return emit(std::move(out), "div", {a.id, b.id}, [a = a.id, b = b.id](Graph& g, int self) {
    const Tensor& dc = g.grad_ref(self);
    const Tensor& bv = g.node(b).value;
    const Tensor& cv = g.node(self).value;
    if (g.node(a).requires_grad) g.accumulate(a, ops::div(dc, bv));
    if (g.node(b).requires_grad) {
      Tensor db(bv.shape());
      for (long long i = 0; i < db.size(); ++i) db[i] = -dc[i] * cv[i] / bv[i];
      g.accumulate(b, db);
    }
  });
}

Var Graph::scale(Var a, float s) {
  check(a);
  return emit(ops::scale(value(a), s), "scale", {a.id}, [a = a.id, s](Graph& g, int self) {
    g.accumulate(a, ops::scale(g.grad_ref(self), s));
  });
}

Var Graph::add_scalar(Var a, float s) {
  check(a);
  return emit(ops::add_scalar(value(a), s), "add_scalar", {a.id},
              [a = a.id](Graph& g, int self) { g.accumulate(a, g.grad_ref(self)); });
}

Var Graph::relu(Var a) {
  check(a);
  return emit(ops::relu(value(a)), "relu", {a.id}, [a = a.id](Graph& g, int self) {
    const Tensor& dc = g.grad_ref(self);
    const Tensor& x = g.node(a).value;
    Tensor da(x.shape());
    for (long long i = 0; i < x.size(); ++i) da[i] = x[i] > 0.0f ? dc[i] : 0.0f;
    g.accumulate(a, da);
  });
}

Var Graph::sigmoid(Var a) {
  check(a);
  Tensor out = ops::sigmoid(value(a));
  return emit(std::move(out), "sigmoid", {a.id}, [a = a.id](Graph& g, int self) {
    const Tensor& dc = g.grad_ref(self);
    const Tensor& y = g.node(self).value;
    Tensor da(y.shape());
    constexpr float lo = static_cast<float>(ops::kSigmoidLo);
    constexpr float hi = static_cast<float>(ops::kSigmoidHi);
    for (long long i = 0; i < y.size(); ++i) {
      // the clamped tails are genuinely flat
      da[i] = (y[i] > lo && y[i] < hi) ? dc[i] * y[i] * (1.0f - y[i]) : 0.0f;
    }
    g.accumulate(a, da);
  });
}

Var Graph::lognat(Var a) {
  check(a);
  return emit(ops::lognat(value(a)), "log", {a.id}, [a = a.id](Graph& g, int self) {
    g.accumulate(a, ops::div(g.grad_ref(self), g.node(a).value));
  });
}

Var Graph::clamp_min(Var a, float lo) {
  check(a);
  return emit(ops::clamp_min(value(a), lo), "clamp_min", {a.id},
              [a = a.id, lo](Graph& g, int self) {
                const Tensor& dc = g.grad_ref(self);
                const Tensor& x = g.node(a).value;
                Tensor da(x.shape());
                for (long long i = 0; i < x.size(); ++i) da[i] = x[i] >= lo ? dc[i] : 0.0f;
                g.accumulate(a, da);
              });
}

Var Graph::clamp(Var a, float lo, float hi) {
  check(a);
  return emit(ops::clamp(value(a), lo, hi), "clamp", {a.id},
              [a = a.id, lo, hi](Graph& g, int self) {
                const Tensor& dc = g.grad_ref(self);
                const Tensor& x = g.node(a).value;
                Tensor da(x.shape());
                for (long long i = 0; i < x.size(); ++i)
                  da[i] = (x[i] >= lo && x[i] <= hi) ? dc[i] : 0.0f;
                g.accumulate(a, da);
              });
}

Var Graph::softmax_axis(Var a, int axis, float temperature) {
  check(a);
  Tensor out = ops::softmax_axis(value(a), axis, temperature);
  return emit(std::move(out), "softmax_axis", {a.id},
              [a = a.id, axis, temperature](Graph& g, int self) {
                const Tensor& dy = g.grad_ref(self);
                const Tensor& y = g.node(self).value;
                long long outer = 1, inner = 1;
                for (int i = 0; i < axis; ++i) outer *= y.dim(i);
                for (int i = axis + 1; i < y.ndim(); ++i) inner *= y.dim(i);
                const long long n = y.dim(axis);
                Tensor da(y.shape());
                const double inv_t = 1.0 / temperature;
                for (long long o = 0; o < outer; ++o)
                  for (long long in = 0; in < inner; ++in) {
                    const long long base = o * n * inner + in;
                    double dot = 0.0;
                    for (long long j = 0; j < n; ++j)
                      dot += static_cast<double>(dy[base + j * inner]) * y[base + j * inner];
                    for (long long j = 0; j < n; ++j) {
                      const long long k = base + j * inner;
                      da[k] = static_cast<float>((dy[k] - dot) * y[k] * inv_t);
                    }
                  }
                g.accumulate(a, da);
              });
}

Var Graph::l2_normalize_rows(Var a, float epsilon) {
  check(a);
  const Tensor& x = value(a);
  Tensor out = ops::l2_normalize_rows(x, epsilon);
  return emit(std::move(out), "l2_normalize_rows", {a.id},
              [a = a.id, epsilon](Graph& g, int self) {
                const Tensor& dy = g.grad_ref(self);
                const Tensor& y = g.node(self).value;
                const Tensor& x = g.node(a).value;
                const int n = x.dim(0), c = x.dim(1);
                Tensor da(x.shape());
                for (int i = 0; i < n; ++i) {
                  double ss = 0.0;
                  for (int j = 0; j < c; ++j) ss += static_cast<double>(x.at(i, j)) * x.at(i, j);
                  const double norm = std::sqrt(ss);
                  if (norm > epsilon) {
                    double dot = 0.0;
                    for (int j = 0; j < c; ++j)
                      dot += static_cast<double>(dy.at(i, j)) * y.at(i, j);
                    for (int j = 0; j < c; ++j)
                      da.at(i, j) = static_cast<float>((dy.at(i, j) - dot * y.at(i, j)) / norm);
                  } else {
                    for (int j = 0; j < c; ++j)
                      da.at(i, j) = static_cast<float>(dy.at(i, j) / epsilon);
                  }
                }
                g.accumulate(a, da);
              });
}

Var Graph::sum_all(Var a) {
  check(a);
  return emit(ops::sum_all(value(a)), "sum_all", {a.id}, [a = a.id](Graph& g, int self) {
    g.accumulate(a, Tensor::full(g.node(a).value.shape(), g.grad_ref(self)[0]));
  });
}

Var Graph::mean_all(Var a) {
  check(a);
  return emit(ops::mean_all(value(a)), "mean_all", {a.id}, [a = a.id](Graph& g, int self) {
    const float s = g.grad_ref(self)[0] / static_cast<float>(g.node(a).value.size());
    g.accumulate(a, Tensor::full(g.node(a).value.shape(), s));
  });
}

Var Graph::rowmax(Var a) {
  check(a);
  auto argmax = std::make_shared<std::vector<int>>();
  Tensor out = ops::rowmax(value(a), argmax.get());
  return emit(std::move(out), "rowmax", {a.id}, [a = a.id, argmax](Graph& g, int self) {
    const Tensor& dy = g.grad_ref(self);
    const Tensor& x = g.node(a).value;
    Tensor da(x.shape());
    for (int i = 0; i < x.dim(0); ++i) da.at(i, (*argmax)[static_cast<size_t>(i)]) = dy[i];
    g.accumulate(a, da);
  });
}

Var Graph::reshape(Var a, std::vector<int> shape) {
  check(a);
  Tensor out = value(a).reshaped(shape);
  return emit(std::move(out), "reshape", {a.id}, [a = a.id](Graph& g, int self) {
    g.accumulate(a, g.grad_ref(self).reshaped(g.node(a).value.shape()));
  });
}

Var Graph::concat_rows(const std::vector<Var>& parts) {
  std::vector<const Tensor*> vs;
  std::vector<int> ids;
  for (Var p : parts) {
    check(p);
    vs.push_back(&value(p));
    ids.push_back(p.id);
  }
  Tensor out = ops::concat_rows(vs);
  return emit(std::move(out), "concat_rows", ids, [ids](Graph& g, int self) {
    const Tensor& dc = g.grad_ref(self);
    int row = 0;
    const int c = dc.dim(1);
    for (int pid : ids) {
      const Tensor& pv = g.node(pid).value;
      if (g.node(pid).requires_grad) {
        Tensor dp(pv.shape());
        std::copy(dc.data() + static_cast<size_t>(row) * c,
                  dc.data() + static_cast<size_t>(row + pv.dim(0)) * c, dp.data());
        g.accumulate(pid, dp);
      }
      row += pv.dim(0);
    }
  });
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
  std::vector<const Tensor*> vs;
  std::vector<int> ids;
  for (Var p : parts) {
    check(p);
    vs.push_back(&value(p));
    ids.push_back(p.id);
  }
  Tensor out = ops::concat_cols(vs);
  return emit(std::move(out), "concat_cols", ids, [ids](Graph& g, int self) {
    const Tensor& dc = g.grad_ref(self);
    int col = 0;
    for (int pid : ids) {
      const Tensor& pv = g.node(pid).value;
      const int pc = pv.dim(1);
      if (g.node(pid).requires_grad) g.accumulate(pid, ops::slice_cols(dc, col, col + pc));
      col += pc;
    }
  });
}

Var Graph::slice_cols(Var a, int c0, int c1) {
  check(a);
  Tensor out = ops::slice_cols(value(a), c0, c1);
  return emit(std::move(out), "slice_cols", {a.id}, [a = a.id, c0, c1](Graph& g, int self) {
    const Tensor& dc = g.grad_ref(self);
    const Tensor& x = g.node(a).value;
    Tensor da(x.shape());
    for (int i = 0; i < x.dim(0); ++i)
      for (int j = c0; j < c1; ++j) da.at(i, j) = dc.at(i, j - c0);
    g.accumulate(a, da);
  });
}

Var Graph::broadcast_row(Var v, int n) {
  check(v);
  Tensor out = ops::broadcast_row(value(v), n);
  return emit(std::move(out), "broadcast_row", {v.id}, [v = v.id, n](Graph& g, int self) {
    const Tensor& dc = g.grad_ref(self);
    const Tensor& pv = g.node(v).value;
    Tensor dv(pv.shape());
    const long long c = pv.size();
    for (int i = 0; i < n; ++i)
      for (long long j = 0; j < c; ++j) dv[j] += dc[static_cast<long long>(i) * c + j];
    g.accumulate(v, dv);
  });
}

Var Graph::scale_rows(Var a, Tensor row_weights) {
  check(a);
  Tensor out = ops::scale_rows(value(a), row_weights);
  auto w = std::make_shared<Tensor>(std::move(row_weights));
  return emit(std::move(out), "scale_rows", {a.id}, [a = a.id, w](Graph& g, int self) {
    g.accumulate(a, ops::scale_rows(g.grad_ref(self), *w));
  });
}

Var Graph::conv2d(Var x, Var w, Var b, int stride, int pad) {
  check(x);
  check(w);
  check(b);
  Tensor out = ops::conv2d(value(x), value(w), value(b), stride, pad);
  return emit(std::move(out), "conv2d", {x.id, w.id, b.id},
              [x = x.id, w = w.id, b = b.id, stride, pad](Graph& g, int self) {
                const Tensor& dy = g.grad_ref(self);
                const Tensor& xv = g.node(x).value;
                const Tensor& wv = g.node(w).value;
                const int H = xv.dim(0), W = xv.dim(1), Cin = xv.dim(2);
                const int kh = wv.dim(0), kw = wv.dim(1), Cout = wv.dim(3);
                const int Ho = dy.dim(0), Wo = dy.dim(1);
                auto xat = [&](int y, int xx, int c) {
                  return xv[(static_cast<long long>(y) * W + xx) * Cin + c];
                };
                if (g.node(b).requires_grad) {
                  Tensor db(g.node(b).value.shape());
                  for (long long i = 0; i < static_cast<long long>(Ho) * Wo; ++i)
                    for (int c = 0; c < Cout; ++c) db[c] += dy[i * Cout + c];
                  g.accumulate(b, db);
                }
                if (g.node(w).requires_grad) {
                  Tensor dw(wv.shape());
                  for (int oy = 0; oy < Ho; ++oy)
                    for (int ox = 0; ox < Wo; ++ox)
                      for (int ky = 0; ky < kh; ++ky) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= H) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                          const int ix = ox * stride + kx - pad;
                          if (ix < 0 || ix >= W) continue;
                          for (int ci = 0; ci < Cin; ++ci) {
                            const float xi = xat(iy, ix, ci);
                            const long long wbase =
                                ((static_cast<long long>(ky) * kw + kx) * Cin + ci) * Cout;
                            const long long ybase =
                                (static_cast<long long>(oy) * Wo + ox) * Cout;
                            for (int co = 0; co < Cout; ++co)
                              dw[wbase + co] += xi * dy[ybase + co];
                          }
                        }
                      }
                  g.accumulate(w, dw);
                }
                if (g.node(x).requires_grad) {
                  Tensor dx(xv.shape());
                  for (int oy = 0; oy < Ho; ++oy)
                    for (int ox = 0; ox < Wo; ++ox)
                      for (int ky = 0; ky < kh; ++ky) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= H) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                          const int ix = ox * stride + kx - pad;
                          if (ix < 0 || ix >= W) continue;
                          for (int ci = 0; ci < Cin; ++ci) {
                            const long long wbase =
                                ((static_cast<long long>(ky) * kw + kx) * Cin + ci) * Cout;
                            const long long ybase =
                                (static_cast<long long>(oy) * Wo + ox) * Cout;
                            double s = 0.0;
                            for (int co = 0; co < Cout; ++co)
                              s += static_cast<double>(wv[wbase + co]) * dy[ybase + co];
                            dx[(static_cast<long long>(iy) * W + ix) * Cin + ci] +=
                                static_cast<float>(s);
                          }
                        }
                      }
                  g.accumulate(x, dx);
                }
              });
}

Var Graph::avg_pool2(Var x) {
  check(x);
  Tensor out = ops::avg_pool2(value(x));
  return emit(std::move(out), "avg_pool2", {x.id}, [x = x.id](Graph& g, int self) {
    const Tensor& dy = g.grad_ref(self);
    const Tensor& xv = g.node(x).value;
    const int W = xv.dim(1), C = xv.dim(2);
    const int Ho = dy.dim(0), Wo = dy.dim(1);
    Tensor dx(xv.shape());
    for (int y = 0; y < Ho; ++y)
      for (int xo = 0; xo < Wo; ++xo)
        for (int c = 0; c < C; ++c) {
          const float gq = 0.25f * dy[(static_cast<long long>(y) * Wo + xo) * C + c];
          dx[(static_cast<long long>(2 * y) * W + 2 * xo) * C + c] += gq;
          dx[(static_cast<long long>(2 * y) * W + 2 * xo + 1) * C + c] += gq;
          dx[(static_cast<long long>(2 * y + 1) * W + 2 * xo) * C + c] += gq;
          dx[(static_cast<long long>(2 * y + 1) * W + 2 * xo + 1) * C + c] += gq;
        }
    g.accumulate(x, dx);
  });
}

Var Graph::resample_nearest(Var x, int Ho, int Wo) {
  check(x);
  Tensor out = ops::resample_nearest(value(x), Ho, Wo);
  return emit(std::move(out), "resample_nearest", {x.id},
              [x = x.id, Ho, Wo](Graph& g, int self) {
                const Tensor& dy = g.grad_ref(self);
                const Tensor& xv = g.node(x).value;
                const int H = xv.dim(0), W = xv.dim(1), C = xv.dim(2);
                Tensor dx(xv.shape());
                for (int y = 0; y < Ho; ++y) {
                  const int sy = ops::nearest_src(y, H, Ho);
                  for (int xo = 0; xo < Wo; ++xo) {
                    const int sx = ops::nearest_src(xo, W, Wo);
                    for (int c = 0; c < C; ++c)
                      dx[(static_cast<long long>(sy) * W + sx) * C + c] +=
                          dy[(static_cast<long long>(y) * Wo + xo) * C + c];
                  }
                }
                g.accumulate(x, dx);
              });
}

Var Graph::upsample_bilinear(Var x, int Ho, int Wo) {
  check(x);
  Tensor out = ops::resize_bilinear(value(x), Ho, Wo);
  return emit(std::move(out), "upsample_bilinear", {x.id},
              [x = x.id, Ho, Wo](Graph& g, int self) {
                const Tensor& dy = g.grad_ref(self);
                const Tensor& xv = g.node(x).value;
                const int H = xv.dim(0), W = xv.dim(1), C = xv.dim(2);
                Tensor dx(xv.shape());
                for (int y = 0; y < Ho; ++y) {
                  const auto ty = ops::bilinear_tap(y, H, Ho);
                  for (int xo = 0; xo < Wo; ++xo) {
                    const auto t = ops::bilinear_tap(xo, W, Wo);
                    for (int c = 0; c < C; ++c) {
                      const float gv = dy[(static_cast<long long>(y) * Wo + xo) * C + c];
                      dx[(static_cast<long long>(ty.i0) * W + t.i0) * C + c] +=
                          static_cast<float>(ty.w0 * t.w0) * gv;
                      dx[(static_cast<long long>(ty.i0) * W + t.i1) * C + c] +=
                          static_cast<float>(ty.w0 * t.w1) * gv;
                      dx[(static_cast<long long>(ty.i1) * W + t.i0) * C + c] +=
                          static_cast<float>(ty.w1 * t.w0) * gv;
                      dx[(static_cast<long long>(ty.i1) * W + t.i1) * C + c] +=
                          static_cast<float>(ty.w1 * t.w1) * gv;
                    }
                  }
                }
                g.accumulate(x, dx);
              });
}

}  // namespace sofs
