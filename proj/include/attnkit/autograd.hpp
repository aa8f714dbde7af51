// SPDX-License-Identifier: Apache-2.0
#ifndef ATTNKIT_AUTOGRAD_HPP
#define ATTNKIT_AUTOGRAD_HPP

#include <cmath>
#include <functional>
#include <vector>

#include "attnkit/common.hpp"

namespace attnkit {

// Dense matrix helpers shared by the tape and by eager code.

template <typename T>
Array<T> matmul_nn(const Array<T>& a, const Array<T>& b) {
  const size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) throw NumericError("matmul: inner dimensions differ");
  Array<T> out = Array<T>::zeros({m, n});
  for (size_t i = 0; i < m; ++i)
    for (size_t p = 0; p < k; ++p) {
      T aip = a.data[i * k + p];
      if (aip == T(0)) continue;
      const T* brow = &b.data[p * n];
      T* orow = &out.data[i * n];
      for (size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  return out;
}

/// a . b^T
template <typename T>
Array<T> matmul_nt(const Array<T>& a, const Array<T>& b) {
  const size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) throw NumericError("matmul_nt: inner dimensions differ");
  Array<T> out = Array<T>::zeros({m, n});
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) {
      T dot = T(0);
      const T* arow = &a.data[i * k];
      const T* brow = &b.data[j * k];
      for (size_t p = 0; p < k; ++p) dot += arow[p] * brow[p];
      out.data[i * n + j] = dot;
    }
  return out;
}

/// a^T . b
template <typename T>
Array<T> matmul_tn(const Array<T>& a, const Array<T>& b) {
  const size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) throw NumericError("matmul_tn: inner dimensions differ");
  Array<T> out = Array<T>::zeros({m, n});
  for (size_t p = 0; p < k; ++p)
    for (size_t i = 0; i < m; ++i) {
      T api = a.data[p * m + i];
      if (api == T(0)) continue;
      const T* brow = &b.data[p * n];
      T* orow = &out.data[i * n];
      for (size_t j = 0; j < n; ++j) orow[j] += api * brow[j];
    }
  return out;
}

/// Reverse-mode tape over dense arrays. Define-by-run: every op returns the
/// id of a new node whose parents already exist, so one reverse sweep over
/// ids is a valid topological order. Deterministic: no parallelism, fixed
/// accumulation order.
template <typename T>
class Graph {
public:
  using NodeId = int;

  struct Node {
    Array<T> value;
    Array<T> grad;  // empty until touched by backward
    bool needs_grad = false;
    std::function<void(Graph&, NodeId)> backward;
  };

  NodeId input(Array<T> v, bool needs_grad) {
    nodes_.push_back(Node{std::move(v), {}, needs_grad, nullptr});
    return static_cast<NodeId>(nodes_.size() - 1);
  }
  NodeId constant(Array<T> v) { return input(std::move(v), false); }

  const Array<T>& value(NodeId id) const { return nodes_[id].value; }

  /// Gradient of the last backward() root w.r.t. node `id`; zeros if the
  /// node was never reached.
  Array<T> grad(NodeId id) const {
    const Node& n = nodes_[id];
    if (n.grad.data.empty()) return Array<T>::zeros(n.value.shape);
    return n.grad;
  }

  size_t size() const { return nodes_.size(); }

  // ---- elementwise ----

  NodeId add(NodeId a, NodeId b) {
    check_same_shape(a, b, "add");
    Array<T> out = nodes_[a].value;
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] += nodes_[b].value.data[i];
    return make_node(std::move(out), {a, b}, [a, b](Graph& g, NodeId self) {
      const Array<T>& gr = g.nodes_[self].grad;
      g.accumulate(a, gr);
      g.accumulate(b, gr);
    });
  }

  NodeId mul(NodeId a, NodeId b) {
    check_same_shape(a, b, "mul");
    Array<T> out = nodes_[a].value;
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] *= nodes_[b].value.data[i];
    return make_node(std::move(out), {a, b}, [a, b](Graph& g, NodeId self) {
      const Array<T>& gr = g.nodes_[self].grad;
      Array<T> da = gr, db = gr;
      for (size_t i = 0; i < gr.numel(); ++i) {
        da.data[i] *= g.nodes_[b].value.data[i];
        db.data[i] *= g.nodes_[a].value.data[i];
      }
      g.accumulate(a, da);
      g.accumulate(b, db);
    });
  }

  NodeId scale(NodeId a, T c) {
    Array<T> out = nodes_[a].value;
    for (T& v : out.data) v *= c;
    return make_node(std::move(out), {a}, [a, c](Graph& g, NodeId self) {
      Array<T> da = g.nodes_[self].grad;
      for (T& v : da.data) v *= c;
      g.accumulate(a, da);
    });
  }

  // ---- linear algebra ----

  NodeId matmul(NodeId a, NodeId b) {
    Array<T> out = matmul_nn(nodes_[a].value, nodes_[b].value);
    return make_node(std::move(out), {a, b}, [a, b](Graph& g, NodeId self) {
      const Array<T>& gr = g.nodes_[self].grad;
      g.accumulate(a, matmul_nt(gr, g.nodes_[b].value));
      g.accumulate(b, matmul_tn(g.nodes_[a].value, gr));
    });
  }

  /// a . b^T
  NodeId matmul_t(NodeId a, NodeId b) {
    Array<T> out = matmul_nt(nodes_[a].value, nodes_[b].value);
    return make_node(std::move(out), {a, b}, [a, b](Graph& g, NodeId self) {
      const Array<T>& gr = g.nodes_[self].grad;
      g.accumulate(a, matmul_nn(gr, g.nodes_[b].value));
      g.accumulate(b, matmul_tn(gr, g.nodes_[a].value));
    });
  }

  /// x [n, din] . w^T [din, dout] + bias: the dense layer used everywhere.
  NodeId linear(NodeId x, NodeId w, NodeId b) {
    const Array<T>& xv = nodes_[x].value;
    const Array<T>& wv = nodes_[w].value;
    const Array<T>& bv = nodes_[b].value;
    if (xv.dim(1) != wv.dim(1)) throw NumericError("linear: input dim mismatch");
    if (bv.numel() != wv.dim(0)) throw NumericError("linear: bias dim mismatch");
    Array<T> out = matmul_nt(xv, wv);
    const size_t n = out.dim(0), dout = out.dim(1);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < dout; ++j) out.data[i * dout + j] += bv.data[j];
    return make_node(std::move(out), {x, w, b}, [x, w, b](Graph& g, NodeId self) {
      const Array<T>& gr = g.nodes_[self].grad;
      g.accumulate(x, matmul_nn(gr, g.nodes_[w].value));
      g.accumulate(w, matmul_tn(gr, g.nodes_[x].value));
      const size_t n = gr.dim(0), dout = gr.dim(1);
      Array<T> db = Array<T>::zeros({dout});
      for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < dout; ++j) db.data[j] += gr.data[i * dout + j];
      g.accumulate(b, db);
    });
  }

  // ---- shape ----

  NodeId slice_cols(NodeId a, size_t c0, size_t c1) {
    const Array<T>& av = nodes_[a].value;
    const size_t n = av.dim(0), d = av.dim(1);
    if (!(c0 < c1 && c1 <= d)) throw NumericError("slice_cols: bad range");
    Array<T> out = Array<T>::zeros({n, c1 - c0});
    for (size_t i = 0; i < n; ++i)
      for (size_t j = c0; j < c1; ++j) out.data[i * (c1 - c0) + (j - c0)] = av.data[i * d + j];
    return make_node(std::move(out), {a}, [a, c0, c1](Graph& g, NodeId self) {
      const Array<T>& gr = g.nodes_[self].grad;
      const size_t n = gr.dim(0), w = c1 - c0, d = g.nodes_[a].value.dim(1);
      Array<T> da = Array<T>::zeros(g.nodes_[a].value.shape);
      for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < w; ++j) da.data[i * d + c0 + j] = gr.data[i * w + j];
      g.accumulate(a, da);
    });
  }

  NodeId concat_cols(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw NumericError("concat_cols: no parts");
    const size_t n = nodes_[parts[0]].value.dim(0);
    size_t total = 0;
    for (NodeId p : parts) {
      if (nodes_[p].value.dim(0) != n) throw NumericError("concat_cols: row counts differ");
      total += nodes_[p].value.dim(1);
    }
    Array<T> out = Array<T>::zeros({n, total});
    size_t off = 0;
    for (NodeId p : parts) {
      const Array<T>& pv = nodes_[p].value;
      const size_t w = pv.dim(1);
      for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < w; ++j) out.data[i * total + off + j] = pv.data[i * w + j];
      off += w;
    }
    std::vector<NodeId> parents = parts;
    return make_node(std::move(out), parents, [parents](Graph& g, NodeId self) {
      const Array<T>& gr = g.nodes_[self].grad;
      const size_t n = gr.dim(0), total = gr.dim(1);
      size_t off = 0;
      for (NodeId p : parents) {
        const size_t w = g.nodes_[p].value.dim(1);
        Array<T> dp = Array<T>::zeros(g.nodes_[p].value.shape);
        for (size_t i = 0; i < n; ++i)
          for (size_t j = 0; j < w; ++j) dp.data[i * w + j] = gr.data[i * total + off + j];
        g.accumulate(p, dp);
        off += w;
      }
    });
  }

  // ---- nonlinearities ----

  NodeId gelu(NodeId a) {
    Array<T> out = nodes_[a].value;
    for (T& v : out.data) {
      double x = static_cast<double>(v);
      v = static_cast<T>(0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))));
    }
    return make_node(std::move(out), {a}, [a](Graph& g, NodeId self) {
      const Array<T>& gr = g.nodes_[self].grad;
      const Array<T>& av = g.nodes_[a].value;
      Array<T> da = gr;
      for (size_t i = 0; i < da.numel(); ++i) {
        double x = static_cast<double>(av.data[i]);
        double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
        double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
        da.data[i] = static_cast<T>(static_cast<double>(gr.data[i]) * (cdf + x * phi));
      }
      g.accumulate(a, da);
    });
  }

  NodeId softmax_rows(NodeId a) {
    const Array<T>& av = nodes_[a].value;
    const size_t n = av.dim(0), d = av.dim(1);
    Array<T> out = Array<T>::zeros({n, d});
    for (size_t i = 0; i < n; ++i) {
      T mx = av.data[i * d];
      for (size_t j = 1; j < d; ++j) mx = std::max(mx, av.data[i * d + j]);
      T sum = T(0);
      for (size_t j = 0; j < d; ++j) {
        T e = std::exp(av.data[i * d + j] - mx);
        out.data[i * d + j] = e;
        sum += e;
      }
      for (size_t j = 0; j < d; ++j) out.data[i * d + j] /= sum;
    }
    return make_node(std::move(out), {a}, [a](Graph& g, NodeId self) {
      const Array<T>& gr = g.nodes_[self].grad;
      const Array<T>& y = g.nodes_[self].value;
      const size_t n = y.dim(0), d = y.dim(1);
      Array<T> da = Array<T>::zeros({n, d});
      for (size_t i = 0; i < n; ++i) {
        T dot = T(0);
        for (size_t j = 0; j < d; ++j) dot += gr.data[i * d + j] * y.data[i * d + j];
        for (size_t j = 0; j < d; ++j)
          da.data[i * d + j] = y.data[i * d + j] * (gr.data[i * d + j] - dot);
      }
      g.accumulate(a, da);
    });
  }

  /// Row-wise layer normalization over the last dimension with affine
  /// parameters gamma and beta.
  NodeId layernorm(NodeId x, NodeId gamma, NodeId beta, double eps = 1e-6) {
    const Array<T>& xv = nodes_[x].value;
    const size_t n = xv.dim(0), d = xv.dim(1);
    if (nodes_[gamma].value.numel() != d || nodes_[beta].value.numel() != d)
      throw NumericError("layernorm: affine dims mismatch");
    Array<T> out = Array<T>::zeros({n, d});
    for (size_t i = 0; i < n; ++i) {
      T mean = T(0);
      for (size_t j = 0; j < d; ++j) mean += xv.data[i * d + j];
      mean /= static_cast<T>(d);
      T var = T(0);
      for (size_t j = 0; j < d; ++j) {
        T c = xv.data[i * d + j] - mean;
        var += c * c;
      }
      var /= static_cast<T>(d);
      T inv_std = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var) + eps));
      for (size_t j = 0; j < d; ++j) {
        T xhat = (xv.data[i * d + j] - mean) * inv_std;
        out.data[i * d + j] = xhat * nodes_[gamma].value.data[j] + nodes_[beta].value.data[j];
      }
    }
    return make_node(std::move(out), {x, gamma, beta},
                     [x, gamma, beta, eps](Graph& g, NodeId self) {
      const Array<T>& gr = g.nodes_[self].grad;
      const Array<T>& xv = g.nodes_[x].value;
      const Array<T>& gv = g.nodes_[gamma].value;
      const size_t n = xv.dim(0), d = xv.dim(1);
      Array<T> dx = Array<T>::zeros({n, d});
      Array<T> dgamma = Array<T>::zeros({d});
      Array<T> dbeta = Array<T>::zeros({d});
      for (size_t i = 0; i < n; ++i) {
        T mean = T(0);
        for (size_t j = 0; j < d; ++j) mean += xv.data[i * d + j];
        mean /= static_cast<T>(d);
        T var = T(0);
        for (size_t j = 0; j < d; ++j) {
          T c = xv.data[i * d + j] - mean;
          var += c * c;
        }
        var /= static_cast<T>(d);
        T inv_std = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var) + eps));
        // dxhat, plus the two row means needed for the layernorm VJP
        T mean_dxhat = T(0), mean_dxhat_xhat = T(0);
        for (size_t j = 0; j < d; ++j) {
          T xhat = (xv.data[i * d + j] - mean) * inv_std;
          T dxhat = gr.data[i * d + j] * gv.data[j];
          dgamma.data[j] += gr.data[i * d + j] * xhat;
          dbeta.data[j] += gr.data[i * d + j];
          mean_dxhat += dxhat;
          mean_dxhat_xhat += dxhat * xhat;
        }
        mean_dxhat /= static_cast<T>(d);
        mean_dxhat_xhat /= static_cast<T>(d);
        for (size_t j = 0; j < d; ++j) {
          T xhat = (xv.data[i * d + j] - mean) * inv_std;
          T dxhat = gr.data[i * d + j] * gv.data[j];
          dx.data[i * d + j] = (dxhat - mean_dxhat - xhat * mean_dxhat_xhat) * inv_std;
        }
      }
      g.accumulate(x, dx);
      g.accumulate(gamma, dgamma);
      g.accumulate(beta, dbeta);
    });
  }

  // ---- reductions / losses (all scalar-valued) ----

  NodeId sum_all(NodeId a) {
    T total = T(0);
    for (T v : nodes_[a].value.data) total += v;
    return make_node(Array<T>({1}, {total}), {a}, [a](Graph& g, NodeId self) {
      T gr = g.nodes_[self].grad.data[0];
      Array<T> da = Array<T>::full(g.nodes_[a].value.shape, gr);
      g.accumulate(a, da);
    });
  }

  NodeId mean_scalars(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw NumericError("mean_scalars: no parts");
    T total = T(0);
    for (NodeId p : parts) {
      if (nodes_[p].value.numel() != 1) throw NumericError("mean_scalars: non-scalar part");
      total += nodes_[p].value.data[0];
    }
    total /= static_cast<T>(parts.size());
    std::vector<NodeId> parents = parts;
    return make_node(Array<T>({1}, {total}), parents, [parents](Graph& g, NodeId self) {
      T gr = g.nodes_[self].grad.data[0] / static_cast<T>(parents.size());
      for (NodeId p : parents) g.accumulate(p, Array<T>({1}, {gr}));
    });
  }

  /// Row-averaged KL(target || softmax(logits)) against constant target
  /// probabilities. The student side goes through log-softmax of the raw
  /// scores; target probabilities are floored at 1e-12 inside their own log
  /// and rows of the target must already be stochastic.
  NodeId kl_vs_target_rows(NodeId logits, NodeId target) {
    const Array<T>& lv = nodes_[logits].value;
    const Array<T>& tv = nodes_[target].value;
    if (lv.shape != tv.shape) throw NumericError("kl_vs_target_rows: shape mismatch");
    const size_t n = lv.dim(0), d = lv.dim(1);
    Array<T> ls = log_softmax_rows(lv);
    double total = 0.0;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < d; ++j) {
        double t = static_cast<double>(tv.data[i * d + j]);
        if (t > 0.0)
          total += t * (std::log(std::max(t, 1e-12)) - static_cast<double>(ls.data[i * d + j]));
      }
    total /= static_cast<double>(n);
    return make_node(Array<T>({1}, {static_cast<T>(total)}), {logits, target},
                     [logits, target](Graph& g, NodeId self) {
      T gr = g.nodes_[self].grad.data[0];
      const Array<T>& lv = g.nodes_[logits].value;
      const Array<T>& tv = g.nodes_[target].value;
      const size_t n = lv.dim(0), d = lv.dim(1);
      Array<T> soft = softmax_of(lv);
      Array<T> da = Array<T>::zeros({n, d});
      T inv_n = static_cast<T>(1.0 / static_cast<double>(n));
      for (size_t i = 0; i < n * d; ++i)
        da.data[i] = gr * (soft.data[i] - tv.data[i]) * inv_n;
      g.accumulate(logits, da);
    });
  }

  /// Token-averaged (1 - cosine) between rows of `features` and rows of the
  /// constant target, both L2-normalized. Zero-norm rows are an error.
  NodeId cosine_distance_rows(NodeId features, NodeId target) {
    const Array<T>& sv = nodes_[features].value;
    const Array<T>& tv = nodes_[target].value;
    if (sv.shape != tv.shape) throw NumericError("cosine_distance_rows: shape mismatch");
    const size_t n = sv.dim(0), d = sv.dim(1);
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double ns = 0.0, nt = 0.0, dot = 0.0;
      for (size_t j = 0; j < d; ++j) {
        double s = sv.data[i * d + j], t = tv.data[i * d + j];
        ns += s * s;
        nt += t * t;
        dot += s * t;
      }
      if (ns <= 0.0 || nt <= 0.0)
        throw NumericError("cosine_distance_rows: zero-norm token vector at row " +
                           std::to_string(i));
      total += 1.0 - dot / (std::sqrt(ns) * std::sqrt(nt));
    }
    total /= static_cast<double>(n);
    return make_node(Array<T>({1}, {static_cast<T>(total)}), {features, target},
                     [features, target](Graph& g, NodeId self) {
      T gr = g.nodes_[self].grad.data[0];
      const Array<T>& sv = g.nodes_[features].value;
      const Array<T>& tv = g.nodes_[target].value;
      const size_t n = sv.dim(0), d = sv.dim(1);
      Array<T> da = Array<T>::zeros({n, d});
      for (size_t i = 0; i < n; ++i) {
        double ns = 0.0, nt = 0.0, dot = 0.0;
        for (size_t j = 0; j < d; ++j) {
          double s = sv.data[i * d + j], t = tv.data[i * d + j];
          ns += s * s;
          nt += t * t;
          dot += s * t;
        }
        double inv_ns = 1.0 / std::sqrt(ns), inv_nt = 1.0 / std::sqrt(nt);
        double cos_i = dot * inv_ns * inv_nt;
        // d(1 - cos)/ds = -(t_hat - cos * s_hat) / ||s||
        for (size_t j = 0; j < d; ++j) {
          double s_hat = sv.data[i * d + j] * inv_ns;
          double t_hat = tv.data[i * d + j] * inv_nt;
          da.data[i * d + j] = static_cast<T>(-static_cast<double>(gr) *
                                              (t_hat - cos_i * s_hat) * inv_ns /
                                              static_cast<double>(n));
        }
      }
      g.accumulate(features, da);
    });
  }

  /// Row-averaged softmax cross entropy against integer class labels.
  NodeId softmax_xent_rows(NodeId logits, const std::vector<size_t>& labels) {
    const Array<T>& lv = nodes_[logits].value;
    const size_t n = lv.dim(0), d = lv.dim(1);
    if (labels.size() != n) throw NumericError("softmax_xent_rows: label count mismatch");
    Array<T> ls = log_softmax_rows(lv);
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
      if (labels[i] >= d) throw NumericError("softmax_xent_rows: label out of range");
      total -= static_cast<double>(ls.data[i * d + labels[i]]);
    }
    total /= static_cast<double>(n);
    std::vector<size_t> copy = labels;
    return make_node(Array<T>({1}, {static_cast<T>(total)}), {logits},
                     [logits, copy](Graph& g, NodeId self) {
      T gr = g.nodes_[self].grad.data[0];
      const Array<T>& lv = g.nodes_[logits].value;
      const size_t n = lv.dim(0), d = lv.dim(1);
      Array<T> soft = softmax_of(lv);
      T inv_n = static_cast<T>(1.0 / static_cast<double>(n));
      Array<T> da = Array<T>::zeros({n, d});
      for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j) {
          T onehot = (j == copy[i]) ? T(1) : T(0);
          da.data[i * d + j] = gr * (soft.data[i * d + j] - onehot) * inv_n;
        }
      g.accumulate(logits, da);
    });
  }

  /// Reverse sweep from a scalar root. Node ids above the root are ignored.
  void backward(NodeId root) {
    Node& r = nodes_[root];
    if (r.value.numel() != 1) throw NumericError("backward: root must be scalar");
    if (!std::isfinite(static_cast<double>(r.value.data[0])))
      throw NumericError("backward: non-finite loss");
    r.grad = Array<T>::full(r.value.shape, T(1));
    for (NodeId id = root; id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.grad.data.empty() || !n.backward) continue;
      n.backward(*this, id);
    }
  }

private:
  std::vector<Node> nodes_;

  void check_same_shape(NodeId a, NodeId b, const char* op) const {
    if (nodes_[a].value.shape != nodes_[b].value.shape)
      throw NumericError(std::string(op) + ": shape mismatch");
  }

  NodeId make_node(Array<T> value, const std::vector<NodeId>& parents,
                   std::function<void(Graph&, NodeId)> backward) {
    bool needs = false;
    for (NodeId p : parents) needs = needs || nodes_[p].needs_grad;
    nodes_.push_back(Node{std::move(value), {}, needs,
                          needs ? std::move(backward) : nullptr});
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  void accumulate(NodeId id, const Array<T>& contribution) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.data.empty()) n.grad = Array<T>::zeros(n.value.shape);
    if (n.grad.shape != contribution.shape)
      throw NumericError("gradient shape mismatch during accumulation");
    for (size_t i = 0; i < contribution.numel(); ++i) n.grad.data[i] += contribution.data[i];
  }

  static Array<T> log_softmax_rows(const Array<T>& x) {
    const size_t n = x.dim(0), d = x.dim(1);
    Array<T> out = Array<T>::zeros({n, d});
    for (size_t i = 0; i < n; ++i) {
      T mx = x.data[i * d];
      for (size_t j = 1; j < d; ++j) mx = std::max(mx, x.data[i * d + j]);
      double sum = 0.0;
      for (size_t j = 0; j < d; ++j) sum += std::exp(static_cast<double>(x.data[i * d + j] - mx));
      T lse = mx + static_cast<T>(std::log(sum));
      for (size_t j = 0; j < d; ++j) out.data[i * d + j] = x.data[i * d + j] - lse;
    }
    return out;
  }

  static Array<T> softmax_of(const Array<T>& x) {
    Array<T> ls = log_softmax_rows(x);
    for (T& v : ls.data) v = std::exp(v);
    return ls;
  }
};

}  // namespace attnkit

#endif  // ATTNKIT_AUTOGRAD_HPP
