#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "sgltn/rng.hpp"
#include "sgltn/tensor.hpp"

namespace sgltn {

// Reverse-mode tape. Nodes are recorded in topological order (inputs before
// consumers). Each node stores its forward value, a replayable forward rule
// and a backward rule. The tape is single-threaded during record/backward.
class Tape {
 public:
  using Id = int;

  struct BackwardCtx {
    const Tensor& out;
    const std::vector<double>& gout;
    const std::vector<const Tensor*>& in;
    // nullptr where the input does not require grad
    const std::vector<std::vector<double>*>& gin;
  };
  using ForwardFn = std::function<Tensor(const std::vector<const Tensor*>&)>;
  using BackwardFn = std::function<void(const BackwardCtx&)>;

  Id leaf(Tensor t) {
    bool rg = t.requires_grad;
    nodes_.push_back(Node{std::move(t), {}, {}, nullptr, nullptr, rg, "leaf"});
    return Id(nodes_.size()) - 1;
  }

  // Records an op, evaluating it immediately. `fwd` must be a pure function
  // of the input values so replay() reproduces the same result.
  Id record(const char* name, std::vector<Id> inputs, ForwardFn fwd, BackwardFn bwd) {
    std::vector<const Tensor*> in;
    in.reserve(inputs.size());
    bool rg = false;
    for (Id i : inputs) {
      check(i >= 0 && i < Id(nodes_.size()), std::string(name) + ": bad input id");
      in.push_back(&nodes_[std::size_t(i)].value);
      rg = rg || nodes_[std::size_t(i)].requires_grad;
    }
    Tensor out = fwd(in);
    nodes_.push_back(Node{std::move(out), {}, std::move(inputs), std::move(fwd), std::move(bwd), rg, name});
    return Id(nodes_.size()) - 1;
  }

  const Tensor& value(Id id) const { return node(id).value; }
  bool requires_grad(Id id) const { return node(id).requires_grad; }
  const char* op_name(Id id) const { return node(id).name; }
  int size() const { return int(nodes_.size()); }

  // Accumulated leaf gradient as a tensor (zeros before backward; only
  // leaves retain gradients).
  Tensor grad(Id id) const {
    const Node& n = node(id);
    Tensor g = Tensor::zeros(n.value.shape);
    if (!n.grad.empty()) g.data = n.grad;
    return g;
  }

  void zero_grad() {
    for (auto& n : nodes_) {
      n.grad.clear();
      n.value.grad.reset();
    }
  }

  // Mutates a leaf value in place (same shape). Used by replay-style updates
  // and by finite-difference probes.
  void set_leaf(Id id, const Tensor& t) {
    Node& n = node(id);
    check(n.inputs.empty() && !n.forward, "set_leaf: node is not a leaf");
    check(n.value.shape == t.shape, "set_leaf: shape mismatch");
    n.value.data = t.data;
  }

  // Recomputes every non-leaf value in recording order.
  void replay() {
    std::vector<const Tensor*> in;
    for (auto& n : nodes_) {
      if (!n.forward) continue;
      in.clear();
      for (Id j : n.inputs) in.push_back(&nodes_[std::size_t(j)].value);
      n.value = n.forward(in);
    }
  }

  // Reverse accumulation from a scalar root. Leaf grads accumulate across
  // repeated calls until zero_grad().
  void backward(Id root) {
    const Node& r = node(root);
    check(r.value.numel() == 1, "backward: root must be scalar, got shape " +
                                    Tensor::shape_str(r.value.shape));
    std::vector<std::vector<double>> adj(nodes_.size());
    adj[std::size_t(root)].assign(1, 1.0);
    std::vector<const Tensor*> in;
    std::vector<std::vector<double>*> gin;
    for (Id i = root; i >= 0; --i) {
      Node& n = nodes_[std::size_t(i)];
      auto& a = adj[std::size_t(i)];
      if (a.empty() || !n.requires_grad) continue;
      if (n.inputs.empty()) {  // persistent grads live on leaves
        if (n.grad.empty()) n.grad.assign(n.value.numel(), 0.0);
        for (std::size_t k = 0; k < a.size(); ++k) n.grad[k] += a[k];
        n.value.grad = n.grad;  // the leaf tensor itself carries its grad
      }
      if (!n.backward) continue;
      in.clear();
      gin.clear();
      for (Id j : n.inputs) {
        Node& m = nodes_[std::size_t(j)];
        in.push_back(&m.value);
        if (m.requires_grad) {
          auto& aj = adj[std::size_t(j)];
          if (aj.empty()) aj.assign(m.value.numel(), 0.0);
          gin.push_back(&aj);
        } else {
          gin.push_back(nullptr);
        }
      }
      n.backward(BackwardCtx{n.value, a, in, gin});
      a.clear();  // free as we go; large activations dominate memory
    }
  }

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;  // persistent, accumulated across backward calls
    std::vector<Id> inputs;
    ForwardFn forward;
    BackwardFn backward;
    bool requires_grad = false;
    const char* name = "";
  };

  Node& node(Id id) {
    check(id >= 0 && id < Id(nodes_.size()), "tape: bad node id");
    return nodes_[std::size_t(id)];
  }
  const Node& node(Id id) const {
    check(id >= 0 && id < Id(nodes_.size()), "tape: bad node id");
    return nodes_[std::size_t(id)];
  }

  std::vector<Node> nodes_;
};

inline Tape::Id constant(Tape& tp, double v) { return tp.leaf(Tensor::scalar(v)); }

namespace detail {

// 0: same shape, 1: a is scalar, 2: b is scalar
inline int broadcast_mode(const Tensor& a, const Tensor& b, const char* op) {
  if (a.same_shape(b)) return 0;
  if (a.numel() == 1) return 1;
  if (b.numel() == 1) return 2;
  throw Error(std::string(op) + ": shape mismatch " + Tensor::shape_str(a.shape) +
              " vs " + Tensor::shape_str(b.shape) + " (only scalar broadcast)");
}

template <typename F>
Tensor ew_binary(const Tensor& a, const Tensor& b, int mode, F f) {
  const Tensor& shaped = (mode == 1) ? b : a;
  Tensor out = Tensor::zeros(shaped.shape);
  std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) {
    double av = (mode == 1) ? a.data[0] : a.data[i];
    double bv = (mode == 2) ? b.data[0] : b.data[i];
    out.data[i] = f(av, bv);
  }
  return out;
}

// accumulate dL/da for a broadcast-aware binary op; fa(i) is the local
// partial w.r.t. a at flat element i of the output
template <typename F>
void ew_accumulate(std::vector<double>* g, int mode_is_scalar, std::size_t n, F fa) {
  if (!g) return;
  if (mode_is_scalar) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += fa(i);
    (*g)[0] += s;
  } else {
    for (std::size_t i = 0; i < n; ++i) (*g)[i] += fa(i);
  }
}

}  // namespace detail

inline Tape::Id add(Tape& tp, Tape::Id a, Tape::Id b) {
  return tp.record(
      "add", {a, b},
      [](const std::vector<const Tensor*>& in) {
        int m = detail::broadcast_mode(*in[0], *in[1], "add");
        return detail::ew_binary(*in[0], *in[1], m, [](double x, double y) { return x + y; });
      },
      [](const Tape::BackwardCtx& c) {
        int m = detail::broadcast_mode(*c.in[0], *c.in[1], "add");
        std::size_t n = c.out.numel();
        detail::ew_accumulate(c.gin[0], m == 1, n, [&](std::size_t i) { return c.gout[i]; });
        detail::ew_accumulate(c.gin[1], m == 2, n, [&](std::size_t i) { return c.gout[i]; });
      });
}

inline Tape::Id sub(Tape& tp, Tape::Id a, Tape::Id b) {
  return tp.record(
      "sub", {a, b},
      [](const std::vector<const Tensor*>& in) {
        int m = detail::broadcast_mode(*in[0], *in[1], "sub");
        return detail::ew_binary(*in[0], *in[1], m, [](double x, double y) { return x - y; });
      },
      [](const Tape::BackwardCtx& c) {
        int m = detail::broadcast_mode(*c.in[0], *c.in[1], "sub");
        std::size_t n = c.out.numel();
        detail::ew_accumulate(c.gin[0], m == 1, n, [&](std::size_t i) { return c.gout[i]; });
        detail::ew_accumulate(c.gin[1], m == 2, n, [&](std::size_t i) { return -c.gout[i]; });
      });
}

inline Tape::Id mul(Tape& tp, Tape::Id a, Tape::Id b) {
  return tp.record(
      "mul", {a, b},
      [](const std::vector<const Tensor*>& in) {
        int m = detail::broadcast_mode(*in[0], *in[1], "mul");
        return detail::ew_binary(*in[0], *in[1], m, [](double x, double y) { return x * y; });
      },
      [](const Tape::BackwardCtx& c) {
        const Tensor& a = *c.in[0];
        const Tensor& b = *c.in[1];
        int m = detail::broadcast_mode(a, b, "mul");
        std::size_t n = c.out.numel();
        auto av = [&](std::size_t i) { return m == 1 ? a.data[0] : a.data[i]; };
        auto bv = [&](std::size_t i) { return m == 2 ? b.data[0] : b.data[i]; };
        detail::ew_accumulate(c.gin[0], m == 1, n, [&](std::size_t i) { return c.gout[i] * bv(i); });
        detail::ew_accumulate(c.gin[1], m == 2, n, [&](std::size_t i) { return c.gout[i] * av(i); });
      });
}

inline Tape::Id div(Tape& tp, Tape::Id a, Tape::Id b) {
  return tp.record(
      "div", {a, b},
      [](const std::vector<const Tensor*>& in) {
        for (double v : in[1]->data)
          if (v == 0.0) throw Error("div: division by zero");
        int m = detail::broadcast_mode(*in[0], *in[1], "div");
        return detail::ew_binary(*in[0], *in[1], m, [](double x, double y) { return x / y; });
      },
      [](const Tape::BackwardCtx& c) {
        const Tensor& a = *c.in[0];
        const Tensor& b = *c.in[1];
        int m = detail::broadcast_mode(a, b, "div");
        std::size_t n = c.out.numel();
        auto av = [&](std::size_t i) { return m == 1 ? a.data[0] : a.data[i]; };
        auto bv = [&](std::size_t i) { return m == 2 ? b.data[0] : b.data[i]; };
        detail::ew_accumulate(c.gin[0], m == 1, n, [&](std::size_t i) { return c.gout[i] / bv(i); });
        detail::ew_accumulate(c.gin[1], m == 2, n,
                              [&](std::size_t i) { return -c.gout[i] * av(i) / (bv(i) * bv(i)); });
      });
}

inline Tape::Id pow_const(Tape& tp, Tape::Id a, double exponent) {
  return tp.record(
      "pow_const", {a},
      [exponent](const std::vector<const Tensor*>& in) {
        Tensor out = Tensor::zeros(in[0]->shape);
        for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = std::pow(in[0]->data[i], exponent);
        return out;
      },
      [exponent](const Tape::BackwardCtx& c) {
        if (!c.gin[0]) return;
        for (std::size_t i = 0; i < c.out.numel(); ++i)
          (*c.gin[0])[i] += c.gout[i] * exponent * std::pow(c.in[0]->data[i], exponent - 1.0);
      });
}

inline Tape::Id log(Tape& tp, Tape::Id a) {
  return tp.record(
      "log", {a},
      [](const std::vector<const Tensor*>& in) {
        Tensor out = Tensor::zeros(in[0]->shape);
        for (std::size_t i = 0; i < out.numel(); ++i) {
          if (in[0]->data[i] <= 0.0) throw Error("log: non-positive input");
          out.data[i] = std::log(in[0]->data[i]);
        }
        return out;
      },
      [](const Tape::BackwardCtx& c) {
        if (!c.gin[0]) return;
        for (std::size_t i = 0; i < c.out.numel(); ++i)
          (*c.gin[0])[i] += c.gout[i] / c.in[0]->data[i];
      });
}

// Gradient passes only strictly inside (lo, hi); at the kinks it is 0.
inline Tape::Id clamp(Tape& tp, Tape::Id a, double lo, double hi) {
  check(lo <= hi, "clamp: lo > hi");
  return tp.record(
      "clamp", {a},
      [lo, hi](const std::vector<const Tensor*>& in) {
        Tensor out = Tensor::zeros(in[0]->shape);
        for (std::size_t i = 0; i < out.numel(); ++i)
          out.data[i] = std::min(hi, std::max(lo, in[0]->data[i]));
        return out;
      },
      [lo, hi](const Tape::BackwardCtx& c) {
        if (!c.gin[0]) return;
        for (std::size_t i = 0; i < c.out.numel(); ++i) {
          double x = c.in[0]->data[i];
          if (x > lo && x < hi) (*c.gin[0])[i] += c.gout[i];
        }
      });
}

// max(x, k) elementwise; gradient at x == k is 0 (so relu'(0) == 0).
inline Tape::Id max_const(Tape& tp, Tape::Id a, double k) {
  return tp.record(
      "max_const", {a},
      [k](const std::vector<const Tensor*>& in) {
        Tensor out = Tensor::zeros(in[0]->shape);
        for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = std::max(k, in[0]->data[i]);
        return out;
      },
      [k](const Tape::BackwardCtx& c) {
        if (!c.gin[0]) return;
        for (std::size_t i = 0; i < c.out.numel(); ++i)
          if (c.in[0]->data[i] > k) (*c.gin[0])[i] += c.gout[i];
      });
}

inline Tape::Id matmul(Tape& tp, Tape::Id a, Tape::Id b) {
  return tp.record(
      "matmul", {a, b},
      [](const std::vector<const Tensor*>& in) {
        const Tensor& a = *in[0];
        const Tensor& b = *in[1];
        check(a.rank() == 2 && b.rank() == 2, "matmul: operands must be matrices");
        check(a.cols() == b.rows(), "matmul: inner dimensions " + Tensor::shape_str(a.shape) +
                                        " x " + Tensor::shape_str(b.shape));
        int r = a.rows(), k = a.cols(), c = b.cols();
        Tensor out = Tensor::zeros({r, c});
        for (int i = 0; i < r; ++i) {
          double* orow = &out.data[std::size_t(i) * std::size_t(c)];
          const double* arow = &a.data[std::size_t(i) * std::size_t(k)];
          for (int p = 0; p < k; ++p) {
            double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = &b.data[std::size_t(p) * std::size_t(c)];
            for (int j = 0; j < c; ++j) orow[j] += av * brow[j];
          }
        }
        return out;
      },
      [](const Tape::BackwardCtx& c) {
        const Tensor& a = *c.in[0];
        const Tensor& b = *c.in[1];
        int r = a.rows(), k = a.cols(), cc = b.cols();
        if (c.gin[0]) {
          // dA = G * B^T
          for (int i = 0; i < r; ++i) {
            const double* grow = &c.gout[std::size_t(i) * std::size_t(cc)];
            double* garow = &(*c.gin[0])[std::size_t(i) * std::size_t(k)];
            for (int p = 0; p < k; ++p) {
              const double* brow = &b.data[std::size_t(p) * std::size_t(cc)];
              double s = 0.0;
              for (int j = 0; j < cc; ++j) s += grow[j] * brow[j];
              garow[p] += s;
            }
          }
        }
        if (c.gin[1]) {
          // dB = A^T * G
          for (int i = 0; i < r; ++i) {
            const double* arow = &a.data[std::size_t(i) * std::size_t(k)];
            const double* grow = &c.gout[std::size_t(i) * std::size_t(cc)];
            for (int p = 0; p < k; ++p) {
              double av = arow[p];
              if (av == 0.0) continue;
              double* gbrow = &(*c.gin[1])[std::size_t(p) * std::size_t(cc)];
              for (int j = 0; j < cc; ++j) gbrow[j] += av * grow[j];
            }
          }
        }
      });
}

inline Tape::Id transpose(Tape& tp, Tape::Id a) {
  return tp.record(
      "transpose", {a},
      [](const std::vector<const Tensor*>& in) {
        const Tensor& a = *in[0];
        check(a.rank() == 2, "transpose: operand must be a matrix");
        Tensor out = Tensor::zeros({a.cols(), a.rows()});
        for (int i = 0; i < a.rows(); ++i)
          for (int j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
        return out;
      },
      [](const Tape::BackwardCtx& c) {
        if (!c.gin[0]) return;
        int r = c.in[0]->rows(), cc = c.in[0]->cols();
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < cc; ++j)
            (*c.gin[0])[std::size_t(i) * std::size_t(cc) + std::size_t(j)] +=
                c.gout[std::size_t(j) * std::size_t(r) + std::size_t(i)];
      });
}

// Row softmax with max-subtraction.
inline Tape::Id softmax_rows(Tape& tp, Tape::Id a) {
  return tp.record(
      "softmax_rows", {a},
      [](const std::vector<const Tensor*>& in) {
        const Tensor& a = *in[0];
        check(a.rank() == 2, "softmax_rows: operand must be a matrix");
        check(a.all_finite(), "softmax_rows: non-finite input");
        Tensor out = Tensor::zeros(a.shape);
        int r = a.rows(), c = a.cols();
        for (int i = 0; i < r; ++i) {
          double mx = -std::numeric_limits<double>::infinity();
          for (int j = 0; j < c; ++j) mx = std::max(mx, a.at(i, j));
          double s = 0.0;
          for (int j = 0; j < c; ++j) {
            out.at(i, j) = std::exp(a.at(i, j) - mx);
            s += out.at(i, j);
          }
          for (int j = 0; j < c; ++j) out.at(i, j) /= s;
        }
        return out;
      },
      [](const Tape::BackwardCtx& c) {
        if (!c.gin[0]) return;
        int r = c.out.rows(), cc = c.out.cols();
        for (int i = 0; i < r; ++i) {
          const double* y = &c.out.data[std::size_t(i) * std::size_t(cc)];
          const double* g = &c.gout[std::size_t(i) * std::size_t(cc)];
          double dot = 0.0;
          for (int j = 0; j < cc; ++j) dot += y[j] * g[j];
          double* gi = &(*c.gin[0])[std::size_t(i) * std::size_t(cc)];
          for (int j = 0; j < cc; ++j) gi[j] += y[j] * (g[j] - dot);
        }
      });
}

// Fused ReLU followed by inverted dropout. In eval mode dropout is exactly
// the identity; in training mode the mask is drawn once, at record time,
// from the given seed, so replay() reuses the same mask.
inline Tape::Id relu_dropout(Tape& tp, Tape::Id a, double p, bool training, std::uint64_t seed) {
  check(p >= 0.0 && p < 1.0, "relu_dropout: p must be in [0, 1)");
  std::size_t n = tp.value(a).numel();
  std::vector<double> mask;
  if (training && p > 0.0) {
    mask.resize(n);
    Rng rng(seed);
    double scale = 1.0 / (1.0 - p);
    for (std::size_t i = 0; i < n; ++i) mask[i] = (rng.uniform() < p) ? 0.0 : scale;
  }
  return tp.record(
      "relu_dropout", {a},
      [mask](const std::vector<const Tensor*>& in) {
        Tensor out = Tensor::zeros(in[0]->shape);
        for (std::size_t i = 0; i < out.numel(); ++i) {
          double v = std::max(0.0, in[0]->data[i]);
          out.data[i] = mask.empty() ? v : v * mask[i];
        }
        return out;
      },
      [mask](const Tape::BackwardCtx& c) {
        if (!c.gin[0]) return;
        for (std::size_t i = 0; i < c.out.numel(); ++i) {
          if (c.in[0]->data[i] > 0.0)
            (*c.gin[0])[i] += c.gout[i] * (mask.empty() ? 1.0 : mask[i]);
        }
      });
}

// Reduce all elements to a scalar.
inline Tape::Id sum(Tape& tp, Tape::Id a) {
  return tp.record(
      "sum", {a},
      [](const std::vector<const Tensor*>& in) {
        double s = 0.0;
        for (double v : in[0]->data) s += v;
        return Tensor::scalar(s);
      },
      [](const Tape::BackwardCtx& c) {
        if (!c.gin[0]) return;
        for (std::size_t i = 0; i < c.in[0]->numel(); ++i) (*c.gin[0])[i] += c.gout[0];
      });
}

// {r, c} -> {r, 1}
inline Tape::Id row_sums(Tape& tp, Tape::Id a) {
  return tp.record(
      "row_sums", {a},
      [](const std::vector<const Tensor*>& in) {
        const Tensor& a = *in[0];
        check(a.rank() == 2, "row_sums: operand must be a matrix");
        Tensor out = Tensor::zeros({a.rows(), 1});
        for (int i = 0; i < a.rows(); ++i) {
          double s = 0.0;
          for (int j = 0; j < a.cols(); ++j) s += a.at(i, j);
          out.data[std::size_t(i)] = s;
        }
        return out;
      },
      [](const Tape::BackwardCtx& c) {
        if (!c.gin[0]) return;
        int r = c.in[0]->rows(), cc = c.in[0]->cols();
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < cc; ++j)
            (*c.gin[0])[std::size_t(i) * std::size_t(cc) + std::size_t(j)] += c.gout[std::size_t(i)];
      });
}

inline Tape::Id gather_rows(Tape& tp, Tape::Id a, std::vector<int> idx) {
  {
    const Tensor& v = tp.value(a);
    check(v.rank() == 2, "gather_rows: operand must be a matrix");
    for (int i : idx)
      if (i < 0 || i >= v.rows())
        throw Error("gather_rows: row index " + std::to_string(i) + " out of range");
  }
  return tp.record(
      "gather_rows", {a},
      [idx](const std::vector<const Tensor*>& in) {
        const Tensor& a = *in[0];
        int c = a.cols();
        Tensor out = Tensor::zeros({int(idx.size()), c});
        for (std::size_t i = 0; i < idx.size(); ++i)
          for (int j = 0; j < c; ++j) out.data[i * std::size_t(c) + std::size_t(j)] = a.at(idx[i], j);
        return out;
      },
      [idx](const Tape::BackwardCtx& c) {
        if (!c.gin[0]) return;
        int cc = c.in[0]->cols();
        for (std::size_t i = 0; i < idx.size(); ++i)
          for (int j = 0; j < cc; ++j)
            (*c.gin[0])[std::size_t(idx[i]) * std::size_t(cc) + std::size_t(j)] +=
                c.gout[i * std::size_t(cc) + std::size_t(j)];
      });
}

// out[idx[i], :] += a[i, :]
inline Tape::Id scatter_add_rows(Tape& tp, Tape::Id a, std::vector<int> idx, int num_rows) {
  {
    const Tensor& v = tp.value(a);
    check(v.rank() == 2, "scatter_add_rows: operand must be a matrix");
    check(int(idx.size()) == v.rows(), "scatter_add_rows: index count != rows");
    for (int i : idx)
      if (i < 0 || i >= num_rows)
        throw Error("scatter_add_rows: row index " + std::to_string(i) + " out of range");
  }
  return tp.record(
      "scatter_add_rows", {a},
      [idx, num_rows](const std::vector<const Tensor*>& in) {
        const Tensor& a = *in[0];
        int c = a.cols();
        Tensor out = Tensor::zeros({num_rows, c});
        for (std::size_t i = 0; i < idx.size(); ++i)
          for (int j = 0; j < c; ++j)
            out.data[std::size_t(idx[i]) * std::size_t(c) + std::size_t(j)] +=
                a.data[i * std::size_t(c) + std::size_t(j)];
        return out;
      },
      [idx](const Tape::BackwardCtx& c) {
        if (!c.gin[0]) return;
        int cc = c.in[0]->cols();
        for (std::size_t i = 0; i < idx.size(); ++i)
          for (int j = 0; j < cc; ++j)
            (*c.gin[0])[i * std::size_t(cc) + std::size_t(j)] +=
                c.gout[std::size_t(idx[i]) * std::size_t(cc) + std::size_t(j)];
      });
}

// Softmax within segments of a vector ({n} or {n, 1}); entries sharing a
// segment id normalize together. Used for attention over in-neighborhoods.
inline Tape::Id segment_softmax(Tape& tp, Tape::Id a, std::vector<int> seg, int num_segments) {
  {
    const Tensor& v = tp.value(a);
    check(v.rank() == 1 || (v.rank() == 2 && v.cols() == 1), "segment_softmax: operand must be a vector");
    check(seg.size() == v.numel(), "segment_softmax: segment count != elements");
    for (int s : seg)
      if (s < 0 || s >= num_segments) throw Error("segment_softmax: segment id out of range");
  }
  return tp.record(
      "segment_softmax", {a},
      [seg, num_segments](const std::vector<const Tensor*>& in) {
        const Tensor& a = *in[0];
        std::size_t n = a.numel();
        Tensor out = Tensor::zeros(a.shape);
        std::vector<double> mx(std::size_t(num_segments), -std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < n; ++i)
          mx[std::size_t(seg[i])] = std::max(mx[std::size_t(seg[i])], a.data[i]);
        std::vector<double> sums(std::size_t(num_segments), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          out.data[i] = std::exp(a.data[i] - mx[std::size_t(seg[i])]);
          sums[std::size_t(seg[i])] += out.data[i];
        }
        for (std::size_t i = 0; i < n; ++i) out.data[i] /= sums[std::size_t(seg[i])];
        return out;
      },
      [seg, num_segments](const Tape::BackwardCtx& c) {
        if (!c.gin[0]) return;
        std::size_t n = c.out.numel();
        std::vector<double> dots(std::size_t(num_segments), 0.0);
        for (std::size_t i = 0; i < n; ++i) dots[std::size_t(seg[i])] += c.out.data[i] * c.gout[i];
        for (std::size_t i = 0; i < n; ++i)
          (*c.gin[0])[i] += c.out.data[i] * (c.gout[i] - dots[std::size_t(seg[i])]);
      });
}

// out[i, :] = a[i, :] * s[i]  with s a column vector {r, 1} (or {r}).
inline Tape::Id scale_rows(Tape& tp, Tape::Id a, Tape::Id s) {
  return tp.record(
      "scale_rows", {a, s},
      [](const std::vector<const Tensor*>& in) {
        const Tensor& a = *in[0];
        const Tensor& s = *in[1];
        check(a.rank() == 2, "scale_rows: first operand must be a matrix");
        check(s.numel() == std::size_t(a.rows()), "scale_rows: scale length != rows");
        Tensor out = Tensor::zeros(a.shape);
        for (int i = 0; i < a.rows(); ++i)
          for (int j = 0; j < a.cols(); ++j) out.at(i, j) = a.at(i, j) * s.data[std::size_t(i)];
        return out;
      },
      [](const Tape::BackwardCtx& c) {
        const Tensor& a = *c.in[0];
        const Tensor& s = *c.in[1];
        int r = a.rows(), cc = a.cols();
        for (int i = 0; i < r; ++i) {
          const double* grow = &c.gout[std::size_t(i) * std::size_t(cc)];
          if (c.gin[0]) {
            double sv = s.data[std::size_t(i)];
            double* garow = &(*c.gin[0])[std::size_t(i) * std::size_t(cc)];
            for (int j = 0; j < cc; ++j) garow[j] += grow[j] * sv;
          }
          if (c.gin[1]) {
            const double* arow = &a.data[std::size_t(i) * std::size_t(cc)];
            double dot = 0.0;
            for (int j = 0; j < cc; ++j) dot += grow[j] * arow[j];
            (*c.gin[1])[std::size_t(i)] += dot;
          }
        }
      });
}

// out[i, :] = a[i, :] + b[0, :]  with b a row vector {1, c}.
inline Tape::Id add_rowvec(Tape& tp, Tape::Id a, Tape::Id b) {
  return tp.record(
      "add_rowvec", {a, b},
      [](const std::vector<const Tensor*>& in) {
        const Tensor& a = *in[0];
        const Tensor& b = *in[1];
        check(a.rank() == 2 && b.rank() == 2 && b.rows() == 1 && b.cols() == a.cols(),
              "add_rowvec: expected {r,c} and {1,c}");
        Tensor out = a;
        out.requires_grad = false;
        out.grad.reset();
        for (int i = 0; i < a.rows(); ++i)
          for (int j = 0; j < a.cols(); ++j) out.at(i, j) += b.at(0, j);
        return out;
      },
      [](const Tape::BackwardCtx& c) {
        int r = c.in[0]->rows(), cc = c.in[0]->cols();
        if (c.gin[0])
          for (std::size_t i = 0; i < c.gout.size(); ++i) (*c.gin[0])[i] += c.gout[i];
        if (c.gin[1])
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < cc; ++j)
              (*c.gin[1])[std::size_t(j)] += c.gout[std::size_t(i) * std::size_t(cc) + std::size_t(j)];
      });
}

inline Tape::Id concat_cols(Tape& tp, const std::vector<Tape::Id>& parts) {
  check(!parts.empty(), "concat_cols: no inputs");
  return tp.record(
      "concat_cols", parts,
      [](const std::vector<const Tensor*>& in) {
        int r = in[0]->rows();
        int total = 0;
        for (const Tensor* t : in) {
          check(t->rank() == 2 && t->rows() == r, "concat_cols: row mismatch");
          total += t->cols();
        }
        Tensor out = Tensor::zeros({r, total});
        int off = 0;
        for (const Tensor* t : in) {
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < t->cols(); ++j) out.at(i, off + j) = t->at(i, j);
          off += t->cols();
        }
        return out;
      },
      [](const Tape::BackwardCtx& c) {
        int r = c.out.rows(), total = c.out.cols();
        int off = 0;
        for (std::size_t k = 0; k < c.in.size(); ++k) {
          int cc = c.in[k]->cols();
          if (c.gin[k]) {
            for (int i = 0; i < r; ++i)
              for (int j = 0; j < cc; ++j)
                (*c.gin[k])[std::size_t(i) * std::size_t(cc) + std::size_t(j)] +=
                    c.gout[std::size_t(i) * std::size_t(total) + std::size_t(off + j)];
          }
          off += cc;
        }
      });
}

// Stacks n scalar nodes into a column vector {n, 1}.
inline Tape::Id stack_scalars(Tape& tp, const std::vector<Tape::Id>& parts) {
  check(!parts.empty(), "stack_scalars: no inputs");
  return tp.record(
      "stack_scalars", parts,
      [](const std::vector<const Tensor*>& in) {
        Tensor out = Tensor::zeros({int(in.size()), 1});
        for (std::size_t i = 0; i < in.size(); ++i) {
          check(in[i]->numel() == 1, "stack_scalars: inputs must be scalars");
          out.data[i] = in[i]->data[0];
        }
        return out;
      },
      [](const Tape::BackwardCtx& c) {
        for (std::size_t i = 0; i < c.in.size(); ++i)
          if (c.gin[i]) (*c.gin[i])[0] += c.gout[i];
      });
}

// slope * x + (1 - slope) * relu(x), i.e. leaky ReLU built from primitives.
inline Tape::Id leaky_relu(Tape& tp, Tape::Id a, double slope) {
  Tape::Id lin = mul(tp, a, constant(tp, slope));
  Tape::Id rect = mul(tp, max_const(tp, a, 0.0), constant(tp, 1.0 - slope));
  return add(tp, lin, rect);
}

inline Tape::Id mean(Tape& tp, Tape::Id a) {
  std::size_t n = tp.value(a).numel();
  check(n > 0, "mean: empty tensor");
  return mul(tp, sum(tp, a), constant(tp, 1.0 / double(n)));
}

}  // namespace sgltn
