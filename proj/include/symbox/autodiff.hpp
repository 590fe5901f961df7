#pragma once

// Reverse-mode automatic differentiation over dense tensors. A Tape owns the
// nodes in creation order, which is also the topological order used by
// backward(). Kinked ops (relu, abs, min/max) use the subgradient convention
// sign(0) := 0. One tape is single-threaded; distinct tapes are independent.

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "symbox/errors.hpp"
#include "symbox/tensor.hpp"

namespace symbox::ad {

class Tape;

class Val {
 public:
  Val() = default;
  Val(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& tensor() const;
  double scalar() const { return tensor().scalar_value(); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  struct Node {
    Tensor value;
    std::vector<int> parents;
    std::function<void(Tape&, int)> backward;  // pull grad(self), push to parents
    const char* op = "leaf";
  };

  Val leaf(Tensor value, const char* op = "leaf") {
    check_finite(value, op);
    nodes_.push_back(Node{std::move(value), {}, nullptr, op});
    return Val(this, static_cast<int>(nodes_.size()) - 1);
  }

  Val scalar(double v) { return leaf(Tensor::scalar(v), "const"); }

  Val emit(Tensor value, std::vector<int> parents, std::function<void(Tape&, int)> backward,
           const char* op) {
    check_finite(value, op);
    nodes_.push_back(Node{std::move(value), std::move(parents), std::move(backward), op});
    return Val(this, static_cast<int>(nodes_.size()) - 1);
  }

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }

  // d(root)/d(node) for every node reachable from the scalar root
  void backward(const Val& root) {
    if (root.tape() != this) throw std::invalid_argument("backward: root from another tape");
    if (value(root.id()).numel() != 1)
      throw std::invalid_argument("backward: root must be scalar");
    grads_.assign(nodes_.size(), Tensor{});
    grad_mut(root.id()).data[0] = 1.0;
    for (int id = root.id(); id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.backward) continue;
      if (grads_[static_cast<std::size_t>(id)].data.empty()) continue;  // not reachable
      n.backward(*this, id);
    }
  }

  bool has_grad(const Val& v) const {
    return !grads_.empty() && !grads_[static_cast<std::size_t>(v.id())].data.empty();
  }

  const Tensor& grad(const Val& v) {
    return grad_mut(v.id());  // zeros if nothing flowed
  }

  Tensor& grad_mut(int id) {
    if (grads_.size() != nodes_.size()) grads_.assign(nodes_.size(), Tensor{});
    Tensor& g = grads_[static_cast<std::size_t>(id)];
    if (g.data.empty()) g = Tensor::zeros(nodes_[static_cast<std::size_t>(id)].value.shape);
    return g;
  }

 private:
  static void check_finite(const Tensor& t, const char* op) {
    if (!t.all_finite()) throw NumericError(op, "non-finite value in result");
  }

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

inline const Tensor& Val::tensor() const { return tape_->value(id_); }

namespace detail {

inline void require_same_tape(const Val& a, const Val& b) {
  if (a.tape() != b.tape()) throw std::invalid_argument("operands from different tapes");
}

// Broadcast over trailing dims: the smaller shape must be a prefix of the
// larger one; its values repeat across the remaining trailing dimensions.
struct Broadcast {
  bool a_small = false;       // which operand is broadcast
  std::size_t trail = 1;      // elements covered by one small-operand entry
  std::vector<int> shape;     // result shape
};

inline bool is_prefix(const std::vector<int>& small, const std::vector<int>& big) {
  if (small.size() > big.size()) return false;
  for (std::size_t i = 0; i < small.size(); ++i)
    if (small[i] != big[i]) return false;
  return true;
}

inline Broadcast broadcast_plan(const Tensor& a, const Tensor& b, const char* op) {
  Broadcast p;
  if (a.shape == b.shape) {
    p.shape = a.shape;
    return p;
  }
  if (is_prefix(a.shape, b.shape)) {
    p.a_small = true;
    p.shape = b.shape;
    p.trail = b.numel() / a.numel();
    return p;
  }
  if (is_prefix(b.shape, a.shape)) {
    p.a_small = false;
    p.shape = a.shape;
    p.trail = a.numel() / b.numel();
    return p;
  }
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a.shape) +
                              " vs " + shape_str(b.shape));
}

// fa, fb: local partials as functions of (a_i, b_i)
template <class F, class Fa, class Fb>
Val binary(const Val& a, const Val& b, const char* op, F f, Fa fa, Fb fb) {
  require_same_tape(a, b);
  Tape& tape = *a.tape();
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  const Broadcast plan = broadcast_plan(ta, tb, op);
  Tensor out = Tensor::zeros(plan.shape);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const double av = plan.a_small ? ta.data[i / plan.trail] : ta.data[i];
    const double bv = !plan.a_small && plan.trail > 1 ? tb.data[i / plan.trail] : tb.data[i % tb.data.size() == i ? i : i];
    out.data[i] = f(av, bv);
  }
  // the lambda above for bv is wrong on purpose-free styles; recompute plainly
  for (std::size_t i = 0; i < n; ++i) {
    const double av = plan.a_small ? ta.data[i / plan.trail] : ta.data[i];
    const double bv = plan.a_small ? tb.data[i] : (plan.trail > 1 ? tb.data[i / plan.trail] : tb.data[i]);
    out.data[i] = f(av, bv);
  }
  const int aid = a.id(), bid = b.id();
  return tape.emit(
      std::move(out), {aid, bid},
      [aid, bid, plan, fa, fb](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        const Tensor& ta2 = t.value(aid);
        const Tensor& tb2 = t.value(bid);
        Tensor& ga = t.grad_mut(aid);
        Tensor& gb = t.grad_mut(bid);
        const std::size_t n2 = g.numel();
        for (std::size_t i = 0; i < n2; ++i) {
          const std::size_t ia = plan.a_small ? i / plan.trail : i;
          const std::size_t ib = plan.a_small ? i : (plan.trail > 1 ? i / plan.trail : i);
          const double av = ta2.data[ia];
          const double bv = tb2.data[ib];
          ga.data[ia] += g.data[i] * fa(av, bv);
          gb.data[ib] += g.data[i] * fb(av, bv);
        }
      },
      op);
}

template <class F, class Dx>
Val unary(const Val& a, const char* op, F f, Dx dx) {
  Tape& tape = *a.tape();
  const Tensor& ta = a.tensor();
  Tensor out = Tensor::zeros(ta.shape);
  for (std::size_t i = 0; i < ta.numel(); ++i) out.data[i] = f(ta.data[i]);
  const int aid = a.id();
  return tape.emit(
      std::move(out), {aid},
      [aid, dx](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        const Tensor& ta2 = t.value(aid);
        Tensor& ga = t.grad_mut(aid);
        for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] * dx(ta2.data[i]);
      },
      op);
}

}  // namespace detail

inline Val add(const Val& a, const Val& b) {
  return detail::binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

inline Val sub(const Val& a, const Val& b) {
  return detail::binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

inline Val mul(const Val& a, const Val& b) {
  return detail::binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

inline Val div(const Val& a, const Val& b) {
  return detail::binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

inline Val atan2v(const Val& y, const Val& x) {
  return detail::binary(
      y, x, "atan2", [](double a, double b) { return std::atan2(a, b); },
      [](double a, double b) { return b / (a * a + b * b); },
      [](double a, double b) { return -a / (a * a + b * b); });
}

inline Val neg(const Val& a) {
  return detail::unary(a, "neg", [](double x) { return -x; }, [](double) { return -1.0; });
}

inline Val relu(const Val& a) {
  return detail::unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Val vabs(const Val& a) {
  return detail::unary(
      a, "abs", [](double x) { return std::fabs(x); },
      [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

inline Val vsqrt(const Val& a) {
  return detail::unary(
      a, "sqrt", [](double x) { return std::sqrt(x); },
      [](double x) { return 0.5 / std::sqrt(x); });
}

inline Val vexp(const Val& a) {
  return detail::unary(a, "exp", [](double x) { return std::exp(x); },
                       [](double x) { return std::exp(x); });
}

inline Val vlog(const Val& a) {
  return detail::unary(a, "log", [](double x) { return std::log(x); },
                       [](double x) { return 1.0 / x; });
}

inline Val vsin(const Val& a) {
  return detail::unary(a, "sin", [](double x) { return std::sin(x); },
                       [](double x) { return std::cos(x); });
}

inline Val vcos(const Val& a) {
  return detail::unary(a, "cos", [](double x) { return std::cos(x); },
                       [](double x) { return -std::sin(x); });
}

// elementwise clamp against a constant (scalar)
inline Val vmin(const Val& a, double c) {
  return detail::unary(
      a, "min_const", [c](double x) { return x < c ? x : c; },
      [c](double x) { return x < c ? 1.0 : 0.0; });
}

inline Val vmax(const Val& a, double c) {
  return detail::unary(
      a, "max_const", [c](double x) { return x > c ? x : c; },
      [c](double x) { return x > c ? 1.0 : 0.0; });
}

// elementwise smooth-L1 with threshold beta: quadratic inside, linear outside
inline Val smooth_l1(const Val& d, double beta) {
  return detail::unary(
      d, "smooth_l1",
      [beta](double x) {
        const double ax = std::fabs(x);
        return ax < beta ? 0.5 * x * x / beta : ax - 0.5 * beta;
      },
      [beta](double x) {
        const double ax = std::fabs(x);
        if (ax < beta) return x / beta;
        return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
      });
}

inline Val adds(const Val& a, double c) {
  return detail::unary(a, "add_const", [c](double x) { return x + c; },
                       [](double) { return 1.0; });
}

inline Val muls(const Val& a, double c) {
  return detail::unary(a, "mul_const", [c](double x) { return x * c; },
                       [c](double) { return c; });
}

inline Val sum(const Val& a) {
  Tape& tape = *a.tape();
  const Tensor& ta = a.tensor();
  double acc = 0.0;
  for (double v : ta.data) acc += v;
  const int aid = a.id();
  return tape.emit(
      Tensor::scalar(acc), {aid},
      [aid](Tape& t, int self) {
        const double g = t.grad_mut(self).data[0];
        Tensor& ga = t.grad_mut(aid);
        for (double& v : ga.data) v += g;
      },
      "sum");
}

inline Val mean(const Val& a) {
  const double inv = 1.0 / static_cast<double>(a.tensor().numel());
  return muls(sum(a), inv);
}

inline Val reshape(const Val& a, std::vector<int> shape) {
  Tape& tape = *a.tape();
  const Tensor& ta = a.tensor();
  if (Tensor::numel_of(shape) != ta.numel()) throw std::invalid_argument("reshape: numel mismatch");
  Tensor out;
  out.shape = std::move(shape);
  out.data = ta.data;
  const int aid = a.id();
  return tape.emit(
      std::move(out), {aid},
      [aid](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        Tensor& ga = t.grad_mut(aid);
        for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
      },
      "reshape");
}

// single element by flat index -> scalar node
inline Val pick(const Val& a, std::size_t flat) {
  Tape& tape = *a.tape();
  const Tensor& ta = a.tensor();
  if (flat >= ta.numel()) throw std::invalid_argument("pick: index out of range");
  const int aid = a.id();
  return tape.emit(
      Tensor::scalar(ta.data[flat]), {aid},
      [aid, flat](Tape& t, int self) {
        t.grad_mut(aid).data[flat] += t.grad_mut(self).data[0];
      },
      "pick");
}

inline Val slice(const Val& a, int axis, int start, int len) {
  Tape& tape = *a.tape();
  const Tensor& ta = a.tensor();
  const int rank = static_cast<int>(ta.shape.size());
  if (axis < 0 || axis >= rank) throw std::invalid_argument("slice: bad axis");
  if (start < 0 || len <= 0 || start + len > ta.shape[static_cast<std::size_t>(axis)])
    throw std::invalid_argument("slice: bad range");
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(ta.shape[static_cast<std::size_t>(i)]);
  for (int i = axis + 1; i < rank; ++i) inner *= static_cast<std::size_t>(ta.shape[static_cast<std::size_t>(i)]);
  const std::size_t dim = static_cast<std::size_t>(ta.shape[static_cast<std::size_t>(axis)]);

  std::vector<int> oshape = ta.shape;
  oshape[static_cast<std::size_t>(axis)] = len;
  Tensor out = Tensor::zeros(oshape);
  for (std::size_t o = 0; o < outer; ++o)
    for (int j = 0; j < len; ++j)
      std::copy_n(&ta.data[(o * dim + static_cast<std::size_t>(start + j)) * inner], inner,
                  &out.data[(o * static_cast<std::size_t>(len) + static_cast<std::size_t>(j)) * inner]);

  const int aid = a.id();
  return tape.emit(
      std::move(out), {aid},
      [aid, outer, inner, dim, start, len](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        Tensor& ga = t.grad_mut(aid);
        for (std::size_t o = 0; o < outer; ++o)
          for (int j = 0; j < len; ++j) {
            const double* src = &g.data[(o * static_cast<std::size_t>(len) + static_cast<std::size_t>(j)) * inner];
            double* dst = &ga.data[(o * dim + static_cast<std::size_t>(start + j)) * inner];
            for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
          }
      },
      "slice");
}

inline Val concat(const std::vector<Val>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Tape& tape = *parts[0].tape();
  const int rank = static_cast<int>(parts[0].tensor().shape.size());
  if (axis < 0 || axis >= rank) throw std::invalid_argument("concat: bad axis");
  std::vector<int> oshape = parts[0].tensor().shape;
  int total = 0;
  for (const Val& p : parts) {
    detail::require_same_tape(parts[0], p);
    std::vector<int> s = p.tensor().shape;
    s[static_cast<std::size_t>(axis)] = 0;
    std::vector<int> s0 = oshape;
    s0[static_cast<std::size_t>(axis)] = 0;
    if (s != s0) throw std::invalid_argument("concat: shape mismatch");
    total += p.tensor().shape[static_cast<std::size_t>(axis)];
  }
  oshape[static_cast<std::size_t>(axis)] = total;

  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(oshape[static_cast<std::size_t>(i)]);
  for (int i = axis + 1; i < rank; ++i) inner *= static_cast<std::size_t>(oshape[static_cast<std::size_t>(i)]);

  Tensor out = Tensor::zeros(oshape);
  std::vector<int> ids;
  std::vector<int> lens;
  int off = 0;
  for (const Val& p : parts) {
    const Tensor& tp = p.tensor();
    const int len = tp.shape[static_cast<std::size_t>(axis)];
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(&tp.data[o * static_cast<std::size_t>(len) * inner], static_cast<std::size_t>(len) * inner,
                  &out.data[(o * static_cast<std::size_t>(total) + static_cast<std::size_t>(off)) * inner]);
    ids.push_back(p.id());
    lens.push_back(len);
    off += len;
  }

  return tape.emit(
      std::move(out), ids,
      [ids, lens, outer, inner, total](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        int off2 = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          Tensor& ga = t.grad_mut(ids[k]);
          const int len = lens[k];
          for (std::size_t o = 0; o < outer; ++o) {
            const double* src =
                &g.data[(o * static_cast<std::size_t>(total) + static_cast<std::size_t>(off2)) * inner];
            double* dst = &ga.data[o * static_cast<std::size_t>(len) * inner];
            for (std::size_t i = 0; i < static_cast<std::size_t>(len) * inner; ++i) dst[i] += src[i];
          }
          off2 += len;
        }
      },
      "concat");
}

inline Val matmul(const Val& a, const Val& b) {
  detail::require_same_tape(a, b);
  Tape& tape = *a.tape();
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  if (ta.shape.size() != 2 || tb.shape.size() != 2 || ta.shape[1] != tb.shape[0])
    throw std::invalid_argument("matmul: need [m,k] x [k,n]");
  const int m = ta.shape[0], k = ta.shape[1], n = tb.shape[1];
  Tensor out = Tensor::zeros({m, n});
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      const double av = ta.data[static_cast<std::size_t>(i * k + p)];
      const double* brow = &tb.data[static_cast<std::size_t>(p * n)];
      double* orow = &out.data[static_cast<std::size_t>(i * n)];
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  const int aid = a.id(), bid = b.id();
  return tape.emit(
      std::move(out), {aid, bid},
      [aid, bid, m, k, n](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        const Tensor& ta2 = t.value(aid);
        const Tensor& tb2 = t.value(bid);
        Tensor& ga = t.grad_mut(aid);
        Tensor& gb = t.grad_mut(bid);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) {
            const double gv = g.data[static_cast<std::size_t>(i * n + j)];
            for (int p = 0; p < k; ++p) {
              ga.data[static_cast<std::size_t>(i * k + p)] += gv * tb2.data[static_cast<std::size_t>(p * n + j)];
              gb.data[static_cast<std::size_t>(p * n + j)] += gv * ta2.data[static_cast<std::size_t>(i * k + p)];
            }
          }
      },
      "matmul");
}

// 3x3 convolution, zero padding 1, stride 1 or 2.
// x: [Cin,H,W], w: [Cout,Cin,3,3], bias: [Cout] -> [Cout,Ho,Wo]
inline Val conv2d(const Val& x, const Val& w, const Val& bias, int stride) {
  detail::require_same_tape(x, w);
  detail::require_same_tape(x, bias);
  Tape& tape = *x.tape();
  const Tensor& tx = x.tensor();
  const Tensor& tw = w.tensor();
  const Tensor& tb = bias.tensor();
  if (tx.shape.size() != 3 || tw.shape.size() != 4 || tw.shape[2] != 3 || tw.shape[3] != 3)
    throw std::invalid_argument("conv2d: need x[Cin,H,W], w[Cout,Cin,3,3]");
  if (tw.shape[1] != tx.shape[0]) throw std::invalid_argument("conv2d: channel mismatch");
  if (tb.shape != std::vector<int>{tw.shape[0]}) throw std::invalid_argument("conv2d: bad bias shape");
  if (stride != 1 && stride != 2) throw std::invalid_argument("conv2d: stride must be 1 or 2");

  const int cin = tx.shape[0], hin = tx.shape[1], win = tx.shape[2];
  const int cout = tw.shape[0];
  const int ho = (hin + 2 - 3) / stride + 1;
  const int wo = (win + 2 - 3) / stride + 1;

  const auto lo_bound = [stride](int kk) { return kk >= 1 ? 0 : (1 - kk + stride - 1) / stride; };
  const auto hi_bound = [stride](int kk, int in, int out) {
    return std::min(out, (in - kk) / stride + 1);
  };

  Tensor out = Tensor::zeros({cout, ho, wo});
  for (int co = 0; co < cout; ++co) {
    double* oc = &out.data[static_cast<std::size_t>(co) * ho * wo];
    const double bv = tb.data[static_cast<std::size_t>(co)];
    for (int i = 0; i < ho * wo; ++i) oc[i] = bv;
    for (int ci = 0; ci < cin; ++ci) {
      const double* xc = &tx.data[static_cast<std::size_t>(ci) * hin * win];
      const double* ker = &tw.data[static_cast<std::size_t>((co * cin + ci)) * 9];
      for (int ky = 0; ky < 3; ++ky) {
        const int oy0 = lo_bound(ky), oy1 = hi_bound(ky, hin, ho);
        for (int kx = 0; kx < 3; ++kx) {
          const double wv = ker[ky * 3 + kx];
          const int ox0 = lo_bound(kx), ox1 = hi_bound(kx, win, wo);
          for (int oy = oy0; oy < oy1; ++oy) {
            const int iy = oy * stride + ky - 1;
            double* orow = oc + static_cast<std::size_t>(oy) * wo;
            const double* irow = xc + static_cast<std::size_t>(iy) * win + (kx - 1);
            if (stride == 1) {
              for (int ox = ox0; ox < ox1; ++ox) orow[ox] += wv * irow[ox];
            } else {
              for (int ox = ox0; ox < ox1; ++ox) orow[ox] += wv * irow[2 * ox];
            }
          }
        }
      }
    }
  }

  const int xid = x.id(), wid = w.id(), bid = bias.id();
  return tape.emit(
      std::move(out), {xid, wid, bid},
      [xid, wid, bid, cin, hin, win, cout, ho, wo, stride, lo_bound, hi_bound](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        const Tensor& tx2 = t.value(xid);
        const Tensor& tw2 = t.value(wid);
        Tensor& gx = t.grad_mut(xid);
        Tensor& gw = t.grad_mut(wid);
        Tensor& gb = t.grad_mut(bid);
        for (int co = 0; co < cout; ++co) {
          const double* gc = &g.data[static_cast<std::size_t>(co) * ho * wo];
          double acc = 0.0;
          for (int i = 0; i < ho * wo; ++i) acc += gc[i];
          gb.data[static_cast<std::size_t>(co)] += acc;
          for (int ci = 0; ci < cin; ++ci) {
            const double* xc = &tx2.data[static_cast<std::size_t>(ci) * hin * win];
            double* gxc = &gx.data[static_cast<std::size_t>(ci) * hin * win];
            const double* ker = &tw2.data[static_cast<std::size_t>((co * cin + ci)) * 9];
            double* gker = &gw.data[static_cast<std::size_t>((co * cin + ci)) * 9];
            for (int ky = 0; ky < 3; ++ky) {
              const int oy0 = lo_bound(ky), oy1 = hi_bound(ky, hin, ho);
              for (int kx = 0; kx < 3; ++kx) {
                const double wv = ker[ky * 3 + kx];
                const int ox0 = lo_bound(kx), ox1 = hi_bound(kx, win, wo);
                double wacc = 0.0;
                for (int oy = oy0; oy < oy1; ++oy) {
                  const int iy = oy * stride + ky - 1;
                  const double* grow = gc + static_cast<std::size_t>(oy) * wo;
                  const double* irow = xc + static_cast<std::size_t>(iy) * win + (kx - 1);
                  double* gxrow = gxc + static_cast<std::size_t>(iy) * win + (kx - 1);
                  if (stride == 1) {
                    for (int ox = ox0; ox < ox1; ++ox) {
                      wacc += grow[ox] * irow[ox];
                      gxrow[ox] += wv * grow[ox];
                    }
                  } else {
                    for (int ox = ox0; ox < ox1; ++ox) {
                      wacc += grow[ox] * irow[2 * ox];
                      gxrow[2 * ox] += wv * grow[ox];
                    }
                  }
                }
                gker[ky * 3 + kx] += wacc;
              }
            }
          }
        }
      },
      "conv2d");
}

inline Val operator+(const Val& a, const Val& b) { return add(a, b); }
inline Val operator-(const Val& a, const Val& b) { return sub(a, b); }
inline Val operator*(const Val& a, const Val& b) { return mul(a, b); }
inline Val operator/(const Val& a, const Val& b) { return div(a, b); }
inline Val operator-(const Val& a) { return neg(a); }
inline Val operator+(const Val& a, double c) { return adds(a, c); }
inline Val operator+(double c, const Val& a) { return adds(a, c); }
inline Val operator-(const Val& a, double c) { return adds(a, -c); }
inline Val operator-(double c, const Val& a) { return adds(neg(a), c); }
inline Val operator*(const Val& a, double c) { return muls(a, c); }
inline Val operator*(double c, const Val& a) { return muls(a, c); }
inline Val operator/(const Val& a, double c) { return muls(a, 1.0 / c); }

// Max relative error between analytic gradients and central differences.
// f must rebuild the same scalar graph from the given leaves each call.
template <class F>
double grad_check(F&& f, const std::vector<Tensor>& xs, double h = 1e-5) {
  Tape tape;
  std::vector<Val> leaves;
  leaves.reserve(xs.size());
  for (const Tensor& x : xs) leaves.push_back(tape.leaf(x));
  Val y = f(tape, leaves);
  if (y.tensor().numel() != 1) throw std::invalid_argument("grad_check: f must return a scalar");
  tape.backward(y);
  std::vector<Tensor> analytic;
  analytic.reserve(xs.size());
  for (const Val& l : leaves) analytic.push_back(tape.grad(l));

  const auto eval = [&](const std::vector<Tensor>& pts) {
    Tape t2;
    std::vector<Val> ls;
    ls.reserve(pts.size());
    for (const Tensor& x : pts) ls.push_back(t2.leaf(x));
    return f(t2, ls).scalar();
  };

  double worst = 0.0;
  std::vector<Tensor> probe = xs;
  for (std::size_t xi = 0; xi < xs.size(); ++xi) {
    for (std::size_t i = 0; i < xs[xi].numel(); ++i) {
      const double orig = probe[xi].data[i];
      probe[xi].data[i] = orig + h;
      const double fp = eval(probe);
      probe[xi].data[i] = orig - h;
      const double fm = eval(probe);
      probe[xi].data[i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double an = analytic[xi].data[i];
      const double err = std::fabs(an - fd) / std::max(1.0, std::fabs(an));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace symbox::ad
