// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode tensor engine. Row-major buffers, tape built on the
// fly through shared nodes, backward in reverse topological order with a
// fixed accumulation order so results are bitwise reproducible regardless
// of thread count. Forward kernels parallelize with OpenMP over independent
// output slices; each output element keeps a fixed reduction order.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace horgait {

inline std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

inline int64_t numel_of(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

namespace detail {

// Dot product with a fixed 8-lane accumulation order. Unlike a single running
// sum, the independent lanes let the compiler vectorize while the result stays
// bit-identical across runs and thread counts.
template <typename S>
S dot_lanes(const S* a, const S* b, int64_t n) {
    S lane[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (int l = 0; l < 8; ++l) lane[l] += a[i + l] * b[i + l];
    S acc = ((lane[0] + lane[1]) + (lane[2] + lane[3])) + ((lane[4] + lane[5]) + (lane[6] + lane[7]));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

template <typename S>
S sum_lanes(const S* a, int64_t n) {
    S lane[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (int l = 0; l < 8; ++l) lane[l] += a[i + l];
    S acc = ((lane[0] + lane[1]) + (lane[2] + lane[3])) + ((lane[4] + lane[5]) + (lane[6] + lane[7]));
    for (; i < n; ++i) acc += a[i];
    return acc;
}

}  // namespace detail

template <typename S>
struct NodeT {
    std::vector<int> shape;
    std::vector<S> value;
    std::vector<S> grad;  // sized lazily
    bool requires_grad = false;
    std::vector<std::shared_ptr<NodeT>> parents;
    std::function<void(NodeT&)> backward_fn;

    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), S(0));
    }
};

template <typename S>
class TensorT {
  public:
    TensorT() = default;

    static TensorT leaf(std::vector<int> shape, std::vector<S> data, bool requires_grad = false) {
        auto node = std::make_shared<NodeT<S>>();
        if (static_cast<int64_t>(data.size()) != numel_of(shape))
            throw std::invalid_argument("tensor: data length does not match shape " + shape_str(shape));
        node->shape = std::move(shape);
        node->value = std::move(data);
        node->requires_grad = requires_grad;
        return TensorT(std::move(node));
    }

    static TensorT zeros(std::vector<int> shape, bool requires_grad = false) {
        std::vector<S> data(static_cast<size_t>(numel_of(shape)), S(0));
        return leaf(std::move(shape), std::move(data), requires_grad);
    }

    static TensorT full(std::vector<int> shape, S v, bool requires_grad = false) {
        std::vector<S> data(static_cast<size_t>(numel_of(shape)), v);
        return leaf(std::move(shape), std::move(data), requires_grad);
    }

    bool defined() const { return static_cast<bool>(node_); }
    const std::vector<int>& shape() const { return node_->shape; }
    int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }
    bool requires_grad() const { return node_->requires_grad; }
    std::vector<S>& data() { return node_->value; }
    const std::vector<S>& data() const { return node_->value; }
    std::vector<S>& grad() { return node_->grad; }
    const std::vector<S>& grad() const { return node_->grad; }
    std::shared_ptr<NodeT<S>> node() const { return node_; }

    void zero_grad() { node_->grad.assign(node_->value.size(), S(0)); }

    // Raw op constructor: wires parents and the backward closure when any
    // input requires grad. The closure receives the result node and must
    // accumulate (+=) into parents' grads.
    static TensorT make_op(std::vector<int> shape, std::vector<S> value,
                           std::vector<TensorT> inputs,
                           std::function<void(NodeT<S>&)> backward) {
        auto node = std::make_shared<NodeT<S>>();
        node->shape = std::move(shape);
        node->value = std::move(value);
        bool rg = false;
        for (const auto& in : inputs) rg = rg || in.requires_grad();
        node->requires_grad = rg;
        if (rg) {
            for (auto& in : inputs) node->parents.push_back(in.node());
            node->backward_fn = std::move(backward);
        }
        return TensorT(std::move(node));
    }

    explicit TensorT(std::shared_ptr<NodeT<S>> node) : node_(std::move(node)) {}

  private:
    std::shared_ptr<NodeT<S>> node_;
};

namespace detail {

template <typename S>
void check_same_shape(const char* op, const TensorT<S>& a, const TensorT<S>& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
}

template <typename S>
void check_4d(const char* op, const TensorT<S>& x) {
    if (x.shape().size() != 4)
        throw std::invalid_argument(std::string(op) + ": expected 4-D [T,C,H,W], got " +
                                    shape_str(x.shape()));
}

}  // namespace detail

// ---- elementwise ----------------------------------------------------------

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
    detail::check_same_shape("add", a, b);
    std::vector<S> out(a.data().size());
    const auto& av = a.data();
    const auto& bv = b.data();
#pragma omp parallel for schedule(static) if (out.size() > 16384)
    for (long i = 0; i < static_cast<long>(out.size()); ++i) out[i] = av[i] + bv[i];
    auto an = a.node(), bn = b.node();
    return TensorT<S>::make_op(a.shape(), std::move(out), {a, b}, [an, bn](NodeT<S>& y) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (size_t i = 0; i < y.grad.size(); ++i) an->grad[i] += y.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (size_t i = 0; i < y.grad.size(); ++i) bn->grad[i] += y.grad[i];
        }
    });
}

template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
    detail::check_same_shape("mul", a, b);
    std::vector<S> out(a.data().size());
    const auto& av = a.data();
    const auto& bv = b.data();
#pragma omp parallel for schedule(static) if (out.size() > 16384)
    for (long i = 0; i < static_cast<long>(out.size()); ++i) out[i] = av[i] * bv[i];
    auto an = a.node(), bn = b.node();
    return TensorT<S>::make_op(a.shape(), std::move(out), {a, b}, [an, bn](NodeT<S>& y) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (size_t i = 0; i < y.grad.size(); ++i) an->grad[i] += y.grad[i] * bn->value[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (size_t i = 0; i < y.grad.size(); ++i) bn->grad[i] += y.grad[i] * an->value[i];
        }
    });
}

template <typename S>
TensorT<S> scale(const TensorT<S>& a, S k) {
    std::vector<S> out(a.data().size());
    const auto& av = a.data();
#pragma omp parallel for schedule(static) if (out.size() > 16384)
    for (long i = 0; i < static_cast<long>(out.size()); ++i) out[i] = av[i] * k;
    auto an = a.node();
    return TensorT<S>::make_op(a.shape(), std::move(out), {a}, [an, k](NodeT<S>& y) {
        an->ensure_grad();
        for (size_t i = 0; i < y.grad.size(); ++i) an->grad[i] += y.grad[i] * k;
    });
}

template <typename S>
TensorT<S> gelu(const TensorT<S>& x) {
    // exact form x * Phi(x), Phi via erf
    const S inv_sqrt2 = S(0.7071067811865475244);
    std::vector<S> out(x.data().size());
    const auto& xv = x.data();
#pragma omp parallel for schedule(static) if (out.size() > 8192)
    for (long i = 0; i < static_cast<long>(out.size()); ++i) {
        S phi = S(0.5) * (S(1) + std::erf(xv[i] * inv_sqrt2));
        out[i] = xv[i] * phi;
    }
    auto xn = x.node();
    return TensorT<S>::make_op(x.shape(), std::move(out), {x}, [xn, inv_sqrt2](NodeT<S>& y) {
        const S inv_sqrt2pi = S(0.3989422804014326779);
        xn->ensure_grad();
        for (size_t i = 0; i < y.grad.size(); ++i) {
            S v = xn->value[i];
            S cdf = S(0.5) * (S(1) + std::erf(v * inv_sqrt2));
            S pdf = inv_sqrt2pi * std::exp(S(-0.5) * v * v);
            xn->grad[i] += y.grad[i] * (cdf + v * pdf);
        }
    });
}

// ---- reductions -----------------------------------------------------------

template <typename S>
TensorT<S> sum(const TensorT<S>& x) {
    S acc = 0;
    for (S v : x.data()) acc += v;
    auto xn = x.node();
    return TensorT<S>::make_op({1}, {acc}, {x}, [xn](NodeT<S>& y) {
        xn->ensure_grad();
        for (size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += y.grad[0];
    });
}

// [T,C,H,W] -> [T,C], mean over H*W
template <typename S>
TensorT<S> spatial_mean(const TensorT<S>& x) {
    detail::check_4d("spatial_mean", x);
    int T = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    int64_t hw = static_cast<int64_t>(H) * W;
    std::vector<S> out(static_cast<size_t>(T) * C);
    const auto& xv = x.data();
    for (int t = 0; t < T; ++t)
        for (int c = 0; c < C; ++c) {
            const S* p = xv.data() + (static_cast<int64_t>(t) * C + c) * hw;
            S acc = 0;
            for (int64_t i = 0; i < hw; ++i) acc += p[i];
            out[static_cast<size_t>(t) * C + c] = acc / static_cast<S>(hw);
        }
    auto xn = x.node();
    return TensorT<S>::make_op({T, C}, std::move(out), {x}, [xn, T, C, hw](NodeT<S>& y) {
        xn->ensure_grad();
        for (int t = 0; t < T; ++t)
            for (int c = 0; c < C; ++c) {
                S g = y.grad[static_cast<size_t>(t) * C + c] / static_cast<S>(hw);
                S* p = xn->grad.data() + (static_cast<int64_t>(t) * C + c) * hw;
                for (int64_t i = 0; i < hw; ++i) p[i] += g;
            }
    });
}

// [T,C] -> [C], max over frames; ties resolve to the lowest frame index and
// the gradient routes only to the winner.
template <typename S>
TensorT<S> temporal_max(const TensorT<S>& x) {
    if (x.shape().size() != 2)
        throw std::invalid_argument("temporal_max: expected [T,C], got " + shape_str(x.shape()));
    int T = x.shape()[0], C = x.shape()[1];
    std::vector<S> out(static_cast<size_t>(C));
    auto argmax = std::make_shared<std::vector<int>>(static_cast<size_t>(C), 0);
    const auto& xv = x.data();
    for (int c = 0; c < C; ++c) {
        S best = xv[c];
        int bi = 0;
        for (int t = 1; t < T; ++t) {
            S v = xv[static_cast<size_t>(t) * C + c];
            if (v > best) {
                best = v;
                bi = t;
            }
        }
        out[c] = best;
        (*argmax)[c] = bi;
    }
    auto xn = x.node();
    return TensorT<S>::make_op({C}, std::move(out), {x}, [xn, argmax, C](NodeT<S>& y) {
        xn->ensure_grad();
        for (int c = 0; c < C; ++c)
            xn->grad[static_cast<size_t>((*argmax)[c]) * C + c] += y.grad[c];
    });
}

// ---- linear layers ---------------------------------------------------------

// x: [..., C_in], W: [C_out, C_in], b: [C_out] -> [..., C_out]
template <typename S>
TensorT<S> linear(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b) {
    if (x.shape().empty() || w.shape().size() != 2)
        throw std::invalid_argument("linear: bad shapes " + shape_str(x.shape()) + ", " + shape_str(w.shape()));
    int cin = x.shape().back();
    int cout = w.shape()[0];
    if (w.shape()[1] != cin || b.shape() != std::vector<int>{cout})
        throw std::invalid_argument("linear: shape mismatch x" + shape_str(x.shape()) + " w" +
                                    shape_str(w.shape()) + " b" + shape_str(b.shape()));
    int64_t rows = x.numel() / cin;
    std::vector<int> oshape = x.shape();
    oshape.back() = cout;
    std::vector<S> out(static_cast<size_t>(rows) * cout);
    const auto& xv = x.data();
    const auto& wv = w.data();
    const auto& bv = b.data();
#pragma omp parallel for schedule(static) if (rows > 4)
    for (long m = 0; m < static_cast<long>(rows); ++m) {
        const S* xr = xv.data() + static_cast<int64_t>(m) * cin;
        S* yr = out.data() + static_cast<int64_t>(m) * cout;
        for (int o = 0; o < cout; ++o) {
            const S* wr = wv.data() + static_cast<int64_t>(o) * cin;
            S acc = bv[o];
            for (int i = 0; i < cin; ++i) acc += wr[i] * xr[i];
            yr[o] = acc;
        }
    }
    auto xn = x.node(), wn = w.node(), bn = b.node();
    return TensorT<S>::make_op(std::move(oshape), std::move(out), {x, w, b},
                               [xn, wn, bn, rows, cin, cout](NodeT<S>& y) {
        if (xn->requires_grad) {
            xn->ensure_grad();
            for (int64_t m = 0; m < rows; ++m) {
                const S* gy = y.grad.data() + m * cout;
                S* gx = xn->grad.data() + m * cin;
                for (int o = 0; o < cout; ++o) {
                    const S* wr = wn->value.data() + static_cast<int64_t>(o) * cin;
                    S g = gy[o];
                    for (int i = 0; i < cin; ++i) gx[i] += g * wr[i];
                }
            }
        }
        if (wn->requires_grad) {
            wn->ensure_grad();
            for (int64_t m = 0; m < rows; ++m) {
                const S* gy = y.grad.data() + m * cout;
                const S* xr = xn->value.data() + m * cin;
                for (int o = 0; o < cout; ++o) {
                    S* gw = wn->grad.data() + static_cast<int64_t>(o) * cin;
                    S g = gy[o];
                    for (int i = 0; i < cin; ++i) gw[i] += g * xr[i];
                }
            }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (int64_t m = 0; m < rows; ++m)
                for (int o = 0; o < cout; ++o) bn->grad[o] += y.grad[m * cout + o];
        }
    });
}

// Channel mixing on [T,C,H,W] layout (1x1 convolution): W: [C_out, C_in].
template <typename S>
TensorT<S> pointwise_linear(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b) {
    detail::check_4d("pointwise_linear", x);
    int T = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    int cout = w.shape()[0];
    if (w.shape().size() != 2 || w.shape()[1] != C || b.shape() != std::vector<int>{cout})
        throw std::invalid_argument("pointwise_linear: shape mismatch x" + shape_str(x.shape()) +
                                    " w" + shape_str(w.shape()));
    int64_t hw = static_cast<int64_t>(H) * W;
    std::vector<S> out(static_cast<size_t>(T) * cout * hw);
    const auto& xv = x.data();
    const auto& wv = w.data();
    const auto& bv = b.data();
#pragma omp parallel for schedule(static) collapse(2)
    for (int t = 0; t < T; ++t)
        for (int o = 0; o < cout; ++o) {
            S* yp = out.data() + (static_cast<int64_t>(t) * cout + o) * hw;
            S bias = bv[o];
            for (int64_t i = 0; i < hw; ++i) yp[i] = bias;
            for (int c = 0; c < C; ++c) {
                const S* xp = xv.data() + (static_cast<int64_t>(t) * C + c) * hw;
                S wk = wv[static_cast<int64_t>(o) * C + c];
                for (int64_t i = 0; i < hw; ++i) yp[i] += wk * xp[i];
            }
        }
    auto xn = x.node(), wn = w.node(), bn = b.node();
    return TensorT<S>::make_op({T, cout, H, W}, std::move(out), {x, w, b},
                               [xn, wn, bn, T, C, cout, hw](NodeT<S>& y) {
        if (xn->requires_grad) {
            xn->ensure_grad();
#pragma omp parallel for schedule(static) collapse(2)
            for (int t = 0; t < T; ++t)
                for (int c = 0; c < C; ++c) {
                    S* gx = xn->grad.data() + (static_cast<int64_t>(t) * C + c) * hw;
                    for (int o = 0; o < cout; ++o) {
                        const S* gy = y.grad.data() + (static_cast<int64_t>(t) * cout + o) * hw;
                        S wk = wn->value[static_cast<int64_t>(o) * C + c];
                        for (int64_t i = 0; i < hw; ++i) gx[i] += wk * gy[i];
                    }
                }
        }
        if (wn->requires_grad) {
            wn->ensure_grad();
#pragma omp parallel for schedule(static) collapse(2)
            for (int o = 0; o < cout; ++o)
                for (int c = 0; c < C; ++c) {
                    S acc = 0;
                    for (int t = 0; t < T; ++t) {
                        const S* gy = y.grad.data() + (static_cast<int64_t>(t) * cout + o) * hw;
                        const S* xp = xn->value.data() + (static_cast<int64_t>(t) * C + c) * hw;
                        acc += detail::dot_lanes(gy, xp, hw);
                    }
                    wn->grad[static_cast<int64_t>(o) * C + c] += acc;
                }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (int o = 0; o < cout; ++o) {
                S acc = 0;
                for (int t = 0; t < T; ++t) {
                    const S* gy = y.grad.data() + (static_cast<int64_t>(t) * cout + o) * hw;
                    acc += detail::sum_lanes(gy, hw);
                }
                bn->grad[o] += acc;
            }
        }
    });
}

// ---- convolutions ----------------------------------------------------------

// x: [T,C_in,H,W], w: [C_out,C_in,kH,kW], b: [C_out]; symmetric zero pad,
// H' = (H + 2p - kH)/stride + 1.
template <typename S>
TensorT<S> conv2d(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b, int stride,
                  int pad) {
    detail::check_4d("conv2d", x);
    if (w.shape().size() != 4 || w.shape()[1] != x.shape()[1])
        throw std::invalid_argument("conv2d: shape mismatch x" + shape_str(x.shape()) + " w" +
                                    shape_str(w.shape()));
    int T = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    int cout = w.shape()[0], kh = w.shape()[2], kw = w.shape()[3];
    if (b.shape() != std::vector<int>{cout})
        throw std::invalid_argument("conv2d: bias shape " + shape_str(b.shape()));
    int oh = (H + 2 * pad - kh) / stride + 1;
    int ow = (W + 2 * pad - kw) / stride + 1;
    if (oh <= 0 || ow <= 0) throw std::invalid_argument("conv2d: empty output for x" + shape_str(x.shape()));

    // first/last output index along one axis whose input tap k stays in [0, limit)
    auto olo = [stride, pad](int k) { int v = pad - k; return v <= 0 ? 0 : (v + stride - 1) / stride; };
    auto ohi = [stride, pad](int k, int limit, int omax) {
        return std::min(omax - 1, (limit - 1 - k + pad) / stride);
    };

    std::vector<S> out(static_cast<size_t>(T) * cout * oh * ow);
    const auto& xv = x.data();
    const auto& wv = w.data();
    const auto& bv = b.data();
#pragma omp parallel for schedule(static) collapse(2)
    for (int t = 0; t < T; ++t)
        for (int o = 0; o < cout; ++o) {
            S* yp = out.data() + (static_cast<int64_t>(t) * cout + o) * oh * ow;
            for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow; ++i) yp[i] = bv[o];
            for (int c = 0; c < C; ++c) {
                const S* xp = xv.data() + (static_cast<int64_t>(t) * C + c) * H * W;
                const S* wp = wv.data() + ((static_cast<int64_t>(o) * C + c) * kh) * kw;
                for (int ky = 0; ky < kh; ++ky) {
                    int oy0 = olo(ky), oy1 = ohi(ky, H, oh);
                    for (int kx = 0; kx < kw; ++kx) {
                        S wk = wp[static_cast<int64_t>(ky) * kw + kx];
                        int ox0 = olo(kx), ox1 = ohi(kx, W, ow);
                        for (int oy = oy0; oy <= oy1; ++oy) {
                            S* yr = yp + static_cast<int64_t>(oy) * ow;
                            const S* xr = xp + static_cast<int64_t>(oy * stride + ky - pad) * W;
                            if (stride == 1) {
                                const S* xs = xr + ox0 + kx - pad;
                                for (int ox = ox0; ox <= ox1; ++ox) yr[ox] += wk * xs[ox - ox0];
                            } else {
                                for (int ox = ox0; ox <= ox1; ++ox)
                                    yr[ox] += wk * xr[ox * stride + kx - pad];
                            }
                        }
                    }
                }
            }
        }
    auto xn = x.node(), wn = w.node(), bn = b.node();
    return TensorT<S>::make_op({T, cout, oh, ow}, std::move(out), {x, w, b},
                               [xn, wn, bn, T, C, H, W, cout, kh, kw, oh, ow, stride, pad](NodeT<S>& y) {
        auto olo = [stride, pad](int k) { int v = pad - k; return v <= 0 ? 0 : (v + stride - 1) / stride; };
        auto ohi = [stride, pad](int k, int limit, int omax) {
            return std::min(omax - 1, (limit - 1 - k + pad) / stride);
        };
        if (xn->requires_grad) {
            xn->ensure_grad();
#pragma omp parallel for schedule(static) collapse(2)
            for (int t = 0; t < T; ++t)
                for (int c = 0; c < C; ++c) {
                    S* gx = xn->grad.data() + (static_cast<int64_t>(t) * C + c) * H * W;
                    for (int o = 0; o < cout; ++o) {
                        const S* gy = y.grad.data() + (static_cast<int64_t>(t) * cout + o) * oh * ow;
                        const S* wp = wn->value.data() + ((static_cast<int64_t>(o) * C + c) * kh) * kw;
                        for (int ky = 0; ky < kh; ++ky) {
                            int oy0 = olo(ky), oy1 = ohi(ky, H, oh);
                            for (int kx = 0; kx < kw; ++kx) {
                                S wk = wp[static_cast<int64_t>(ky) * kw + kx];
                                int ox0 = olo(kx), ox1 = ohi(kx, W, ow);
                                for (int oy = oy0; oy <= oy1; ++oy) {
                                    const S* gyr = gy + static_cast<int64_t>(oy) * ow;
                                    S* gxr = gx + static_cast<int64_t>(oy * stride + ky - pad) * W;
                                    if (stride == 1) {
                                        S* gs = gxr + ox0 + kx - pad;
                                        for (int ox = ox0; ox <= ox1; ++ox) gs[ox - ox0] += wk * gyr[ox];
                                    } else {
                                        for (int ox = ox0; ox <= ox1; ++ox)
                                            gxr[ox * stride + kx - pad] += wk * gyr[ox];
                                    }
                                }
                            }
                        }
                    }
                }
        }
        if (wn->requires_grad) {
            wn->ensure_grad();
#pragma omp parallel for schedule(static) collapse(2)
            for (int o = 0; o < cout; ++o)
                for (int c = 0; c < C; ++c) {
                    S* gw = wn->grad.data() + ((static_cast<int64_t>(o) * C + c) * kh) * kw;
                    for (int ky = 0; ky < kh; ++ky) {
                        int oy0 = olo(ky), oy1 = ohi(ky, H, oh);
                        for (int kx = 0; kx < kw; ++kx) {
                            int ox0 = olo(kx), ox1 = ohi(kx, W, ow);
                            S acc = 0;
                            for (int t = 0; t < T; ++t) {
                                const S* gy = y.grad.data() + (static_cast<int64_t>(t) * cout + o) * oh * ow;
                                const S* xp = xn->value.data() + (static_cast<int64_t>(t) * C + c) * H * W;
                                for (int oy = oy0; oy <= oy1; ++oy) {
                                    const S* gyr = gy + static_cast<int64_t>(oy) * ow;
                                    const S* xr = xp + static_cast<int64_t>(oy * stride + ky - pad) * W;
                                    if (stride == 1) {
                                        const S* xs = xr + ox0 + kx - pad;
                                        acc += detail::dot_lanes(gyr + ox0, xs, ox1 - ox0 + 1);
                                    } else {
                                        for (int ox = ox0; ox <= ox1; ++ox)
                                            acc += gyr[ox] * xr[ox * stride + kx - pad];
                                    }
                                }
                            }
                            gw[static_cast<int64_t>(ky) * kw + kx] += acc;
                        }
                    }
                }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (int o = 0; o < cout; ++o) {
                S acc = 0;
                for (int t = 0; t < T; ++t) {
                    const S* gy = y.grad.data() + (static_cast<int64_t>(t) * cout + o) * oh * ow;
                    acc += detail::sum_lanes(gy, static_cast<int64_t>(oh) * ow);
                }
                bn->grad[o] += acc;
            }
        }
    });
}

// Per-channel ("depthwise") convolution, stride 1, "same" zero pad.
// x: [T,C,H,W], w: [C,kH,kW].
template <typename S>
TensorT<S> depthwise_conv2d(const TensorT<S>& x, const TensorT<S>& w) {
    detail::check_4d("depthwise_conv2d", x);
    if (w.shape().size() != 3 || w.shape()[0] != x.shape()[1])
        throw std::invalid_argument("depthwise_conv2d: shape mismatch x" + shape_str(x.shape()) +
                                    " w" + shape_str(w.shape()));
    int T = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    int kh = w.shape()[1], kw = w.shape()[2];
    int ph = kh / 2, pw = kw / 2;
    std::vector<S> out(x.data().size(), S(0));
    const auto& xv = x.data();
    const auto& wv = w.data();
#pragma omp parallel for schedule(static) collapse(2)
    for (int t = 0; t < T; ++t)
        for (int c = 0; c < C; ++c) {
            const S* xp = xv.data() + (static_cast<int64_t>(t) * C + c) * H * W;
            S* yp = out.data() + (static_cast<int64_t>(t) * C + c) * H * W;
            const S* wp = wv.data() + static_cast<int64_t>(c) * kh * kw;
            for (int ky = 0; ky < kh; ++ky)
                for (int kx = 0; kx < kw; ++kx) {
                    S wk = wp[static_cast<int64_t>(ky) * kw + kx];
                    for (int oy = 0; oy < H; ++oy) {
                        int iy = oy + ky - ph;
                        if (iy < 0 || iy >= H) continue;
                        S* yr = yp + static_cast<int64_t>(oy) * W;
                        const S* xr = xp + static_cast<int64_t>(iy) * W;
                        int x0 = std::max(0, pw - kx);
                        int x1 = std::min(W, W + pw - kx);
                        for (int ox = x0; ox < x1; ++ox) yr[ox] += wk * xr[ox + kx - pw];
                    }
                }
        }
    auto xn = x.node(), wn = w.node();
    return TensorT<S>::make_op(x.shape(), std::move(out), {x, w},
                               [xn, wn, T, C, H, W, kh, kw, ph, pw](NodeT<S>& y) {
        if (xn->requires_grad) {
            xn->ensure_grad();
#pragma omp parallel for schedule(static) collapse(2)
            for (int t = 0; t < T; ++t)
                for (int c = 0; c < C; ++c) {
                    S* gx = xn->grad.data() + (static_cast<int64_t>(t) * C + c) * H * W;
                    const S* gy = y.grad.data() + (static_cast<int64_t>(t) * C + c) * H * W;
                    const S* wp = wn->value.data() + static_cast<int64_t>(c) * kh * kw;
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            S wk = wp[static_cast<int64_t>(ky) * kw + kx];
                            for (int oy = 0; oy < H; ++oy) {
                                int iy = oy + ky - ph;
                                if (iy < 0 || iy >= H) continue;
                                const S* gyr = gy + static_cast<int64_t>(oy) * W;
                                S* gxr = gx + static_cast<int64_t>(iy) * W;
                                int x0 = std::max(0, pw - kx);
                                int x1 = std::min(W, W + pw - kx);
                                for (int ox = x0; ox < x1; ++ox) gxr[ox + kx - pw] += wk * gyr[ox];
                            }
                        }
                }
        }
        if (wn->requires_grad) {
            wn->ensure_grad();
#pragma omp parallel for schedule(static)
            for (int c = 0; c < C; ++c) {
                S* gw = wn->grad.data() + static_cast<int64_t>(c) * kh * kw;
                for (int ky = 0; ky < kh; ++ky)
                    for (int kx = 0; kx < kw; ++kx) {
                        S acc = 0;
                        for (int t = 0; t < T; ++t) {
                            const S* gy = y.grad.data() + (static_cast<int64_t>(t) * C + c) * H * W;
                            const S* xp = xn->value.data() + (static_cast<int64_t>(t) * C + c) * H * W;
                            for (int oy = 0; oy < H; ++oy) {
                                int iy = oy + ky - ph;
                                if (iy < 0 || iy >= H) continue;
                                int x0 = std::max(0, pw - kx);
                                int x1 = std::min(W, W + pw - kx);
                                acc += detail::dot_lanes(gy + static_cast<int64_t>(oy) * W + x0,
                                                         xp + static_cast<int64_t>(iy) * W + x0 + kx - pw,
                                                         x1 - x0);
                            }
                        }
                        gw[static_cast<int64_t>(ky) * kw + kx] += acc;
                    }
            }
        }
    });
}

// Temporal convolution over the frame axis, "same" zero pad (odd kT).
// x: [T,C_in,H,W], w: [C_out,C_in,kT], b: [C_out] -> [T,C_out,H,W].
template <typename S>
TensorT<S> conv1d_temporal(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b) {
    detail::check_4d("conv1d_temporal", x);
    if (w.shape().size() != 3 || w.shape()[1] != x.shape()[1])
        throw std::invalid_argument("conv1d_temporal: shape mismatch x" + shape_str(x.shape()) +
                                    " w" + shape_str(w.shape()));
    int T = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    int cout = w.shape()[0], kt = w.shape()[2];
    if (b.shape() != std::vector<int>{cout})
        throw std::invalid_argument("conv1d_temporal: bias shape " + shape_str(b.shape()));
    int pt = kt / 2;
    int64_t hw = static_cast<int64_t>(H) * W;
    std::vector<S> out(static_cast<size_t>(T) * cout * hw);
    const auto& xv = x.data();
    const auto& wv = w.data();
    const auto& bv = b.data();
#pragma omp parallel for schedule(static) collapse(2)
    for (int t = 0; t < T; ++t)
        for (int o = 0; o < cout; ++o) {
            S* yp = out.data() + (static_cast<int64_t>(t) * cout + o) * hw;
            for (int64_t i = 0; i < hw; ++i) yp[i] = bv[o];
            for (int c = 0; c < C; ++c)
                for (int k = 0; k < kt; ++k) {
                    int it = t + k - pt;
                    if (it < 0 || it >= T) continue;
                    const S* xp = xv.data() + (static_cast<int64_t>(it) * C + c) * hw;
                    S wk = wv[(static_cast<int64_t>(o) * C + c) * kt + k];
                    for (int64_t i = 0; i < hw; ++i) yp[i] += wk * xp[i];
                }
        }
    auto xn = x.node(), wn = w.node(), bn = b.node();
    return TensorT<S>::make_op({T, cout, H, W}, std::move(out), {x, w, b},
                               [xn, wn, bn, T, C, cout, kt, pt, hw](NodeT<S>& y) {
        if (xn->requires_grad) {
            xn->ensure_grad();
#pragma omp parallel for schedule(static) collapse(2)
            for (int it = 0; it < T; ++it)
                for (int c = 0; c < C; ++c) {
                    S* gx = xn->grad.data() + (static_cast<int64_t>(it) * C + c) * hw;
                    for (int o = 0; o < cout; ++o)
                        for (int k = 0; k < kt; ++k) {
                            int t = it - k + pt;
                            if (t < 0 || t >= T) continue;
                            const S* gy = y.grad.data() + (static_cast<int64_t>(t) * cout + o) * hw;
                            S wk = wn->value[(static_cast<int64_t>(o) * C + c) * kt + k];
                            for (int64_t i = 0; i < hw; ++i) gx[i] += wk * gy[i];
                        }
                }
        }
        if (wn->requires_grad) {
            wn->ensure_grad();
#pragma omp parallel for schedule(static) collapse(2)
            for (int o = 0; o < cout; ++o)
                for (int c = 0; c < C; ++c)
                    for (int k = 0; k < kt; ++k) {
                        S acc = 0;
                        for (int t = 0; t < T; ++t) {
                            int it = t + k - pt;
                            if (it < 0 || it >= T) continue;
                            const S* gy = y.grad.data() + (static_cast<int64_t>(t) * cout + o) * hw;
                            const S* xp = xn->value.data() + (static_cast<int64_t>(it) * C + c) * hw;
                            acc += detail::dot_lanes(gy, xp, hw);
                        }
                        wn->grad[(static_cast<int64_t>(o) * C + c) * kt + k] += acc;
                    }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (int o = 0; o < cout; ++o) {
                S acc = 0;
                for (int t = 0; t < T; ++t) {
                    const S* gy = y.grad.data() + (static_cast<int64_t>(t) * cout + o) * hw;
                    acc += detail::sum_lanes(gy, hw);
                }
                bn->grad[o] += acc;
            }
        }
    });
}

// Spatial downsampling: zero-pad H,W up to even, then 2x2 stride-2 conv.
// w: [C_out, C_in, 2, 2] -> [T, C_out, ceil(H/2), ceil(W/2)].
template <typename S>
TensorT<S> downsample_conv(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b) {
    detail::check_4d("downsample_conv", x);
    if (w.shape().size() != 4 || w.shape()[1] != x.shape()[1] || w.shape()[2] != 2 || w.shape()[3] != 2)
        throw std::invalid_argument("downsample_conv: shape mismatch x" + shape_str(x.shape()) +
                                    " w" + shape_str(w.shape()));
    int T = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    int cout = w.shape()[0];
    int oh = (H + 1) / 2, ow = (W + 1) / 2;
    std::vector<S> out(static_cast<size_t>(T) * cout * oh * ow);
    const auto& xv = x.data();
    const auto& wv = w.data();
    const auto& bv = b.data();
#pragma omp parallel for schedule(static) collapse(2)
    for (int t = 0; t < T; ++t)
        for (int o = 0; o < cout; ++o) {
            S* yp = out.data() + (static_cast<int64_t>(t) * cout + o) * oh * ow;
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    S acc = bv[o];
                    for (int c = 0; c < C; ++c) {
                        const S* xp = xv.data() + (static_cast<int64_t>(t) * C + c) * H * W;
                        const S* wp = wv.data() + (static_cast<int64_t>(o) * C + c) * 4;
                        for (int ky = 0; ky < 2; ++ky) {
                            int iy = 2 * oy + ky;
                            if (iy >= H) continue;
                            for (int kx = 0; kx < 2; ++kx) {
                                int ix = 2 * ox + kx;
                                if (ix >= W) continue;
                                acc += wp[2 * ky + kx] * xp[static_cast<int64_t>(iy) * W + ix];
                            }
                        }
                    }
                    yp[static_cast<int64_t>(oy) * ow + ox] = acc;
                }
        }
    auto xn = x.node(), wn = w.node(), bn = b.node();
    return TensorT<S>::make_op({T, cout, oh, ow}, std::move(out), {x, w, b},
                               [xn, wn, bn, T, C, H, W, cout, oh, ow](NodeT<S>& y) {
        if (xn->requires_grad) {
            xn->ensure_grad();
#pragma omp parallel for schedule(static) collapse(2)
            for (int t = 0; t < T; ++t)
                for (int c = 0; c < C; ++c) {
                    S* gx = xn->grad.data() + (static_cast<int64_t>(t) * C + c) * H * W;
                    for (int o = 0; o < cout; ++o) {
                        const S* gy = y.grad.data() + (static_cast<int64_t>(t) * cout + o) * oh * ow;
                        const S* wp = wn->value.data() + (static_cast<int64_t>(o) * C + c) * 4;
                        for (int oy = 0; oy < oh; ++oy)
                            for (int ky = 0; ky < 2; ++ky) {
                                int iy = 2 * oy + ky;
                                if (iy >= H) continue;
                                for (int ox = 0; ox < ow; ++ox)
                                    for (int kx = 0; kx < 2; ++kx) {
                                        int ix = 2 * ox + kx;
                                        if (ix >= W) continue;
                                        gx[static_cast<int64_t>(iy) * W + ix] +=
                                            wp[2 * ky + kx] * gy[static_cast<int64_t>(oy) * ow + ox];
                                    }
                            }
                    }
                }
        }
        if (wn->requires_grad) {
            wn->ensure_grad();
#pragma omp parallel for schedule(static) collapse(2)
            for (int o = 0; o < cout; ++o)
                for (int c = 0; c < C; ++c) {
                    S* gw = wn->grad.data() + (static_cast<int64_t>(o) * C + c) * 4;
                    for (int ky = 0; ky < 2; ++ky)
                        for (int kx = 0; kx < 2; ++kx) {
                            S acc = 0;
                            for (int t = 0; t < T; ++t) {
                                const S* gy = y.grad.data() + (static_cast<int64_t>(t) * cout + o) * oh * ow;
                                const S* xp = xn->value.data() + (static_cast<int64_t>(t) * C + c) * H * W;
                                for (int oy = 0; oy < oh; ++oy) {
                                    int iy = 2 * oy + ky;
                                    if (iy >= H) continue;
                                    for (int ox = 0; ox < ow; ++ox) {
                                        int ix = 2 * ox + kx;
                                        if (ix >= W) continue;
                                        acc += gy[static_cast<int64_t>(oy) * ow + ox] * xp[static_cast<int64_t>(iy) * W + ix];
                                    }
                                }
                            }
                            gw[2 * ky + kx] += acc;
                        }
                }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (int o = 0; o < cout; ++o) {
                S acc = 0;
                for (int t = 0; t < T; ++t) {
                    const S* gy = y.grad.data() + (static_cast<int64_t>(t) * cout + o) * oh * ow;
                    acc += detail::sum_lanes(gy, static_cast<int64_t>(oh) * ow);
                }
                bn->grad[o] += acc;
            }
        }
    });
}

// ---- normalization ---------------------------------------------------------

// Layer norm over the channel axis. Accepts [T,C,H,W] (axis 1, per (t,h,w))
// or [N,C] (axis 1). gamma, beta: [C].
template <typename S>
TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gamma, const TensorT<S>& beta,
                      S eps = S(1e-5)) {
    const auto& sh = x.shape();
    int64_t outer, inner;
    int C;
    if (sh.size() == 4) {
        outer = sh[0];
        C = sh[1];
        inner = static_cast<int64_t>(sh[2]) * sh[3];
    } else if (sh.size() == 2) {
        outer = sh[0];
        C = sh[1];
        inner = 1;
    } else {
        throw std::invalid_argument("layer_norm: expected [T,C,H,W] or [N,C], got " + shape_str(sh));
    }
    if (gamma.shape() != std::vector<int>{C} || beta.shape() != std::vector<int>{C})
        throw std::invalid_argument("layer_norm: gamma/beta shape mismatch for C=" + std::to_string(C));

    auto xhat = std::make_shared<std::vector<S>>(x.data().size());
    auto invstd = std::make_shared<std::vector<S>>(static_cast<size_t>(outer * inner));
    std::vector<S> out(x.data().size());
    const auto& xv = x.data();
    const auto& gv = gamma.data();
    const auto& bv = beta.data();
#pragma omp parallel for schedule(static)
    for (int64_t n = 0; n < outer; ++n)
        for (int64_t i = 0; i < inner; ++i) {
            S mean = 0;
            for (int c = 0; c < C; ++c) mean += xv[(n * C + c) * inner + i];
            mean /= static_cast<S>(C);
            S var = 0;
            for (int c = 0; c < C; ++c) {
                S d = xv[(n * C + c) * inner + i] - mean;
                var += d * d;
            }
            var /= static_cast<S>(C);
            S istd = S(1) / std::sqrt(var + eps);
            (*invstd)[n * inner + i] = istd;
            for (int c = 0; c < C; ++c) {
                S xh = (xv[(n * C + c) * inner + i] - mean) * istd;
                (*xhat)[(n * C + c) * inner + i] = xh;
                out[(n * C + c) * inner + i] = gv[c] * xh + bv[c];
            }
        }
    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    return TensorT<S>::make_op(sh, std::move(out), {x, gamma, beta},
                               [xn, gn, bn, xhat, invstd, outer, C, inner](NodeT<S>& y) {
        if (xn->requires_grad) {
            xn->ensure_grad();
#pragma omp parallel for schedule(static)
            for (int64_t n = 0; n < outer; ++n)
                for (int64_t i = 0; i < inner; ++i) {
                    S mean_dxhat = 0, mean_dxhat_xhat = 0;
                    for (int c = 0; c < C; ++c) {
                        S dxh = y.grad[(n * C + c) * inner + i] * gn->value[c];
                        S xh = (*xhat)[(n * C + c) * inner + i];
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * xh;
                    }
                    mean_dxhat /= static_cast<S>(C);
                    mean_dxhat_xhat /= static_cast<S>(C);
                    S istd = (*invstd)[n * inner + i];
                    for (int c = 0; c < C; ++c) {
                        S dxh = y.grad[(n * C + c) * inner + i] * gn->value[c];
                        S xh = (*xhat)[(n * C + c) * inner + i];
                        xn->grad[(n * C + c) * inner + i] +=
                            istd * (dxh - mean_dxhat - xh * mean_dxhat_xhat);
                    }
                }
        }
        if (gn->requires_grad) {
            gn->ensure_grad();
            for (int c = 0; c < C; ++c) {
                S acc = 0;
                for (int64_t n = 0; n < outer; ++n)
                    for (int64_t i = 0; i < inner; ++i)
                        acc += y.grad[(n * C + c) * inner + i] * (*xhat)[(n * C + c) * inner + i];
                gn->grad[c] += acc;
            }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (int c = 0; c < C; ++c) {
                S acc = 0;
                for (int64_t n = 0; n < outer; ++n)
                    for (int64_t i = 0; i < inner; ++i) acc += y.grad[(n * C + c) * inner + i];
                bn->grad[c] += acc;
            }
        }
    });
}

// ---- shape plumbing ---------------------------------------------------------

// Channel slice of [T,C,H,W].
template <typename S>
TensorT<S> narrow_channels(const TensorT<S>& x, int start, int len) {
    detail::check_4d("narrow_channels", x);
    int T = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    if (start < 0 || len <= 0 || start + len > C)
        throw std::invalid_argument("narrow_channels: range [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") out of C=" + std::to_string(C));
    int64_t hw = static_cast<int64_t>(H) * W;
    std::vector<S> out(static_cast<size_t>(T) * len * hw);
    const auto& xv = x.data();
    for (int t = 0; t < T; ++t)
        std::copy(xv.begin() + (static_cast<int64_t>(t) * C + start) * hw,
                  xv.begin() + (static_cast<int64_t>(t) * C + start + len) * hw,
                  out.begin() + static_cast<int64_t>(t) * len * hw);
    auto xn = x.node();
    return TensorT<S>::make_op({T, len, H, W}, std::move(out), {x},
                               [xn, T, C, start, len, hw](NodeT<S>& y) {
        xn->ensure_grad();
        for (int t = 0; t < T; ++t) {
            const S* gy = y.grad.data() + static_cast<int64_t>(t) * len * hw;
            S* gx = xn->grad.data() + (static_cast<int64_t>(t) * C + start) * hw;
            for (int64_t i = 0; i < static_cast<int64_t>(len) * hw; ++i) gx[i] += gy[i];
        }
    });
}

template <typename S>
TensorT<S> concat_channels(const std::vector<TensorT<S>>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_channels: empty input");
    detail::check_4d("concat_channels", xs[0]);
    int T = xs[0].shape()[0], H = xs[0].shape()[2], W = xs[0].shape()[3];
    int ctot = 0;
    for (const auto& x : xs) {
        detail::check_4d("concat_channels", x);
        if (x.shape()[0] != T || x.shape()[2] != H || x.shape()[3] != W)
            throw std::invalid_argument("concat_channels: mismatched shapes");
        ctot += x.shape()[1];
    }
    int64_t hw = static_cast<int64_t>(H) * W;
    std::vector<S> out(static_cast<size_t>(T) * ctot * hw);
    int off = 0;
    std::vector<int> offsets, lens;
    for (const auto& x : xs) {
        int c = x.shape()[1];
        offsets.push_back(off);
        lens.push_back(c);
        for (int t = 0; t < T; ++t)
            std::copy(x.data().begin() + static_cast<int64_t>(t) * c * hw,
                      x.data().begin() + static_cast<int64_t>(t + 1) * c * hw,
                      out.begin() + (static_cast<int64_t>(t) * ctot + off) * hw);
        off += c;
    }
    std::vector<std::shared_ptr<NodeT<S>>> nodes;
    for (const auto& x : xs) nodes.push_back(x.node());
    return TensorT<S>::make_op({T, ctot, H, W}, std::move(out), xs,
                               [nodes, offsets, lens, T, ctot, hw](NodeT<S>& y) {
        for (size_t k = 0; k < nodes.size(); ++k) {
            if (!nodes[k]->requires_grad) continue;
            nodes[k]->ensure_grad();
            int c = lens[k], off = offsets[k];
            for (int t = 0; t < T; ++t) {
                const S* gy = y.grad.data() + (static_cast<int64_t>(t) * ctot + off) * hw;
                S* gx = nodes[k]->grad.data() + static_cast<int64_t>(t) * c * hw;
                for (int64_t i = 0; i < static_cast<int64_t>(c) * hw; ++i) gx[i] += gy[i];
            }
        }
    });
}

// Slice along the first axis, any rank.
template <typename S>
TensorT<S> narrow_dim0(const TensorT<S>& x, int start, int len) {
    if (x.shape().empty() || start < 0 || len <= 0 || start + len > x.shape()[0])
        throw std::invalid_argument("narrow_dim0: bad range for shape " + shape_str(x.shape()));
    int64_t stride = x.numel() / x.shape()[0];
    std::vector<int> oshape = x.shape();
    oshape[0] = len;
    std::vector<S> out(x.data().begin() + static_cast<int64_t>(start) * stride,
                       x.data().begin() + static_cast<int64_t>(start + len) * stride);
    auto xn = x.node();
    return TensorT<S>::make_op(std::move(oshape), std::move(out), {x},
                               [xn, start, stride](NodeT<S>& y) {
        xn->ensure_grad();
        S* gx = xn->grad.data() + static_cast<int64_t>(start) * stride;
        for (size_t i = 0; i < y.grad.size(); ++i) gx[i] += y.grad[i];
    });
}

// Stack 1-D tensors of equal length into [B, D].
template <typename S>
TensorT<S> stack_rows(const std::vector<TensorT<S>>& xs) {
    if (xs.empty()) throw std::invalid_argument("stack_rows: empty input");
    int D = xs[0].shape()[0];
    for (const auto& x : xs)
        if (x.shape() != std::vector<int>{D})
            throw std::invalid_argument("stack_rows: mismatched shapes");
    int B = static_cast<int>(xs.size());
    std::vector<S> out(static_cast<size_t>(B) * D);
    for (int i = 0; i < B; ++i)
        std::copy(xs[i].data().begin(), xs[i].data().end(), out.begin() + static_cast<int64_t>(i) * D);
    std::vector<std::shared_ptr<NodeT<S>>> nodes;
    for (const auto& x : xs) nodes.push_back(x.node());
    return TensorT<S>::make_op({B, D}, std::move(out), xs, [nodes, D](NodeT<S>& y) {
        for (size_t i = 0; i < nodes.size(); ++i) {
            if (!nodes[i]->requires_grad) continue;
            nodes[i]->ensure_grad();
            for (int d = 0; d < D; ++d) nodes[i]->grad[d] += y.grad[i * D + d];
        }
    });
}

// y = x / ||x||_2 on a 1-D tensor.
template <typename S>
TensorT<S> l2_normalize(const TensorT<S>& x) {
    if (x.shape().size() != 1)
        throw std::invalid_argument("l2_normalize: expected 1-D, got " + shape_str(x.shape()));
    S sq = 0;
    for (S v : x.data()) sq += v * v;
    S norm = std::sqrt(sq + S(1e-24));
    std::vector<S> out(x.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] / norm;
    auto xn = x.node();
    auto yv = std::make_shared<std::vector<S>>(out);
    return TensorT<S>::make_op(x.shape(), std::move(out), {x}, [xn, yv, norm](NodeT<S>& y) {
        xn->ensure_grad();
        S dot = 0;
        for (size_t i = 0; i < y.grad.size(); ++i) dot += y.grad[i] * (*yv)[i];
        for (size_t i = 0; i < y.grad.size(); ++i)
            xn->grad[i] += (y.grad[i] - (*yv)[i] * dot) / norm;
    });
}

// ---- backward ---------------------------------------------------------------

// Reverse-mode sweep from a scalar loss. Visits nodes in reverse topological
// order exactly once; intermediate grad buffers are released as soon as the
// node's backward has run.
template <typename S>
void backward(const TensorT<S>& loss) {
    if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
    auto root = loss.node();

    std::vector<NodeT<S>*> order;
    std::vector<std::pair<NodeT<S>*, size_t>> stack;
    std::vector<NodeT<S>*> visited;
    auto is_visited = [&](NodeT<S>* n) {
        return std::find(visited.begin(), visited.end(), n) != visited.end();
    };
    // iterative DFS; parents are pushed in declaration order so the
    // resulting order (and therefore accumulation order) is deterministic
    stack.push_back({root.get(), 0});
    visited.push_back(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            NodeT<S>* parent = node->parents[next++].get();
            if (!is_visited(parent)) {
                visited.push_back(parent);
                stack.push_back({parent, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] = S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodeT<S>* node = *it;
        if (node->backward_fn) {
            node->ensure_grad();
            node->backward_fn(*node);
        }
        if (!node->parents.empty()) node->grad = {};  // keep leaf grads only
    }
}

// Linear scan beats hashing for the graph sizes here; switch to a set if
// graphs grow beyond a few thousand nodes.

// ---- finite-difference check -------------------------------------------------

// Central-difference gradient check. f must rebuild the graph from the
// current leaf values on every call and return a scalar.
template <typename S>
double grad_check(const std::function<TensorT<S>(void)>& f, std::vector<TensorT<S>> leaves,
                  double eps = 1e-5) {
    TensorT<S> loss = f();
    for (auto& leaf : leaves) leaf.zero_grad();
    backward(loss);

    std::vector<std::vector<S>> analytic;
    for (auto& leaf : leaves) analytic.push_back(leaf.grad());

    double max_rel = 0.0;
    for (size_t li = 0; li < leaves.size(); ++li) {
        auto& leaf = leaves[li];
        for (size_t i = 0; i < leaf.data().size(); ++i) {
            S orig = leaf.data()[i];
            leaf.data()[i] = orig + static_cast<S>(eps);
            double fp = static_cast<double>(f().data()[0]);
            leaf.data()[i] = orig - static_cast<S>(eps);
            double fm = static_cast<double>(f().data()[0]);
            leaf.data()[i] = orig;
            double numeric = (fp - fm) / (2.0 * eps);
            double a = static_cast<double>(analytic[li][i]);
            double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
        }
    }
    return max_rel;
}

using Tensor = TensorT<double>;
using TensorF = TensorT<float>;

}  // namespace horgait
