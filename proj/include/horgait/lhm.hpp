// SPDX-License-Identifier: Apache-2.0
//
// Recursive gated convolution blocks. A gated convolution multiplies a
// projected value branch elementwise with a depthwise-convolved gate
// branch; the order-n variant applies that interaction recursively with a
// geometric channel schedule so the split width stays 2C.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "horgait/rng.hpp"
#include "horgait/tensor.hpp"

namespace horgait {

// Whether the shared 7x7 depthwise filter runs once over the concatenated
// gate block or separately per order. The two are numerically equivalent
// for a per-channel filter; the switch exists to make that explicit.
enum class DwconvMode { shared, per_order };

template <typename S>
using NamedParams = std::vector<std::pair<std::string, TensorT<S>>>;

// C_k = C / 2^(order-k-1); ascending, ends at C, and C_0 + sum C_k = 2C.
inline std::vector<int> channel_schedule(int channels, int order) {
    if (order < 1) throw std::invalid_argument("channel_schedule: order must be >= 1");
    int denom = 1 << (order - 1);
    if (channels % denom != 0)
        throw std::invalid_argument("channel_schedule: C=" + std::to_string(channels) +
                                    " not divisible by 2^" + std::to_string(order - 1));
    std::vector<int> out(static_cast<size_t>(order));
    for (int k = 0; k < order; ++k) out[static_cast<size_t>(k)] = channels / (1 << (order - k - 1));
    return out;
}

namespace init {

template <typename S>
TensorT<S> trunc_normal(std::vector<int> shape, SplitMix64& rng, double std_dev = 0.02) {
    std::vector<S> data(static_cast<size_t>(numel_of(shape)));
    for (auto& v : data) v = static_cast<S>(rng.truncated_normal(std_dev));
    return TensorT<S>::leaf(std::move(shape), std::move(data), true);
}

template <typename S>
TensorT<S> zeros(std::vector<int> shape) {
    return TensorT<S>::zeros(std::move(shape), true);
}

template <typename S>
TensorT<S> ones(std::vector<int> shape) {
    return TensorT<S>::full(std::move(shape), S(1), true);
}

}  // namespace init

// Pseudo-3D residual gate: temporal (kT=3) -> spatial 3x3 -> temporal (kT=3),
// plus a skip that is identity when C_in == C_out and a pointwise map
// otherwise.
template <typename S>
struct DeepCnnParamsT {
    int c_in = 0, c_out = 0;
    TensorT<S> t1_w, t1_b;  // [c_out, c_in, 3]
    TensorT<S> s_w, s_b;    // [c_out, c_out, 3, 3]
    TensorT<S> t2_w, t2_b;  // [c_out, c_out, 3]
    TensorT<S> skip_w, skip_b;  // [c_out, c_in], only when c_in != c_out

    static DeepCnnParamsT init(int c_in, int c_out, SplitMix64& rng) {
        DeepCnnParamsT p;
        p.c_in = c_in;
        p.c_out = c_out;
        p.t1_w = init::trunc_normal<S>({c_out, c_in, 3}, rng);
        p.t1_b = init::zeros<S>({c_out});
        p.s_w = init::trunc_normal<S>({c_out, c_out, 3, 3}, rng);
        p.s_b = init::zeros<S>({c_out});
        p.t2_w = init::trunc_normal<S>({c_out, c_out, 3}, rng);
        p.t2_b = init::zeros<S>({c_out});
        if (c_in != c_out) {
            p.skip_w = init::trunc_normal<S>({c_out, c_in}, rng);
            p.skip_b = init::zeros<S>({c_out});
        }
        return p;
    }

    void collect(const std::string& prefix, NamedParams<S>& out) {
        out.emplace_back(prefix + ".t1.w", t1_w);
        out.emplace_back(prefix + ".t1.b", t1_b);
        out.emplace_back(prefix + ".s.w", s_w);
        out.emplace_back(prefix + ".s.b", s_b);
        out.emplace_back(prefix + ".t2.w", t2_w);
        out.emplace_back(prefix + ".t2.b", t2_b);
        if (skip_w.defined()) {
            out.emplace_back(prefix + ".skip.w", skip_w);
            out.emplace_back(prefix + ".skip.b", skip_b);
        }
    }
};

template <typename S>
TensorT<S> deep_cnn_gate_forward(const TensorT<S>& p, const DeepCnnParamsT<S>& params) {
    TensorT<S> branch = conv1d_temporal(p, params.t1_w, params.t1_b);
    branch = conv2d(branch, params.s_w, params.s_b, /*stride=*/1, /*pad=*/1);
    branch = conv1d_temporal(branch, params.t2_w, params.t2_b);
    TensorT<S> skip = params.skip_w.defined() ? pointwise_linear(p, params.skip_w, params.skip_b) : p;
    return add(skip, branch);
}

template <typename S>
struct GnConvParamsT {
    int order = 1;
    int channels = 0;
    S alpha = S(1);
    DwconvMode dwconv_mode = DwconvMode::shared;
    std::vector<int> schedule;  // C_0 .. C_{order-1}

    TensorT<S> phi_in_w, phi_in_b;    // [2C, C]
    TensorT<S> dw_w;                  // [sum C_k, 7, 7]
    std::vector<DeepCnnParamsT<S>> gates;  // g_1 .. g_{order-1}
    TensorT<S> phi_out_w, phi_out_b;  // [C, C]

    static GnConvParamsT init(int channels, int order, SplitMix64& rng, S alpha = S(1),
                              DwconvMode mode = DwconvMode::shared) {
        GnConvParamsT p;
        p.order = order;
        p.channels = channels;
        p.alpha = alpha;
        p.dwconv_mode = mode;
        p.schedule = channel_schedule(channels, order);
        int q_total = 0;
        for (int c : p.schedule) q_total += c;
        p.phi_in_w = init::trunc_normal<S>({2 * channels, channels}, rng);
        p.phi_in_b = init::zeros<S>({2 * channels});
        p.dw_w = init::trunc_normal<S>({q_total, 7, 7}, rng);
        for (int k = 1; k < order; ++k)
            p.gates.push_back(DeepCnnParamsT<S>::init(p.schedule[static_cast<size_t>(k - 1)],
                                                      p.schedule[static_cast<size_t>(k)], rng));
        p.phi_out_w = init::trunc_normal<S>({channels, channels}, rng);
        p.phi_out_b = init::zeros<S>({channels});
        return p;
    }

    void collect(const std::string& prefix, NamedParams<S>& out) {
        out.emplace_back(prefix + ".phi_in.w", phi_in_w);
        out.emplace_back(prefix + ".phi_in.b", phi_in_b);
        out.emplace_back(prefix + ".dw.w", dw_w);
        for (size_t k = 0; k < gates.size(); ++k)
            gates[k].collect(prefix + ".gate" + std::to_string(k + 1), out);
        out.emplace_back(prefix + ".phi_out.w", phi_out_w);
        out.emplace_back(prefix + ".phi_out.b", phi_out_b);
    }
};

// Order-1 gated convolution:
//   [p0, q0] = phi_in(x); y = phi_out((f(q0) . p0 + p0) / alpha)
template <typename S>
TensorT<S> gconv_forward(const TensorT<S>& x, const GnConvParamsT<S>& params) {
    if (params.order != 1) throw std::invalid_argument("gconv_forward: params must have order 1");
    int C = params.channels;
    TensorT<S> proj = pointwise_linear(x, params.phi_in_w, params.phi_in_b);
    TensorT<S> p0 = narrow_channels(proj, 0, C);
    TensorT<S> q0 = narrow_channels(proj, C, C);
    TensorT<S> fq = depthwise_conv2d(q0, params.dw_w);
    TensorT<S> p1 = scale(add(mul(fq, p0), p0), S(1) / params.alpha);
    return pointwise_linear(p1, params.phi_out_w, params.phi_out_b);
}

// Order-n recursive gated convolution. phi_in splits into p_0 (C_0) and
// q_0..q_{n-1} (schedule widths); the 7x7 depthwise filter covers the whole
// q block; then p_{k+1} = (f(q_k) . g_k(p_k) + g_k(p_k)) / alpha with g_0
// the identity. phi_out consumes p_n (C channels).
template <typename S>
TensorT<S> gnconv_forward(const TensorT<S>& x, const GnConvParamsT<S>& params) {
    int C = params.channels;
    const auto& sched = params.schedule;
    int order = params.order;
    int c0 = sched[0];

    TensorT<S> proj = pointwise_linear(x, params.phi_in_w, params.phi_in_b);
    TensorT<S> p = narrow_channels(proj, 0, c0);

    int q_total = 0;
    for (int c : sched) q_total += c;

    std::vector<TensorT<S>> fq(static_cast<size_t>(order));
    if (params.dwconv_mode == DwconvMode::shared) {
        TensorT<S> q_cat = narrow_channels(proj, c0, q_total);
        TensorT<S> dw = depthwise_conv2d(q_cat, params.dw_w);
        int off = 0;
        for (int k = 0; k < order; ++k) {
            fq[static_cast<size_t>(k)] = narrow_channels(dw, off, sched[static_cast<size_t>(k)]);
            off += sched[static_cast<size_t>(k)];
        }
    } else {
        int off_q = c0, off_w = 0;
        for (int k = 0; k < order; ++k) {
            int ck = sched[static_cast<size_t>(k)];
            TensorT<S> qk = narrow_channels(proj, off_q, ck);
            TensorT<S> wk = narrow_dim0(params.dw_w, off_w, ck);
            fq[static_cast<size_t>(k)] = depthwise_conv2d(qk, wk);
            off_q += ck;
            off_w += ck;
        }
    }

    for (int k = 0; k < order; ++k) {
        TensorT<S> gp = (k == 0) ? p : deep_cnn_gate_forward(p, params.gates[static_cast<size_t>(k - 1)]);
        p = scale(add(mul(fq[static_cast<size_t>(k)], gp), gp), S(1) / params.alpha);
    }
    if (p.shape()[1] != C)
        throw std::logic_error("gnconv_forward: recursion ended with wrong channel count");
    return pointwise_linear(p, params.phi_out_w, params.phi_out_b);
}

// FFN: norm -> C -> 4C -> GELU -> C, per spatiotemporal position.
template <typename S>
struct FfnParamsT {
    TensorT<S> norm_gamma, norm_beta;
    TensorT<S> lin1_w, lin1_b;  // [4C, C]
    TensorT<S> lin2_w, lin2_b;  // [C, 4C]

    static FfnParamsT init(int channels, SplitMix64& rng) {
        FfnParamsT p;
        p.norm_gamma = init::ones<S>({channels});
        p.norm_beta = init::zeros<S>({channels});
        p.lin1_w = init::trunc_normal<S>({4 * channels, channels}, rng);
        p.lin1_b = init::zeros<S>({4 * channels});
        p.lin2_w = init::trunc_normal<S>({channels, 4 * channels}, rng);
        p.lin2_b = init::zeros<S>({channels});
        return p;
    }

    void collect(const std::string& prefix, NamedParams<S>& out) {
        out.emplace_back(prefix + ".norm.gamma", norm_gamma);
        out.emplace_back(prefix + ".norm.beta", norm_beta);
        out.emplace_back(prefix + ".lin1.w", lin1_w);
        out.emplace_back(prefix + ".lin1.b", lin1_b);
        out.emplace_back(prefix + ".lin2.w", lin2_w);
        out.emplace_back(prefix + ".lin2.b", lin2_b);
    }
};

template <typename S>
TensorT<S> ffn_forward(const TensorT<S>& x, const FfnParamsT<S>& params) {
    TensorT<S> h = layer_norm(x, params.norm_gamma, params.norm_beta);
    h = pointwise_linear(h, params.lin1_w, params.lin1_b);
    h = gelu(h);
    return pointwise_linear(h, params.lin2_w, params.lin2_b);
}

// LHM block, pre-norm residual topology:
//   z = x + gnconv(norm1(x)); y = z + ffn(z)
template <typename S>
struct LhmBlockParamsT {
    TensorT<S> norm1_gamma, norm1_beta;
    GnConvParamsT<S> gnconv;
    FfnParamsT<S> ffn;

    static LhmBlockParamsT init(int channels, int order, SplitMix64& rng, S alpha = S(1),
                                DwconvMode mode = DwconvMode::shared) {
        LhmBlockParamsT p;
        p.norm1_gamma = init::ones<S>({channels});
        p.norm1_beta = init::zeros<S>({channels});
        p.gnconv = GnConvParamsT<S>::init(channels, order, rng, alpha, mode);
        p.ffn = FfnParamsT<S>::init(channels, rng);
        return p;
    }

    void collect(const std::string& prefix, NamedParams<S>& out) {
        out.emplace_back(prefix + ".norm1.gamma", norm1_gamma);
        out.emplace_back(prefix + ".norm1.beta", norm1_beta);
        gnconv.collect(prefix + ".gnconv", out);
        ffn.collect(prefix + ".ffn", out);
    }
};

template <typename S>
TensorT<S> lhm_block_forward(const TensorT<S>& x, const LhmBlockParamsT<S>& params) {
    TensorT<S> z = add(x, gnconv_forward(layer_norm(x, params.norm1_gamma, params.norm1_beta),
                                         params.gnconv));
    return add(z, ffn_forward(z, params.ffn));
}

}  // namespace horgait
