// SPDX-License-Identifier: Apache-2.0
//
// 4-stage backbone over 64x44 depth-map frames: stride-1 stem, LHM blocks
// per stage with a per-stage interaction order, 2x spatial downsampling
// between stages, and a mean/max/linear embedding head.
#pragma once

#include <array>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "horgait/lhm.hpp"
#include "horgait/tensor.hpp"

namespace horgait {

struct StageConfig {
    int order = 1;
    int depth = 1;
    int channels = 32;
};

struct ModelConfig {
    int stem_channels = 32;
    std::vector<int> depths = {1, 1, 2, 1};
    int embedding_dim = 128;
    int num_classes = 0;
    double alpha = 1.0;
    DwconvMode dwconv_mode = DwconvMode::shared;

    static constexpr int kInputHeight = 64;
    static constexpr int kInputWidth = 44;
    static constexpr int kInputChannels = 3;
};

// "a,b,c,d" -> 4 orders, each >= 1.
std::vector<int> parse_order_schedule(const std::string& s);

// The nine order schedules of the reference experiments.
const std::vector<std::vector<int>>& all_order_schedules();

template <typename S>
struct ModelParamsT {
    ModelConfig cfg;
    std::vector<int> orders;

    TensorT<S> stem_w, stem_b;          // [C, 3, 3, 3]
    TensorT<S> stem_gamma, stem_beta;   // [C]
    std::vector<std::vector<LhmBlockParamsT<S>>> stages;
    std::vector<TensorT<S>> down_w, down_b;  // 3 inter-stage downsamples
    TensorT<S> head_w, head_b;          // [D, 8C]
    TensorT<S> cls_w, cls_b;            // [K, D], optional (num_classes > 0)

    NamedParams<S> collect() {
        NamedParams<S> out;
        out.emplace_back("stem.conv.w", stem_w);
        out.emplace_back("stem.conv.b", stem_b);
        out.emplace_back("stem.norm.gamma", stem_gamma);
        out.emplace_back("stem.norm.beta", stem_beta);
        for (size_t s = 0; s < stages.size(); ++s)
            for (size_t b = 0; b < stages[s].size(); ++b)
                stages[s][b].collect("stage" + std::to_string(s + 1) + ".block" + std::to_string(b), out);
        for (size_t d = 0; d < down_w.size(); ++d) {
            out.emplace_back("down" + std::to_string(d + 1) + ".w", down_w[d]);
            out.emplace_back("down" + std::to_string(d + 1) + ".b", down_b[d]);
        }
        out.emplace_back("head.w", head_w);
        out.emplace_back("head.b", head_b);
        if (cls_w.defined()) {
            out.emplace_back("cls.w", cls_w);
            out.emplace_back("cls.b", cls_b);
        }
        return out;
    }
};

// Stage channels are [C, 2C, 4C, 8C]. Each stage requires its channel count
// divisible by 2^(order-1) with a lowest-order split of at least 2 channels.
template <typename S>
ModelParamsT<S> build_model(const ModelConfig& cfg, const std::vector<int>& orders, uint64_t seed) {
    if (orders.size() != 4) throw std::invalid_argument("build_model: need exactly 4 orders");
    if (cfg.depths.size() != 4) throw std::invalid_argument("build_model: need exactly 4 stage depths");
    SplitMix64 rng(seed);
    ModelParamsT<S> m;
    m.cfg = cfg;
    m.orders = orders;

    for (int s = 0; s < 4; ++s) {
        int c = cfg.stem_channels << s;
        int order = orders[static_cast<size_t>(s)];
        int denom = 1 << (order - 1);
        if (c % denom != 0 || c / denom < 2)
            throw std::invalid_argument("build_model: stage " + std::to_string(s + 1) + " channels " +
                                        std::to_string(c) + " cannot host order " + std::to_string(order));
    }

    int c = cfg.stem_channels;
    m.stem_w = init::trunc_normal<S>({c, ModelConfig::kInputChannels, 3, 3}, rng);
    m.stem_b = init::zeros<S>({c});
    m.stem_gamma = init::ones<S>({c});
    m.stem_beta = init::zeros<S>({c});

    for (int s = 0; s < 4; ++s) {
        int sc = cfg.stem_channels << s;
        std::vector<LhmBlockParamsT<S>> blocks;
        for (int b = 0; b < cfg.depths[static_cast<size_t>(s)]; ++b)
            blocks.push_back(LhmBlockParamsT<S>::init(sc, orders[static_cast<size_t>(s)], rng,
                                                      static_cast<S>(cfg.alpha), cfg.dwconv_mode));
        m.stages.push_back(std::move(blocks));
        if (s < 3) {
            m.down_w.push_back(init::trunc_normal<S>({2 * sc, sc, 2, 2}, rng));
            m.down_b.push_back(init::zeros<S>({2 * sc}));
        }
    }

    int top = cfg.stem_channels * 8;
    m.head_w = init::trunc_normal<S>({cfg.embedding_dim, top}, rng);
    m.head_b = init::zeros<S>({cfg.embedding_dim});
    if (cfg.num_classes > 0) {
        m.cls_w = init::trunc_normal<S>({cfg.num_classes, cfg.embedding_dim}, rng);
        m.cls_b = init::zeros<S>({cfg.num_classes});
    }
    return m;
}

template <typename S>
struct ForwardResult {
    TensorT<S> embedding;  // unit L2 norm, [D]
    TensorT<S> pre_norm;   // [D], feeds the classifier head
    std::vector<std::array<int, 4>> stage_shapes;  // output shape after each stage
};

template <typename S>
ForwardResult<S> model_forward(const TensorT<S>& x, ModelParamsT<S>& m) {
    const std::vector<int>& sh = x.shape();
    if (sh.size() != 4 || sh[1] != ModelConfig::kInputChannels ||
        sh[2] != ModelConfig::kInputHeight || sh[3] != ModelConfig::kInputWidth)
        throw std::invalid_argument("model_forward: expected [T,3,64,44], got " + shape_str(sh));

    ForwardResult<S> out;
    TensorT<S> h = conv2d(x, m.stem_w, m.stem_b, /*stride=*/1, /*pad=*/1);
    h = layer_norm(h, m.stem_gamma, m.stem_beta);
    for (int s = 0; s < 4; ++s) {
        for (auto& block : m.stages[static_cast<size_t>(s)]) h = lhm_block_forward(h, block);
        out.stage_shapes.push_back({h.shape()[0], h.shape()[1], h.shape()[2], h.shape()[3]});
        if (s < 3) h = downsample_conv(h, m.down_w[static_cast<size_t>(s)], m.down_b[static_cast<size_t>(s)]);
    }
    TensorT<S> pooled = temporal_max(spatial_mean(h));  // [8C]
    out.pre_norm = linear(pooled, m.head_w, m.head_b);  // [D]
    out.embedding = l2_normalize(out.pre_norm);
    return out;
}

// Logits from the pre-normalization embedding.
template <typename S>
TensorT<S> classify_head(const TensorT<S>& pre_norm, ModelParamsT<S>& m) {
    if (!m.cls_w.defined()) throw std::logic_error("classify_head: model built without classes");
    return linear(pre_norm, m.cls_w, m.cls_b);
}

// Analytic shape trace plus parameter count, no forward pass.
std::string describe_model(const ModelConfig& cfg, const std::vector<int>& orders);

}  // namespace horgait
