// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference suites over every differentiable op and the composed
// LHM block, on small randomized shapes. Shared by the gradcheck CLI
// subcommand and the acceptance gate.
#pragma once

#include <string>
#include <vector>

#include "horgait/lhm.hpp"
#include "horgait/rng.hpp"
#include "horgait/tensor.hpp"
#include "horgait/trainer.hpp"

namespace horgait {

struct GradCheckEntry {
    std::string op;
    double max_rel_err;
};

inline Tensor random_tensor(std::vector<int> shape, SplitMix64& rng, bool requires_grad = true,
                            double scale_v = 1.0) {
    std::vector<double> data(static_cast<size_t>(numel_of(shape)));
    for (auto& v : data) v = scale_v * (2.0 * rng.uniform() - 1.0);
    return Tensor::leaf(std::move(shape), std::move(data), requires_grad);
}

inline std::vector<GradCheckEntry> run_tensor_gradcheck(uint64_t seed = 42) {
    SplitMix64 rng(seed);
    std::vector<GradCheckEntry> out;
    auto check = [&out](const std::string& op, const std::function<Tensor(void)>& f,
                        std::vector<Tensor> leaves) {
        out.push_back({op, grad_check<double>(f, std::move(leaves))});
    };

    {
        Tensor x = random_tensor({2, 3}, rng), y = random_tensor({2, 3}, rng);
        check("add", [&] { return sum(add(x, y)); }, {x, y});
        check("mul_elementwise", [&] { return sum(mul(x, y)); }, {x, y});
        check("scale", [&] { return sum(scale(x, 0.7)); }, {x});
        check("gelu", [&] { return sum(gelu(x)); }, {x});
    }
    {
        Tensor x = random_tensor({4, 3}, rng);
        Tensor w = random_tensor({2, 3}, rng), b = random_tensor({2}, rng);
        check("linear", [&] { return sum(mul(linear(x, w, b), linear(x, w, b))); }, {x, w, b});
    }
    {
        Tensor x = random_tensor({2, 3, 5, 4}, rng);
        Tensor w = random_tensor({4, 3}, rng), b = random_tensor({4}, rng);
        check("pointwise_linear", [&] { return sum(gelu(pointwise_linear(x, w, b))); }, {x, w, b});
    }
    {
        Tensor x = random_tensor({2, 2, 6, 5}, rng);
        Tensor w = random_tensor({3, 2, 3, 3}, rng), b = random_tensor({3}, rng);
        check("conv2d", [&] { return sum(gelu(conv2d(x, w, b, 1, 1))); }, {x, w, b});
        Tensor w2 = random_tensor({3, 2, 3, 3}, rng);
        check("conv2d_stride2", [&] { return sum(gelu(conv2d(x, w2, b, 2, 1))); }, {x, w2, b});
    }
    {
        Tensor x = random_tensor({2, 3, 8, 8}, rng);
        Tensor w = random_tensor({3, 7, 7}, rng);
        check("depthwise_7x7", [&] { return sum(gelu(depthwise_conv2d(x, w))); }, {x, w});
    }
    {
        Tensor x = random_tensor({4, 2, 4, 3}, rng);
        Tensor w = random_tensor({3, 2, 3}, rng), b = random_tensor({3}, rng);
        check("conv1d_temporal", [&] { return sum(gelu(conv1d_temporal(x, w, b))); }, {x, w, b});
    }
    {
        Tensor x = random_tensor({2, 2, 5, 5}, rng);
        Tensor w = random_tensor({4, 2, 2, 2}, rng), b = random_tensor({4}, rng);
        check("downsample_conv", [&] { return sum(gelu(downsample_conv(x, w, b))); }, {x, w, b});
    }
    {
        Tensor x = random_tensor({2, 4, 3, 3}, rng);
        Tensor gamma = random_tensor({4}, rng, true, 0.5);
        Tensor beta = random_tensor({4}, rng);
        check("layer_norm", [&] { return sum(gelu(layer_norm(x, gamma, beta))); }, {x, gamma, beta});
    }
    {
        Tensor x = random_tensor({2, 3, 4, 4}, rng);
        check("spatial_mean", [&] { return sum(gelu(spatial_mean(x))); }, {x});
    }
    {
        // well-separated values avoid max ties
        Tensor x = Tensor::leaf({3, 4}, {0.1, 0.9, 0.4, 0.7, 0.8, 0.2, 0.6, 0.3,
                                         0.5, 0.55, 0.15, 0.95}, true);
        check("temporal_max", [&] { return sum(gelu(temporal_max(x))); }, {x});
    }
    {
        Tensor x = random_tensor({5}, rng);
        check("l2_normalize", [&] { return sum(gelu(l2_normalize(x))); }, {x});
    }
    {
        Tensor x = random_tensor({2, 5}, rng);
        check("cross_entropy", [&] { return cross_entropy(x, {1, 3}); }, {x});
    }
    {
        Tensor e = random_tensor({4, 3}, rng);
        check("triplet_loss", [&] { return triplet_loss(e, {0, 0, 1, 1}, 5.0); }, {e});
    }
    return out;
}

// Training init draws weights at std 0.02, which leaves composed-block
// gradients around 1e-7 — too small for well-conditioned central
// differences. The checks re-draw every parameter at O(1) scale.
inline void randomize_params(NamedParams<double>& params, SplitMix64& rng) {
    for (auto& [name, t] : params)
        for (auto& v : t.data()) v = rng.uniform(-0.5, 0.5);
}

inline std::vector<GradCheckEntry> run_lhm_gradcheck(uint64_t seed = 43) {
    SplitMix64 rng(seed);
    std::vector<GradCheckEntry> out;

    {
        SplitMix64 wrng(seed + 1);
        auto gate = DeepCnnParamsT<double>::init(2, 4, wrng);
        Tensor x = random_tensor({2, 2, 4, 4}, rng);
        NamedParams<double> leaves_named;
        gate.collect("g", leaves_named);
        randomize_params(leaves_named, rng);
        std::vector<Tensor> leaves{x};
        for (auto& [n, t] : leaves_named) leaves.push_back(t);
        out.push_back({"deep_cnn_gate",
                       grad_check<double>([&] { return sum(gelu(deep_cnn_gate_forward(x, gate))); },
                                          leaves)});
    }
    {
        SplitMix64 wrng(seed + 2);
        auto ffn = FfnParamsT<double>::init(4, wrng);
        Tensor x = random_tensor({2, 4, 3, 3}, rng);
        NamedParams<double> leaves_named;
        ffn.collect("f", leaves_named);
        randomize_params(leaves_named, rng);
        std::vector<Tensor> leaves{x};
        for (auto& [n, t] : leaves_named) leaves.push_back(t);
        out.push_back({"ffn",
                       grad_check<double>([&] { return sum(ffn_forward(x, ffn)); }, leaves)});
    }
    {
        SplitMix64 wrng(seed + 3);
        auto gn = GnConvParamsT<double>::init(4, 2, wrng);
        Tensor x = random_tensor({2, 4, 4, 4}, rng);
        NamedParams<double> leaves_named;
        gn.collect("gn", leaves_named);
        randomize_params(leaves_named, rng);
        std::vector<Tensor> leaves{x};
        for (auto& [n, t] : leaves_named) leaves.push_back(t);
        out.push_back({"gnconv_order2",
                       grad_check<double>([&] { return sum(gelu(gnconv_forward(x, gn))); }, leaves)});
    }
    {
        SplitMix64 wrng(seed + 4);
        auto block = LhmBlockParamsT<double>::init(4, 2, wrng);
        Tensor x = random_tensor({2, 4, 5, 5}, rng);
        NamedParams<double> leaves_named;
        block.collect("b", leaves_named);
        randomize_params(leaves_named, rng);
        std::vector<Tensor> leaves{x};
        for (auto& [n, t] : leaves_named) leaves.push_back(t);
        out.push_back({"lhm_block",
                       grad_check<double>([&] { return sum(lhm_block_forward(x, block)); }, leaves)});
    }
    return out;
}

inline std::vector<GradCheckEntry> run_all_gradchecks() {
    auto out = run_tensor_gradcheck();
    auto lhm = run_lhm_gradcheck();
    out.insert(out.end(), lhm.begin(), lhm.end());
    return out;
}

}  // namespace horgait
