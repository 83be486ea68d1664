// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale training: batch-hard triplet plus auxiliary cross-entropy,
// bias-corrected adaptive-moment updates, P x K identity sampling, and
// rank-1 gallery/probe evaluation. Runs are bit-reproducible for a fixed
// (seed, precision, config).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "horgait/backbone.hpp"
#include "horgait/dataset.hpp"
#include "horgait/rng.hpp"
#include "horgait/tensor.hpp"
#include "horgait/tnsr_io.hpp"

namespace horgait {

enum class Precision { f32, f64 };

struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999;
    double eps = 1e-8;
    double margin = 0.2;
    double lambda_ce = 1.0;
    int batch_p = 4;  // identities per batch
    int batch_k = 2;  // sequences per identity
    int steps = 100;
    uint64_t seed = 0;
    Precision precision = Precision::f32;
    int frames_per_sample = 10;
};

// Batch-hard triplet loss over [B, D] embeddings. For each anchor with at
// least one positive and one negative: hinge(max_pos_dist - min_neg_dist +
// margin), averaged over counted anchors. Anchors at distance 0 from their
// hardest pair get a zero subgradient through that distance.
template <typename S>
TensorT<S> triplet_loss(const TensorT<S>& embeddings, const std::vector<int>& labels, S margin) {
    if (embeddings.shape().size() != 2)
        throw std::invalid_argument("triplet_loss: expected [B,D], got " + shape_str(embeddings.shape()));
    int B = embeddings.shape()[0], D = embeddings.shape()[1];
    if (static_cast<int>(labels.size()) != B)
        throw std::invalid_argument("triplet_loss: label count != batch size");
    const auto& e = embeddings.data();

    auto dist = [&](int i, int j) {
        S acc = 0;
        for (int d = 0; d < D; ++d) {
            S diff = e[static_cast<size_t>(i) * D + d] - e[static_cast<size_t>(j) * D + d];
            acc += diff * diff;
        }
        return std::sqrt(acc);
    };

    struct Active {
        int anchor, pos, neg;
        S d_ap, d_an;
    };
    auto active = std::make_shared<std::vector<Active>>();
    int counted = 0;
    S total = 0;
    for (int a = 0; a < B; ++a) {
        int pos = -1, neg = -1;
        S worst_pos = S(-1), best_neg = S(0);
        for (int j = 0; j < B; ++j) {
            if (j == a) continue;
            S d = dist(a, j);
            if (labels[static_cast<size_t>(j)] == labels[static_cast<size_t>(a)]) {
                if (d > worst_pos) {
                    worst_pos = d;
                    pos = j;
                }
            } else if (neg < 0 || d < best_neg) {
                best_neg = d;
                neg = j;
            }
        }
        if (pos < 0 || neg < 0) continue;  // anchor skipped
        ++counted;
        S hinge = worst_pos - best_neg + margin;
        if (hinge > 0) {
            total += hinge;
            active->push_back({a, pos, neg, worst_pos, best_neg});
        }
    }
    S value = counted > 0 ? total / static_cast<S>(counted) : S(0);

    auto en = embeddings.node();
    int m = counted;
    return TensorT<S>::make_op({1}, {value}, {embeddings}, [en, active, m, D](NodeT<S>& y) {
        if (m == 0) return;
        en->ensure_grad();
        S g = y.grad[0] / static_cast<S>(m);
        for (const auto& t : *active) {
            const S* ea = en->value.data() + static_cast<size_t>(t.anchor) * D;
            const S* ep = en->value.data() + static_cast<size_t>(t.pos) * D;
            const S* eg = en->value.data() + static_cast<size_t>(t.neg) * D;
            S* ga = en->grad.data() + static_cast<size_t>(t.anchor) * D;
            S* gp = en->grad.data() + static_cast<size_t>(t.pos) * D;
            S* gn = en->grad.data() + static_cast<size_t>(t.neg) * D;
            if (t.d_ap > 0) {
                S k = g / t.d_ap;
                for (int d = 0; d < D; ++d) {
                    S diff = (ea[d] - ep[d]) * k;
                    ga[d] += diff;
                    gp[d] -= diff;
                }
            }
            if (t.d_an > 0) {
                S k = g / t.d_an;
                for (int d = 0; d < D; ++d) {
                    S diff = (ea[d] - eg[d]) * k;
                    ga[d] -= diff;
                    gn[d] += diff;
                }
            }
        }
    });
}

// Mean negative log-softmax of the true class, log-sum-exp stabilized.
template <typename S>
TensorT<S> cross_entropy(const TensorT<S>& logits, const std::vector<int>& labels) {
    if (logits.shape().size() != 2)
        throw std::invalid_argument("cross_entropy: expected [B,K], got " + shape_str(logits.shape()));
    int B = logits.shape()[0], K = logits.shape()[1];
    if (static_cast<int>(labels.size()) != B)
        throw std::invalid_argument("cross_entropy: label count != batch size");
    const auto& lv = logits.data();
    auto softmax = std::make_shared<std::vector<S>>(lv.size());
    S total = 0;
    for (int i = 0; i < B; ++i) {
        const S* row = lv.data() + static_cast<size_t>(i) * K;
        S mx = row[0];
        for (int k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        S lse = 0;
        for (int k = 0; k < K; ++k) lse += std::exp(row[k] - mx);
        lse = mx + std::log(lse);
        for (int k = 0; k < K; ++k) (*softmax)[static_cast<size_t>(i) * K + k] = std::exp(row[k] - lse);
        int label = labels[static_cast<size_t>(i)];
        if (label < 0 || label >= K) throw std::invalid_argument("cross_entropy: label out of range");
        total += lse - row[label];
    }
    S value = total / static_cast<S>(B);
    auto ln = logits.node();
    auto lbl = std::make_shared<std::vector<int>>(labels);
    return TensorT<S>::make_op({1}, {value}, {logits}, [ln, softmax, lbl, B, K](NodeT<S>& y) {
        ln->ensure_grad();
        S g = y.grad[0] / static_cast<S>(B);
        for (int i = 0; i < B; ++i)
            for (int k = 0; k < K; ++k) {
                S p = (*softmax)[static_cast<size_t>(i) * K + k];
                S onehot = (k == (*lbl)[static_cast<size_t>(i)]) ? S(1) : S(0);
                ln->grad[static_cast<size_t>(i) * K + k] += g * (p - onehot);
            }
    });
}

// Bias-corrected adaptive-moment optimizer over a fixed parameter list.
template <typename S>
class AdamT {
  public:
    explicit AdamT(const NamedParams<S>& params) {
        for (const auto& [name, tensor] : params) {
            m_.emplace_back(tensor.data().size(), S(0));
            v_.emplace_back(tensor.data().size(), S(0));
        }
    }

    int step_count() const { return step_; }
    std::vector<std::vector<S>>& first_moments() { return m_; }
    std::vector<std::vector<S>>& second_moments() { return v_; }
    void set_step(int s) { step_ = s; }

    void step(NamedParams<S>& params, const TrainConfig& cfg) {
        ++step_;
        S b1 = static_cast<S>(cfg.beta1), b2 = static_cast<S>(cfg.beta2);
        S corr1 = S(1) - std::pow(b1, static_cast<S>(step_));
        S corr2 = S(1) - std::pow(b2, static_cast<S>(step_));
        S lr = static_cast<S>(cfg.lr);
        S eps = static_cast<S>(cfg.eps);
        for (size_t p = 0; p < params.size(); ++p) {
            auto& tensor = params[p].second;
            auto& grad = tensor.grad();
            if (grad.empty()) continue;
            auto& data = tensor.data();
            auto& m = m_[p];
            auto& v = v_[p];
            for (size_t i = 0; i < data.size(); ++i) {
                m[i] = b1 * m[i] + (S(1) - b1) * grad[i];
                v[i] = b2 * v[i] + (S(1) - b2) * grad[i] * grad[i];
                S mhat = m[i] / corr1;
                S vhat = v[i] / corr2;
                data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }

  private:
    std::vector<std::vector<S>> m_, v_;
    int step_ = 0;
};

// Each probe is matched to the nearest gallery embedding by Euclidean
// distance; ties resolve to the lowest gallery index.
double evaluate_rank1(const std::vector<std::pair<std::vector<double>, int>>& gallery,
                      const std::vector<std::pair<std::vector<double>, int>>& probe);

// ---- training harness --------------------------------------------------------

struct TrainResult {
    std::vector<std::string> log_lines;
};

struct CheckpointMeta {
    ModelConfig model;
    std::vector<int> orders;
    Precision precision = Precision::f32;
    std::vector<int> label_map;  // class index -> identity label
};

void save_checkpoint_meta(const std::string& dir, const CheckpointMeta& meta);
CheckpointMeta load_checkpoint_meta(const std::string& dir);

namespace ckpt_detail {
std::string param_path(const std::string& dir, const std::string& subdir, const std::string& name,
                       bool create);
}

template <typename S>
void save_checkpoint(const std::string& dir, ModelParamsT<S>& model, const CheckpointMeta& meta,
                     AdamT<S>* opt = nullptr) {
    save_checkpoint_meta(dir, meta);
    TnsrDtype dtype = (meta.precision == Precision::f64) ? TnsrDtype::f64 : TnsrDtype::f32;
    auto params = model.collect();
    for (auto& [name, tensor] : params) {
        std::vector<double> widened(tensor.data().begin(), tensor.data().end());
        write_tnsr(ckpt_detail::param_path(dir, "params", name, true), tensor.shape(), widened, dtype);
    }
    if (opt) {
        for (size_t p = 0; p < params.size(); ++p) {
            const auto& shape = params[p].second.shape();
            std::vector<double> m(opt->first_moments()[p].begin(), opt->first_moments()[p].end());
            std::vector<double> v(opt->second_moments()[p].begin(), opt->second_moments()[p].end());
            write_tnsr(ckpt_detail::param_path(dir, "opt", "m." + params[p].first, true), shape, m, dtype);
            write_tnsr(ckpt_detail::param_path(dir, "opt", "v." + params[p].first, true), shape, v, dtype);
        }
        std::vector<double> step{static_cast<double>(opt->step_count())};
        write_tnsr(ckpt_detail::param_path(dir, "opt", "step", true), {1}, step, TnsrDtype::f64);
    }
}

template <typename S>
ModelParamsT<S> load_checkpoint(const std::string& dir, const CheckpointMeta& meta) {
    ModelParamsT<S> model = build_model<S>(meta.model, meta.orders, /*seed=*/0);
    auto params = model.collect();
    for (auto& [name, tensor] : params) {
        TnsrData td = read_tnsr(ckpt_detail::param_path(dir, "params", name, false));
        if (td.shape != tensor.shape())
            throw std::runtime_error("checkpoint tensor " + name + " has shape " + shape_str(td.shape) +
                                     ", expected " + shape_str(tensor.shape()));
        for (size_t i = 0; i < td.values.size(); ++i)
            tensor.data()[i] = static_cast<S>(td.values[i]);
    }
    return model;
}

// Deterministic P x K sampler + triplet/CE loop over the train split of a
// projected dataset. Writes per-step JSON lines to `log`.
TrainResult train(const std::string& dataset_dir, const ModelConfig& model_cfg,
                  const std::vector<int>& orders, const TrainConfig& cfg,
                  const std::string& checkpoint_dir, std::ostream* log = nullptr);

// Embeds every sequence of a split with the checkpointed model (first
// frames_per_sample frames) and returns (embedding, identity label) pairs.
std::vector<std::pair<std::vector<double>, int>> embed_split(const std::string& checkpoint_dir,
                                                             const std::string& dataset_dir,
                                                             const std::string& split);

}  // namespace horgait
