// SPDX-License-Identifier: Apache-2.0
#include "horgait/trainer.hpp"

#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace horgait {

double evaluate_rank1(const std::vector<std::pair<std::vector<double>, int>>& gallery,
                      const std::vector<std::pair<std::vector<double>, int>>& probe) {
    if (gallery.empty()) throw std::invalid_argument("evaluate_rank1: empty gallery");
    if (probe.empty()) return 0.0;
    int correct = 0;
    for (const auto& [pv, plabel] : probe) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (size_t g = 0; g < gallery.size(); ++g) {
            const auto& gv = gallery[g].first;
            double acc = 0;
            for (size_t d = 0; d < pv.size(); ++d) {
                double diff = pv[d] - gv[d];
                acc += diff * diff;
            }
            if (acc < best_d) {  // strict: ties keep the lowest index
                best_d = acc;
                best = static_cast<int>(g);
            }
        }
        if (gallery[static_cast<size_t>(best)].second == plabel) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(probe.size());
}

namespace ckpt_detail {

std::string param_path(const std::string& dir, const std::string& subdir, const std::string& name,
                       bool create) {
    fs::path p = fs::path(dir) / subdir;
    if (create) fs::create_directories(p);
    return (p / (name + ".tnsr")).string();
}

}  // namespace ckpt_detail

void save_checkpoint_meta(const std::string& dir, const CheckpointMeta& meta) {
    fs::create_directories(dir);
    json doc;
    doc["stem_channels"] = meta.model.stem_channels;
    doc["depths"] = meta.model.depths;
    doc["embedding_dim"] = meta.model.embedding_dim;
    doc["num_classes"] = meta.model.num_classes;
    doc["alpha"] = meta.model.alpha;
    doc["dwconv_mode"] = (meta.model.dwconv_mode == DwconvMode::shared) ? "shared" : "per_order";
    doc["orders"] = meta.orders;
    doc["precision"] = (meta.precision == Precision::f64) ? "f64" : "f32";
    doc["label_map"] = meta.label_map;
    std::ofstream out(fs::path(dir) / "config.json");
    out << doc.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write checkpoint config in " + dir);
}

CheckpointMeta load_checkpoint_meta(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "config.json");
    if (!in) throw std::runtime_error("cannot open checkpoint config in " + dir);
    json doc = json::parse(in);
    CheckpointMeta meta;
    meta.model.stem_channels = doc.at("stem_channels").get<int>();
    meta.model.depths = doc.at("depths").get<std::vector<int>>();
    meta.model.embedding_dim = doc.at("embedding_dim").get<int>();
    meta.model.num_classes = doc.at("num_classes").get<int>();
    meta.model.alpha = doc.at("alpha").get<double>();
    meta.model.dwconv_mode = (doc.at("dwconv_mode").get<std::string>() == "per_order")
                                 ? DwconvMode::per_order
                                 : DwconvMode::shared;
    meta.orders = doc.at("orders").get<std::vector<int>>();
    meta.precision = (doc.at("precision").get<std::string>() == "f64") ? Precision::f64 : Precision::f32;
    meta.label_map = doc.at("label_map").get<std::vector<int>>();
    return meta;
}

namespace {

// Grouping of the train split by identity, class indices assigned in sorted
// label order so the head layout is independent of manifest order.
struct TrainData {
    std::vector<LoadedSequence> sequences;
    std::vector<std::vector<int>> by_class;  // class -> sequence indices
    std::vector<int> label_map;              // class -> identity label
};

TrainData group_train_split(const std::string& dataset_dir) {
    TrainData td;
    td.sequences = load_depth_dataset(dataset_dir, "train");
    std::map<int, std::vector<int>> groups;
    for (size_t i = 0; i < td.sequences.size(); ++i)
        groups[td.sequences[i].identity_label].push_back(static_cast<int>(i));
    for (auto& [label, idxs] : groups) {
        td.label_map.push_back(label);
        td.by_class.push_back(std::move(idxs));
    }
    return td;
}

template <typename S>
TensorT<S> window_tensor(const LoadedSequence& seq, int start, int frames) {
    int64_t frame_elems = 3LL * RgbFrame::kHeight * RgbFrame::kWidth;
    std::vector<S> data(static_cast<size_t>(frames) * frame_elems);
    for (int64_t i = 0; i < frames * frame_elems; ++i)
        data[static_cast<size_t>(i)] = static_cast<S>(seq.data[static_cast<size_t>(start) * frame_elems + i]);
    return TensorT<S>::leaf({frames, 3, RgbFrame::kHeight, RgbFrame::kWidth}, std::move(data), false);
}

std::string format_log_line(int step, double loss, double triplet, double ce) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "{\"step\":%d,\"loss\":%.9g,\"triplet\":%.9g,\"ce\":%.9g}",
                  step, loss, triplet, ce);
    return buf;
}

template <typename S>
TrainResult train_impl(const std::string& dataset_dir, const ModelConfig& model_cfg,
                       const std::vector<int>& orders, const TrainConfig& cfg,
                       const std::string& checkpoint_dir, std::ostream* log) {
    TrainData data = group_train_split(dataset_dir);
    int num_classes = static_cast<int>(data.by_class.size());
    if (num_classes < 2) throw std::runtime_error("train: need at least 2 identities");
    if (num_classes < cfg.batch_p)
        throw std::runtime_error("train: fewer identities than batch P");
    for (const auto& group : data.by_class)
        if (static_cast<int>(group.size()) < cfg.batch_k)
            throw std::runtime_error("train: an identity has fewer sequences than batch K");

    ModelConfig mc = model_cfg;
    mc.num_classes = num_classes;
    ModelParamsT<S> model = build_model<S>(mc, orders, cfg.seed);
    auto params = model.collect();
    AdamT<S> opt(params);
    SplitMix64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);

    auto shuffled = [&rng](int n) {
        std::vector<int> idx(static_cast<size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        for (int i = n - 1; i > 0; --i)
            std::swap(idx[static_cast<size_t>(i)],
                      idx[static_cast<size_t>(rng.next() % static_cast<uint64_t>(i + 1))]);
        return idx;
    };

    TrainResult result;
    int step = 0;
    while (step < cfg.steps) {
        // one epoch: identities in shuffled order, each identity's sequence
        // list shuffled, consumed K at a time without replacement
        std::vector<int> id_order = shuffled(num_classes);
        std::vector<std::vector<int>> seq_order(static_cast<size_t>(num_classes));
        std::vector<size_t> cursor(static_cast<size_t>(num_classes), 0);
        for (int c = 0; c < num_classes; ++c) {
            auto perm = shuffled(static_cast<int>(data.by_class[static_cast<size_t>(c)].size()));
            for (int i : perm)
                seq_order[static_cast<size_t>(c)].push_back(data.by_class[static_cast<size_t>(c)][static_cast<size_t>(i)]);
        }

        for (int base = 0; base + cfg.batch_p <= num_classes && step < cfg.steps; base += cfg.batch_p) {
            std::vector<int> batch_seqs;
            std::vector<int> batch_labels;
            bool exhausted = false;
            for (int p = 0; p < cfg.batch_p; ++p) {
                int c = id_order[static_cast<size_t>(base + p)];
                if (cursor[static_cast<size_t>(c)] + static_cast<size_t>(cfg.batch_k) >
                    seq_order[static_cast<size_t>(c)].size()) {
                    exhausted = true;
                    break;
                }
                for (int k = 0; k < cfg.batch_k; ++k) {
                    batch_seqs.push_back(seq_order[static_cast<size_t>(c)][cursor[static_cast<size_t>(c)]++]);
                    batch_labels.push_back(c);
                }
            }
            if (exhausted) break;

            std::vector<TensorT<S>> embeddings, pre_norms;
            for (int si : batch_seqs) {
                const auto& seq = data.sequences[static_cast<size_t>(si)];
                int frames = std::min(cfg.frames_per_sample, seq.frames);
                int max_start = seq.frames - frames;
                int start = (max_start > 0) ? static_cast<int>(rng.next() % static_cast<uint64_t>(max_start + 1)) : 0;
                TensorT<S> x = window_tensor<S>(seq, start, frames);
                auto fwd = model_forward(x, model);
                embeddings.push_back(fwd.embedding);
                pre_norms.push_back(fwd.pre_norm);
            }
            TensorT<S> emb = stack_rows(embeddings);
            TensorT<S> logits = linear(stack_rows(pre_norms), model.cls_w, model.cls_b);
            TensorT<S> tri = triplet_loss(emb, batch_labels, static_cast<S>(cfg.margin));
            TensorT<S> ce = cross_entropy(logits, batch_labels);
            TensorT<S> loss = add(tri, scale(ce, static_cast<S>(cfg.lambda_ce)));

            for (auto& [name, tensor] : params) tensor.zero_grad();
            backward(loss);
            opt.step(params, cfg);
            ++step;

            std::string line = format_log_line(step, static_cast<double>(loss.data()[0]),
                                               static_cast<double>(tri.data()[0]),
                                               static_cast<double>(ce.data()[0]));
            result.log_lines.push_back(line);
            if (log) (*log) << line << "\n";
        }
    }

    CheckpointMeta meta;
    meta.model = mc;
    meta.orders = orders;
    meta.precision = cfg.precision;
    meta.label_map = data.label_map;
    save_checkpoint(checkpoint_dir, model, meta, &opt);
    return result;
}

template <typename S>
std::vector<std::pair<std::vector<double>, int>> embed_split_impl(const CheckpointMeta& meta,
                                                                  const std::string& checkpoint_dir,
                                                                  const std::string& dataset_dir,
                                                                  const std::string& split) {
    ModelParamsT<S> model = load_checkpoint<S>(checkpoint_dir, meta);
    auto sequences = load_depth_dataset(dataset_dir, split);
    std::vector<std::pair<std::vector<double>, int>> out;
    for (const auto& seq : sequences) {
        int frames = std::min(10, seq.frames);  // first frames for determinism
        TensorT<S> x = window_tensor<S>(seq, 0, frames);
        auto fwd = model_forward(x, model);
        std::vector<double> emb(fwd.embedding.data().begin(), fwd.embedding.data().end());
        out.emplace_back(std::move(emb), seq.identity_label);
    }
    return out;
}

}  // namespace

TrainResult train(const std::string& dataset_dir, const ModelConfig& model_cfg,
                  const std::vector<int>& orders, const TrainConfig& cfg,
                  const std::string& checkpoint_dir, std::ostream* log) {
    if (cfg.precision == Precision::f64)
        return train_impl<double>(dataset_dir, model_cfg, orders, cfg, checkpoint_dir, log);
    return train_impl<float>(dataset_dir, model_cfg, orders, cfg, checkpoint_dir, log);
}

std::vector<std::pair<std::vector<double>, int>> embed_split(const std::string& checkpoint_dir,
                                                             const std::string& dataset_dir,
                                                             const std::string& split) {
    CheckpointMeta meta = load_checkpoint_meta(checkpoint_dir);
    if (meta.precision == Precision::f64)
        return embed_split_impl<double>(meta, checkpoint_dir, dataset_dir, split);
    return embed_split_impl<float>(meta, checkpoint_dir, dataset_dir, split);
}

}  // namespace horgait
