// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "horgait/dataset.hpp"
#include "horgait/gradcheck_suite.hpp"
#include "horgait/projection.hpp"
#include "horgait/synthgait.hpp"
#include "horgait/trainer.hpp"

using namespace horgait;
namespace fs = std::filesystem;

namespace {

// Euclidean batch-hard oracle by exhaustive enumeration.
double triplet_oracle(const std::vector<std::vector<double>>& embs, const std::vector<int>& labels,
                      double margin) {
    auto dist = [&](size_t i, size_t j) {
        double s = 0;
        for (size_t d = 0; d < embs[i].size(); ++d) {
            double diff = embs[i][d] - embs[j][d];
            s += diff * diff;
        }
        return std::sqrt(s);
    };
    double total = 0;
    int counted = 0;
    for (size_t a = 0; a < embs.size(); ++a) {
        double hard_pos = -1, hard_neg = 1e300;
        for (size_t o = 0; o < embs.size(); ++o) {
            if (o == a) continue;
            if (labels[o] == labels[a]) hard_pos = std::max(hard_pos, dist(a, o));
            else hard_neg = std::min(hard_neg, dist(a, o));
        }
        if (hard_pos < 0 || hard_neg > 1e299) continue;
        total += std::max(0.0, hard_pos - hard_neg + margin);
        ++counted;
    }
    return counted ? total / counted : 0.0;
}

Tensor embed_tensor(const std::vector<std::vector<double>>& embs, bool rg = false) {
    std::vector<double> flat;
    for (const auto& e : embs) flat.insert(flat.end(), e.begin(), e.end());
    return Tensor::leaf({static_cast<int>(embs.size()), static_cast<int>(embs[0].size())},
                        std::move(flat), rg);
}

// Builds a tiny projected dataset: `ids` identities x `seqs` sequences with
// the last two sequences of each identity as gallery/probe.
std::string make_dataset(int ids, int seqs, int frames, uint64_t seed) {
    fs::path dir = fs::temp_directory_path() /
                   ("horgait_trainer_ds_" + std::to_string(seed) + "_" + std::to_string(ids));
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::vector<ManifestEntry> manifest;
    ProjectionConfig pcfg;
    for (int i = 0; i < ids; ++i) {
        WalkerParams params = synth_identity(seed + 31 * i);
        for (int j = 0; j < seqs; ++j) {
            SynthConfig cfg;
            cfg.frames = frames;
            cfg.points_per_frame = 400;
            cfg.noise_sigma = 0.01;
            cfg.seed = seed + 1000 * i + j;
            PointCloudSequence seq = generate_sequence(params, cfg);
            seq.identity_label = i;
            DepthMapSequence dm = project_sequence(seq, pcfg);
            std::string name = "id" + std::to_string(i) + "_s" + std::to_string(j);
            save_depth_sequence(dm, (dir / name).string());
            std::string split = (seqs >= 3 && j == seqs - 2) ? "gallery"
                                : (seqs >= 3 && j == seqs - 1) ? "probe"
                                                               : "train";
            manifest.push_back({name, i, split});
        }
    }
    save_manifest(dir.string(), manifest);
    return dir.string();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("triplet loss equals margin when all embeddings coincide") {
    std::vector<std::vector<double>> embs(4, std::vector<double>{0.3, -0.7});
    Tensor e = embed_tensor(embs);
    Tensor loss = triplet_loss(e, {0, 0, 1, 1}, 0.2);
    CHECK(loss.data()[0] == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("triplet loss is zero when negatives clear the margin") {
    std::vector<std::vector<double>> embs{{0, 0}, {0, 0}, {10, 0}, {10, 0}};
    Tensor e = embed_tensor(embs);
    Tensor loss = triplet_loss(e, {0, 0, 1, 1}, 0.2);
    CHECK(loss.data()[0] == 0.0);
}

TEST_CASE("triplet loss matches the enumeration oracle on the 4-point line") {
    std::vector<std::vector<double>> embs{{0.0}, {0.1}, {1.0}, {1.1}};
    std::vector<int> labels{0, 0, 1, 1};
    Tensor e = embed_tensor(embs);
    Tensor loss = triplet_loss(e, labels, 0.2);
    CHECK(loss.data()[0] == doctest::Approx(triplet_oracle(embs, labels, 0.2)).epsilon(1e-12));

    // and on a few random batches
    SplitMix64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<std::vector<double>> r(6, std::vector<double>(3));
        for (auto& v : r)
            for (auto& x : v) x = rng.uniform(-1.0, 1.0);
        std::vector<int> lab{0, 0, 1, 1, 2, 2};
        Tensor t = embed_tensor(r);
        CHECK(triplet_loss(t, lab, 0.5).data()[0] ==
              doctest::Approx(triplet_oracle(r, lab, 0.5)).epsilon(1e-12));
    }
}

TEST_CASE("anchors without positives are skipped; all skipped gives zero") {
    std::vector<std::vector<double>> embs{{0.0}, {1.0}, {2.0}};
    Tensor e = embed_tensor(embs);
    Tensor loss = triplet_loss(e, {0, 1, 2}, 0.2);  // no positives anywhere
    CHECK(loss.data()[0] == 0.0);
}

TEST_CASE("cross entropy: uniform logits give ln K; one-hot +20 is ~0; gradcheck") {
    Tensor uniform = Tensor::zeros({2, 5});
    CHECK(cross_entropy(uniform, {0, 3}).data()[0] == doctest::Approx(std::log(5.0)).epsilon(1e-12));

    std::vector<double> hot(5, 0.0);
    hot[2] = 20.0;
    Tensor one_hot = Tensor::leaf({1, 5}, hot);
    CHECK(cross_entropy(one_hot, {2}).data()[0] <= 1e-8);

    SplitMix64 rng(4);
    Tensor logits = random_tensor({3, 4}, rng);
    double err = grad_check<double>([&] { return cross_entropy(logits, {1, 0, 3}); }, {logits});
    CHECK(err <= 1e-6);
}

TEST_CASE("adam: zero gradient is a no-op; first step follows the sign formula") {
    Tensor p = Tensor::leaf({2}, {1.0, -2.0}, true);
    NamedParams<double> params{{"p", p}};
    AdamT<double> opt(params);
    TrainConfig cfg;
    cfg.lr = 0.1;

    p.zero_grad();
    opt.step(params, cfg);
    CHECK(p.data()[0] == 1.0);
    CHECK(p.data()[1] == -2.0);

    // first step with grad g: m_hat = g, v_hat = g^2,
    // update = -lr * g / (|g| + eps) ~ -lr * sign(g)
    Tensor q = Tensor::leaf({2}, {1.0, -2.0}, true);
    NamedParams<double> params2{{"q", q}};
    AdamT<double> opt2(params2);
    q.zero_grad();
    q.grad()[0] = 0.5;
    q.grad()[1] = -3.0;
    opt2.step(params2, cfg);
    for (int i = 0; i < 2; ++i) {
        double g = (i == 0) ? 0.5 : -3.0;
        double expect = (i == 0 ? 1.0 : -2.0) - cfg.lr * g / (std::abs(g) + cfg.eps);
        CHECK(q.data()[i] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("adam decreases a convex quadratic for lr below the stable threshold") {
    // f(x) = x^2 / 2, x0 = 1: first-step update is -lr*sign(g); any lr < 2
    // strictly decreases f. Use lr = 0.1.
    Tensor x = Tensor::leaf({1}, {1.0}, true);
    NamedParams<double> params{{"x", x}};
    AdamT<double> opt(params);
    TrainConfig cfg;
    cfg.lr = 0.1;
    double f0 = 0.5 * x.data()[0] * x.data()[0];
    x.zero_grad();
    x.grad()[0] = x.data()[0];
    opt.step(params, cfg);
    double f1 = 0.5 * x.data()[0] * x.data()[0];
    CHECK(f1 < f0);
}

TEST_CASE("two optimizers fed identical grad streams stay identical") {
    SplitMix64 rng(5);
    Tensor a = Tensor::leaf({3}, {0.1, 0.2, 0.3}, true);
    Tensor b = Tensor::leaf({3}, {0.1, 0.2, 0.3}, true);
    NamedParams<double> pa{{"w", a}}, pb{{"w", b}};
    AdamT<double> oa(pa), ob(pb);
    TrainConfig cfg;
    for (int s = 0; s < 5; ++s) {
        a.zero_grad();
        b.zero_grad();
        for (int i = 0; i < 3; ++i) {
            double g = rng.uniform(-1.0, 1.0);
            a.grad()[i] = g;
            b.grad()[i] = g;
        }
        oa.step(pa, cfg);
        ob.step(pb, cfg);
    }
    CHECK(a.data() == b.data());
}

TEST_CASE("rank-1 oracle on a 5x5 hand set, plus invariances") {
    std::vector<std::pair<std::vector<double>, int>> gallery = {
        {{0, 0}, 0}, {{1, 0}, 1}, {{0, 1}, 2}, {{-1, 0}, 3}, {{0, -1}, 4}};
    std::vector<std::pair<std::vector<double>, int>> probe = {
        {{0.1, 0.0}, 0},   // nearest (0,0) -> correct
        {{0.9, 0.1}, 1},   // nearest (1,0) -> correct
        {{0.0, 0.6}, 2},   // nearest (0,1) -> correct
        {{-0.9, 0.0}, 0},  // nearest (-1,0), label 3 -> wrong
        {{0.4, -0.8}, 4}}; // nearest (0,-1) -> correct
    CHECK(evaluate_rank1(gallery, probe) == doctest::Approx(0.8));

    // exact-match probe counts correct; single gallery forces its label
    CHECK(evaluate_rank1({{{1, 2}, 7}}, {{{1, 2}, 7}, {{5, 5}, 9}}) == doctest::Approx(0.5));

    // invariance under common rotation and positive scaling
    auto rotate_scale = [](std::vector<std::pair<std::vector<double>, int>> v, double th, double s) {
        for (auto& [e, l] : v) {
            double x = e[0], y = e[1];
            e[0] = s * (x * std::cos(th) - y * std::sin(th));
            e[1] = s * (x * std::sin(th) + y * std::cos(th));
        }
        return v;
    };
    CHECK(evaluate_rank1(rotate_scale(gallery, 0.7, 3.0), rotate_scale(probe, 0.7, 3.0)) ==
          doctest::Approx(0.8));
}

TEST_CASE("training determinism, steps=0 checkpoint, and loss decrease") {
    std::string data = make_dataset(/*ids=*/4, /*seqs=*/4, /*frames=*/6, /*seed=*/51);
    ModelConfig mc;
    TrainConfig tc;
    tc.steps = 12;
    tc.batch_p = 2;
    tc.batch_k = 2;
    tc.frames_per_sample = 3;
    tc.seed = 5;
    std::vector<int> orders{1, 1, 1, 1};

    fs::path ck1 = fs::temp_directory_path() / "horgait_trainer_ck1";
    fs::path ck2 = fs::temp_directory_path() / "horgait_trainer_ck2";
    fs::remove_all(ck1);
    fs::remove_all(ck2);
    fs::create_directories(ck1);
    fs::create_directories(ck2);

    std::ofstream log1((ck1 / "metrics.jsonl").string(), std::ios::binary);
    TrainResult r1 = train(data, mc, orders, tc, ck1.string(), &log1);
    log1.close();
    std::ofstream log2((ck2 / "metrics.jsonl").string(), std::ios::binary);
    TrainResult r2 = train(data, mc, orders, tc, ck2.string(), &log2);
    log2.close();

    SUBCASE("same seed gives byte-identical metrics logs") {
        std::string a = read_file((ck1 / "metrics.jsonl").string());
        std::string b = read_file((ck2 / "metrics.jsonl").string());
        CHECK(!a.empty());
        CHECK(a == b);
    }
    SUBCASE("loss decreases from early to late steps") {
        REQUIRE(r1.log_lines.size() == 12);
        auto loss_of = [](const std::string& line) {
            auto pos = line.find("\"loss\":");
            return std::stod(line.substr(pos + 7));
        };
        std::vector<double> first, last;
        for (int i = 0; i < 4; ++i) first.push_back(loss_of(r1.log_lines[i]));
        for (int i = 8; i < 12; ++i) last.push_back(loss_of(r1.log_lines[i]));
        std::sort(first.begin(), first.end());
        std::sort(last.begin(), last.end());
        CHECK(last[last.size() / 2] < first[first.size() / 2]);
    }
    SUBCASE("steps=0 checkpoint equals initialization") {
        fs::path ck0 = fs::temp_directory_path() / "horgait_trainer_ck0";
        fs::remove_all(ck0);
        fs::create_directories(ck0);
        TrainConfig tc0 = tc;
        tc0.steps = 0;
        train(data, mc, orders, tc0, ck0.string(), nullptr);
        CheckpointMeta meta = load_checkpoint_meta(ck0.string());
        auto model = load_checkpoint<float>(ck0.string(), meta);
        ModelConfig mc_init = meta.model;
        auto fresh = build_model<float>(mc_init, meta.orders, tc0.seed);
        auto pa = model.collect(), pb = fresh.collect();
        REQUIRE(pa.size() == pb.size());
        for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].second.data() == pb[i].second.data());
    }
    SUBCASE("config errors: too few identities or sequences") {
        TrainConfig bad = tc;
        bad.batch_p = 8;  // only 4 identities
        CHECK_THROWS(train(data, mc, orders, bad, (fs::temp_directory_path() / "x1").string(), nullptr));
        TrainConfig bad2 = tc;
        bad2.batch_k = 5;  // only 2 train sequences per identity
        CHECK_THROWS(train(data, mc, orders, bad2, (fs::temp_directory_path() / "x2").string(), nullptr));
    }
}

TEST_CASE("evaluate_rank1 rejects an empty gallery") {
    CHECK_THROWS(evaluate_rank1({}, {{{1.0}, 0}}));
}
