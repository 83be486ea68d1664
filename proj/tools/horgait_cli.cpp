// SPDX-License-Identifier: Apache-2.0
//
// horgait: single command-line entry point for the depth-map gait pipeline.
// Subcommands: synth, project, gradcheck, train, eval, orders-bench, describe.
// Exit codes: 0 success, 2 usage error, 3 data error, 4 check failure.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "horgait/backbone.hpp"
#include "horgait/dataset.hpp"
#include "horgait/gradcheck_suite.hpp"
#include "horgait/projection.hpp"
#include "horgait/synthgait.hpp"
#include "horgait/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace horgait;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitCheck = 4;

// Removes a partially written output directory on failure, but only if this
// run created it.
struct OutputGuard {
    fs::path path;
    bool created = false;
    bool armed = false;

    void create(const std::string& dir) {
        path = dir;
        created = !fs::exists(path);
        fs::create_directories(path);
        armed = true;
    }
    void disarm() { armed = false; }
    ~OutputGuard() {
        if (armed && created) {
            std::error_code ec;
            fs::remove_all(path, ec);
        }
    }
};

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

int cmd_synth(int identities, int seqs_per_id, int frames, int points, double noise_sigma,
              uint64_t seed, const std::string& out_dir) {
    OutputGuard guard;
    guard.create(out_dir);

    std::vector<ManifestEntry> manifest;
    for (int i = 0; i < identities; ++i) {
        uint64_t id_seed = seed + 1000003ULL * static_cast<uint64_t>(i + 1);
        WalkerParams params = synth_identity(id_seed);
        for (int j = 0; j < seqs_per_id; ++j) {
            SynthConfig cfg;
            cfg.frames = frames;
            cfg.points_per_frame = points;
            cfg.noise_sigma = noise_sigma;
            cfg.seed = id_seed + static_cast<uint64_t>(j) + 1;
            PointCloudSequence seq = generate_sequence(params, cfg);
            char name[64];
            std::snprintf(name, sizeof(name), "id%03d_seq%02d.pcseq", i, j);
            save_pcseq(seq, (fs::path(out_dir) / name).string());
            // With three or more sequences per identity the last two are held
            // out as gallery and probe; fewer than three means train-only.
            std::string split = "train";
            if (seqs_per_id >= 3) {
                if (j == seqs_per_id - 2) split = "gallery";
                else if (j == seqs_per_id - 1) split = "probe";
            }
            manifest.push_back({name, i, split});
        }
    }
    save_manifest(out_dir, manifest);
    guard.disarm();
    json result{{"subcommand", "synth"}, {"identities", identities}, {"seqs_per_id", seqs_per_id},
                {"frames", frames}, {"sequences", manifest.size()}, {"out", out_dir}};
    std::cout << result.dump() << "\n";
    return kExitOk;
}

ProjectionConfig load_projection_config(const std::string& config_file) {
    ProjectionConfig cfg;
    if (config_file.empty()) return cfg;
    std::ifstream in(config_file);
    if (!in) throw std::runtime_error("cannot open config file " + config_file);
    json j = json::parse(in);
    if (j.contains("delta_theta")) cfg.delta_theta = j["delta_theta"].get<double>();
    if (j.contains("delta_phi")) cfg.delta_phi = j["delta_phi"].get<double>();
    if (j.contains("sphere_radius")) cfg.sphere_radius = j["sphere_radius"].get<double>();
    if (j.contains("sphere_center_z")) cfg.sphere_center_z = j["sphere_center_z"].get<double>();
    if (j.contains("range_offset_c")) cfg.range_offset_c = j["range_offset_c"].get<double>();
    if (j.contains("raster_width")) cfg.raster_width = j["raster_width"].get<int>();
    if (j.contains("raster_height")) cfg.raster_height = j["raster_height"].get<int>();
    return cfg;
}

int cmd_project(const std::string& mode, const std::string& config_file, const std::string& in_dir,
                const std::string& out_dir, bool ppm, const std::string& colormap_name) {
    ProjectionConfig cfg = load_projection_config(config_file);
    cfg.mode = (mode == "spherical") ? ProjectionMode::spherical : ProjectionMode::planar;
    Colormap colormap = (colormap_name == "turbo") ? Colormap::turbo_like : Colormap::gray3;

    std::vector<ManifestEntry> manifest = load_manifest(in_dir);
    OutputGuard guard;
    guard.create(out_dir);

    std::vector<ManifestEntry> out_manifest;
    for (const auto& entry : manifest) {
        PointCloudSequence seq = load_pcseq((fs::path(in_dir) / entry.sequence_path).string());
        seq.identity_label = entry.identity_label;
        DepthMapSequence depth = project_sequence(seq, cfg, colormap);
        std::string seq_dir = fs::path(entry.sequence_path).stem().string();
        save_depth_sequence(depth, (fs::path(out_dir) / seq_dir).string(), ppm);
        out_manifest.push_back({seq_dir, entry.identity_label, entry.split});
    }
    save_manifest(out_dir, out_manifest);
    guard.disarm();
    json result{{"subcommand", "project"}, {"mode", mode}, {"sequences", out_manifest.size()},
                {"out", out_dir}};
    std::cout << result.dump() << "\n";
    return kExitOk;
}

int cmd_gradcheck(const std::string& module) {
    std::vector<GradCheckEntry> entries;
    if (module == "tensor" || module == "all") {
        auto t = run_tensor_gradcheck();
        entries.insert(entries.end(), t.begin(), t.end());
    }
    if (module == "lhm" || module == "all") {
        auto l = run_lhm_gradcheck();
        entries.insert(entries.end(), l.begin(), l.end());
    }
    if (entries.empty()) {
        std::cerr << "gradcheck: unknown module '" << module << "'\n";
        return kExitUsage;
    }
    bool ok = true;
    double worst = 0.0;
    for (const auto& e : entries) {
        bool pass = e.max_rel_err <= 1e-4;
        ok = ok && pass;
        worst = std::max(worst, e.max_rel_err);
        std::printf("%-18s max_rel_err=%.3e %s\n", e.op.c_str(), e.max_rel_err,
                    pass ? "ok" : "FAIL");
    }
    json result{{"subcommand", "gradcheck"}, {"module", module}, {"ops", entries.size()},
                {"max_rel_err", worst}, {"pass", ok}};
    std::cout << result.dump() << "\n";
    return ok ? kExitOk : kExitCheck;
}

int cmd_train(const std::string& data_dir, const std::string& orders_str, const TrainConfig& cfg,
              const std::string& out_dir, const ModelConfig& mc) {
    std::vector<int> orders = parse_order_schedule(orders_str);
    OutputGuard guard;
    guard.create(out_dir);

    std::ofstream log((fs::path(out_dir) / "metrics.jsonl").string(), std::ios::binary);
    if (!log) throw std::runtime_error("cannot open metrics log in " + out_dir);
    TrainResult res = train(data_dir, mc, orders, cfg, out_dir, &log);
    log.close();
    guard.disarm();

    json result{{"subcommand", "train"}, {"orders", orders_str}, {"steps", cfg.steps},
                {"logged_steps", res.log_lines.size()}, {"checkpoint", out_dir}};
    std::cout << result.dump() << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& ckpt, const std::string& gallery_dir, const std::string& probe_dir,
             const std::string& gallery_split, const std::string& probe_split) {
    auto gallery = embed_split(ckpt, gallery_dir, gallery_split == "all" ? "" : gallery_split);
    auto probe = embed_split(ckpt, probe_dir, probe_split == "all" ? "" : probe_split);
    if (gallery.empty()) throw std::runtime_error("gallery split '" + gallery_split + "' is empty");
    if (probe.empty()) throw std::runtime_error("probe split '" + probe_split + "' is empty");
    double rank1 = evaluate_rank1(gallery, probe);
    json result{{"subcommand", "eval"}, {"rank1", rank1}, {"gallery", gallery.size()},
                {"probe", probe.size()}};
    std::cout << result.dump() << "\n";
    return kExitOk;
}

int cmd_orders_bench(const std::string& data_dir, int steps, uint64_t seed,
                     const std::string& csv_path, const std::string& work_dir) {
    bool temp_work = work_dir.empty();
    fs::path work = temp_work ? fs::temp_directory_path() / ("horgait_bench_" + std::to_string(seed))
                              : fs::path(work_dir);
    fs::create_directories(work);

    std::vector<std::string> rows;
    for (const auto& orders : all_order_schedules()) {
        std::string tag;
        for (size_t i = 0; i < orders.size(); ++i)
            tag += (i ? "-" : "") + std::to_string(orders[i]);
        std::string ckpt = (work / tag).string();
        fs::create_directories(ckpt);

        ModelConfig mc;
        TrainConfig tc;
        tc.steps = steps;
        tc.seed = seed;
        std::ofstream log((fs::path(ckpt) / "metrics.jsonl").string(), std::ios::binary);
        train(data_dir, mc, orders, tc, ckpt, &log);
        log.close();

        auto gallery = embed_split(ckpt, data_dir, "gallery");
        auto probe = embed_split(ckpt, data_dir, "probe");
        double rank1 = evaluate_rank1(gallery, probe);
        std::string row;
        for (size_t i = 0; i < orders.size(); ++i) row += (i ? "," : "\"") + std::to_string(orders[i]);
        row += "\"," + format_double(rank1);
        rows.push_back(row);
        std::cerr << "orders " << tag << " rank1 " << format_double(rank1) << "\n";
    }
    if (temp_work) {
        std::error_code ec;
        fs::remove_all(work, ec);
    }

    std::string csv = "orders,rank1\n";
    for (const auto& r : rows) csv += r + "\n";
    std::cout << csv;
    if (!csv_path.empty()) {
        std::ofstream out(csv_path, std::ios::binary);
        out << csv;
    }
    return kExitOk;
}

int cmd_describe(const std::string& config_file, const std::string& orders_str) {
    ModelConfig cfg;
    std::vector<int> orders = {1, 1, 3, 3};
    if (!config_file.empty()) {
        std::ifstream in(config_file);
        if (!in) throw std::runtime_error("cannot open config file " + config_file);
        json j = json::parse(in);
        if (j.contains("stem_channels")) cfg.stem_channels = j["stem_channels"].get<int>();
        if (j.contains("depths")) cfg.depths = j["depths"].get<std::vector<int>>();
        if (j.contains("embedding_dim")) cfg.embedding_dim = j["embedding_dim"].get<int>();
        if (j.contains("num_classes")) cfg.num_classes = j["num_classes"].get<int>();
        if (j.contains("alpha")) cfg.alpha = j["alpha"].get<double>();
        if (j.contains("orders")) orders = j["orders"].get<std::vector<int>>();
    }
    if (!orders_str.empty()) orders = parse_order_schedule(orders_str);
    std::cout << describe_model(cfg, orders) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"horgait: depth-map gait recognition pipeline"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic point-cloud gait dataset");
    int identities = 10, seqs_per_id = 8, frames = 30, points = 768;
    double noise_sigma = 0.01;
    uint64_t seed = 0;
    std::string out_dir;
    synth->add_option("--identities", identities, "number of walker identities")->check(CLI::PositiveNumber);
    synth->add_option("--seqs-per-id", seqs_per_id, "sequences per identity")->check(CLI::PositiveNumber);
    synth->add_option("--frames", frames, "frames per sequence")->check(CLI::PositiveNumber);
    synth->add_option("--points", points, "points per frame")->check(CLI::PositiveNumber);
    synth->add_option("--noise", noise_sigma, "Gaussian point noise sigma (m)");
    synth->add_option("--seed", seed, "dataset seed");
    synth->add_option("--out", out_dir, "output dataset directory")->required();

    // project
    auto* project = app.add_subcommand("project", "Project a point-cloud dataset to depth maps");
    std::string mode = "planar", config_file, in_dir, colormap = "gray3";
    bool ppm = false;
    project->add_option("--mode", mode, "projection mode")->check(CLI::IsMember({"planar", "spherical"}));
    project->add_option("--config", config_file, "JSON projection config (flags override)");
    project->add_option("--in", in_dir, "input point-cloud dataset directory")->required();
    project->add_option("--out", out_dir, "output depth-map dataset directory")->required();
    project->add_option("--colormap", colormap, "colormap")->check(CLI::IsMember({"gray3", "turbo"}));
    project->add_flag("--ppm", ppm, "write PPM previews alongside tensors");

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suites");
    std::string module = "all";
    gradcheck->add_option("--module", module, "suite to run")
        ->check(CLI::IsMember({"tensor", "lhm", "all"}));

    // train
    auto* train_cmd = app.add_subcommand("train", "Train on the train split of a depth-map dataset");
    std::string data_dir, orders_str = "1,1,3,3", precision = "f32";
    TrainConfig tc;
    train_cmd->add_option("--data", data_dir, "depth-map dataset directory")->required();
    train_cmd->add_option("--orders", orders_str, "per-stage interaction orders, e.g. \"1,1,3,3\"");
    train_cmd->add_option("--steps", tc.steps, "training steps")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--seed", tc.seed, "training seed");
    train_cmd->add_option("--lr", tc.lr, "Adam learning rate");
    train_cmd->add_option("--margin", tc.margin, "triplet margin");
    train_cmd->add_option("--lambda-ce", tc.lambda_ce, "cross-entropy weight");
    train_cmd->add_option("--batch-p", tc.batch_p, "identities per batch")->check(CLI::PositiveNumber);
    train_cmd->add_option("--batch-k", tc.batch_k, "sequences per identity per batch")->check(CLI::PositiveNumber);
    train_cmd->add_option("--frames-per-sample", tc.frames_per_sample, "frames per training sample")
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--precision", precision, "training precision")
        ->check(CLI::IsMember({"f32", "f64"}));
    train_cmd->add_option("--out", out_dir, "checkpoint directory")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Rank-1 evaluation of a checkpoint");
    std::string ckpt, gallery_dir, probe_dir, gallery_split = "gallery", probe_split = "probe";
    eval_cmd->add_option("--ckpt", ckpt, "checkpoint directory")->required();
    eval_cmd->add_option("--gallery", gallery_dir, "gallery dataset directory")->required();
    eval_cmd->add_option("--probe", probe_dir, "probe dataset directory")->required();
    eval_cmd->add_option("--gallery-split", gallery_split, "manifest split for the gallery (or 'all')");
    eval_cmd->add_option("--probe-split", probe_split, "manifest split for the probe (or 'all')");

    // orders-bench
    auto* bench = app.add_subcommand("orders-bench", "Train and evaluate all nine order schedules");
    int bench_steps = 50;
    uint64_t bench_seed = 0;
    std::string csv_path, work_dir;
    bench->add_option("--data", data_dir, "depth-map dataset directory")->required();
    bench->add_option("--steps", bench_steps, "training steps per schedule")->check(CLI::NonNegativeNumber);
    bench->add_option("--seed", bench_seed, "training seed");
    bench->add_option("--csv", csv_path, "also write the CSV table to this file");
    bench->add_option("--work", work_dir, "keep checkpoints under this directory");

    // describe
    auto* describe = app.add_subcommand("describe", "Shape trace and parameter count");
    std::string describe_orders;
    describe->add_option("--config", config_file, "JSON model config");
    describe->add_option("--orders", describe_orders, "per-stage interaction orders");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*synth) return cmd_synth(identities, seqs_per_id, frames, points, noise_sigma, seed, out_dir);
        if (*project) return cmd_project(mode, config_file, in_dir, out_dir, ppm, colormap);
        if (*gradcheck) return cmd_gradcheck(module);
        if (*train_cmd) {
            tc.precision = (precision == "f64") ? Precision::f64 : Precision::f32;
            ModelConfig mc;
            return cmd_train(data_dir, orders_str, tc, out_dir, mc);
        }
        if (*eval_cmd) return cmd_eval(ckpt, gallery_dir, probe_dir, gallery_split, probe_split);
        if (*bench) return cmd_orders_bench(data_dir, bench_steps, bench_seed, csv_path, work_dir);
        if (*describe) return cmd_describe(config_file, describe_orders);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
