// SPDX-License-Identifier: Apache-2.0
#include "horgait/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "horgait/tnsr_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace horgait {

std::vector<ManifestEntry> load_manifest(const std::string& dataset_dir) {
    fs::path path = fs::path(dataset_dir) / "manifest.json";
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    json doc = json::parse(in);
    std::vector<ManifestEntry> out;
    for (const auto& rec : doc) {
        ManifestEntry e;
        e.sequence_path = rec.at("sequence_path").get<std::string>();
        e.identity_label = rec.at("identity_label").get<int>();
        e.split = rec.at("split").get<std::string>();
        out.push_back(std::move(e));
    }
    return out;
}

void save_manifest(const std::string& dataset_dir, const std::vector<ManifestEntry>& entries) {
    json doc = json::array();
    for (const auto& e : entries)
        doc.push_back({{"sequence_path", e.sequence_path},
                       {"identity_label", e.identity_label},
                       {"split", e.split}});
    fs::create_directories(dataset_dir);
    std::ofstream out(fs::path(dataset_dir) / "manifest.json");
    out << doc.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write manifest in " + dataset_dir);
}

static std::string frame_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04d.tnsr", i);
    return buf;
}

void save_depth_sequence(const DepthMapSequence& seq, const std::string& dir, bool ppm) {
    fs::create_directories(dir);
    for (size_t f = 0; f < seq.frames.size(); ++f) {
        const auto& frame = seq.frames[f];
        write_tnsr((fs::path(dir) / frame_name(static_cast<int>(f))).string(),
                   {3, RgbFrame::kHeight, RgbFrame::kWidth}, frame.data, TnsrDtype::f64);
        if (ppm) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "frame_%04zu.ppm", f);
            write_ppm(frame, (fs::path(dir) / buf).string());
        }
    }
}

LoadedSequence load_depth_sequence(const std::string& dir) {
    LoadedSequence out;
    for (int f = 0;; ++f) {
        fs::path path = fs::path(dir) / frame_name(f);
        if (!fs::exists(path)) break;
        TnsrData td = read_tnsr(path.string());
        if (td.shape != std::vector<int>{3, RgbFrame::kHeight, RgbFrame::kWidth})
            throw std::runtime_error("unexpected frame shape in " + path.string());
        out.data.insert(out.data.end(), td.values.begin(), td.values.end());
        ++out.frames;
    }
    if (out.frames == 0) throw std::runtime_error("no frames found in " + dir);
    return out;
}

std::vector<LoadedSequence> load_depth_dataset(const std::string& dataset_dir,
                                               const std::string& split_filter) {
    auto manifest = load_manifest(dataset_dir);
    std::vector<LoadedSequence> out;
    for (const auto& e : manifest) {
        if (!split_filter.empty() && e.split != split_filter) continue;
        LoadedSequence seq = load_depth_sequence((fs::path(dataset_dir) / e.sequence_path).string());
        seq.identity_label = e.identity_label;
        seq.split = e.split;
        out.push_back(std::move(seq));
    }
    return out;
}

}  // namespace horgait
