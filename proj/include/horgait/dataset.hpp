// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "horgait/projection.hpp"

namespace horgait {

// One dataset record, as stored in manifest.json at the dataset root.
struct ManifestEntry {
    std::string sequence_path;  // relative to the manifest directory
    int identity_label = 0;
    std::string split;  // "train" | "gallery" | "probe"
};

std::vector<ManifestEntry> load_manifest(const std::string& dataset_dir);
void save_manifest(const std::string& dataset_dir, const std::vector<ManifestEntry>& entries);

// A depth-map sequence held in memory as raw [T,3,64,44] doubles.
struct LoadedSequence {
    std::vector<double> data;
    int frames = 0;
    int identity_label = 0;
    std::string split;
};

// Writes one directory per sequence with frame_%04d.tnsr files (3x64x44,
// f64), optionally PPM previews alongside.
void save_depth_sequence(const DepthMapSequence& seq, const std::string& dir, bool ppm = false);
LoadedSequence load_depth_sequence(const std::string& dir);

std::vector<LoadedSequence> load_depth_dataset(const std::string& dataset_dir,
                                               const std::string& split_filter = "");

}  // namespace horgait
