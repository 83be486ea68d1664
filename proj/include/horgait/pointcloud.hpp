// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

namespace horgait {

struct Point3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

struct PointCloudFrame {
    std::vector<Point3> points;
    int frame_index = 0;
};

struct PointCloudSequence {
    std::vector<PointCloudFrame> frames;
    std::optional<int> identity_label;
    std::string sequence_id;

    int frame_count() const { return static_cast<int>(frames.size()); }
};

// PCSEQ v1 text format (UTF-8, LF):
//   line 1:    PCSEQ v1 frames=<T>
//   per frame: frame <index> <n_points>
//              n_points lines "<x> <y> <z>"
// Coordinates are written with 17 significant digits, which round-trips
// 64-bit reals exactly.
PointCloudSequence load_pcseq(const std::string& path);
void save_pcseq(const PointCloudSequence& seq, const std::string& path);

// Rotation about the sensor z axis:
//   (x, y, z) -> (x cos t + y sin t, -x sin t + y cos t, z)
PointCloudSequence rotate_z(const PointCloudSequence& seq, double angle);

bool sequences_equal(const PointCloudSequence& a, const PointCloudSequence& b);

}  // namespace horgait
