// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "horgait/pointcloud.hpp"

namespace horgait {

enum class ProjectionMode { planar, spherical };
enum class Colormap { gray3, turbo_like };

struct ProjectionConfig {
    ProjectionMode mode = ProjectionMode::planar;
    double delta_theta = 0.00349;  // rad / pixel (0.2 deg)
    double delta_phi = 0.00349;
    double sphere_radius = 1.0;    // spherical only
    double sphere_center_z = 0.8;  // spherical only
    double range_offset_c = 0.0;   // planar only
    int raster_width = 512;
    int raster_height = 128;
    int out_width = 44;
    int out_height = 64;
};

// Raw rasterized depth at full raster resolution. Background is depth 0 /
// occupancy false; occupied pixels carry the nearest-surface depth.
struct DepthFrame {
    int width = 0, height = 0;
    std::vector<double> depth;   // height*width, row-major
    std::vector<uint8_t> occupancy;
    int skipped_on_axis = 0;     // azimuth undefined (x = y = 0)
    int dropped_out_of_raster = 0;

    double& at(int row, int col) { return depth[static_cast<size_t>(row) * width + col]; }
    double at(int row, int col) const { return depth[static_cast<size_t>(row) * width + col]; }
    bool occupied(int row, int col) const { return occupancy[static_cast<size_t>(row) * width + col] != 0; }
};

// Full-raster colorized image, 3 x height x width, values in [0, 1].
struct RgbImage {
    int width = 0, height = 0;
    std::vector<double> data;  // 3*height*width

    double& at(int c, int row, int col) {
        return data[(static_cast<size_t>(c) * height + row) * width + col];
    }
    double at(int c, int row, int col) const {
        return data[(static_cast<size_t>(c) * height + row) * width + col];
    }
};

// Network-input frame, fixed 3 x 64 x 44.
struct RgbFrame {
    static constexpr int kHeight = 64;
    static constexpr int kWidth = 44;
    std::vector<double> data = std::vector<double>(3 * kHeight * kWidth, 0.0);

    double& at(int c, int row, int col) {
        return data[(static_cast<size_t>(c) * kHeight + row) * kWidth + col];
    }
    double at(int c, int row, int col) const {
        return data[(static_cast<size_t>(c) * kHeight + row) * kWidth + col];
    }
};

struct DepthMapSequence {
    std::vector<RgbFrame> frames;
    std::optional<int> identity_label;
    std::string sequence_id;
};

struct ProjectedPoint {
    bool valid = false;  // false when azimuth is undefined
    double h = 0.0, v = 0.0, d = 0.0;
};

// Planar (cylindrical) projection:
//   h = atan2(x, y) / dtheta
//   v = asin((z - c) / R) / dphi,  R = sqrt(x^2 + y^2 + (z - c)^2)
//   d = sqrt(x^2 + y^2)
ProjectedPoint project_point_planar(const Point3& p, const ProjectionConfig& cfg);

// Spherical projection against a reference sphere of radius r centered at
// (0, 0, z_r):
//   h = atan2(x, y) / dtheta
//   v = atan2(z - z_r, rho) / dphi,  rho = sqrt(x^2 + y^2)
//   d = |p - (0,0,z_r)| - r, clamped below at kSphericalDepthEps
ProjectedPoint project_point_spherical(const Point3& p, const ProjectionConfig& cfg);

constexpr double kSphericalDepthEps = 1e-6;

// Continuous (h, v) -> integer pixel. Rounds half away from zero, then
// shifts so the raster center is (raster_width/2, raster_height/2); v grows
// upward (toward row 0). Returns false if outside the raster.
bool raster_pixel(double h, double v, const ProjectionConfig& cfg, int& row, int& col);

// Nearest-wins rasterization of one frame.
DepthFrame rasterize(const PointCloudFrame& frame, const ProjectionConfig& cfg);

// Min-max normalization of occupied depths into [0.05, 1.0] (a single
// distinct depth maps to 1.0), then colormap. Background stays 0.
RgbImage normalize_colorize(const DepthFrame& df, Colormap colormap);

// Tight bounding box of non-background pixels, padded symmetrically to the
// exact 64:44 aspect ratio, nearest-neighbor resampled to 64x44.
RgbFrame crop_resize(const RgbImage& rgb);

DepthMapSequence project_sequence(const PointCloudSequence& seq, const ProjectionConfig& cfg,
                                  Colormap colormap = Colormap::gray3);

// 8-bit P6 preview, channel values round(255*v).
void write_ppm(const RgbFrame& frame, const std::string& path);

}  // namespace horgait
