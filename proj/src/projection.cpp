// SPDX-License-Identifier: Apache-2.0
#include "horgait/projection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace horgait {

ProjectedPoint project_point_planar(const Point3& p, const ProjectionConfig& cfg) {
    ProjectedPoint out;
    double rho2 = p.x * p.x + p.y * p.y;
    if (rho2 == 0.0) return out;
    double dz = p.z - cfg.range_offset_c;
    double range = std::sqrt(rho2 + dz * dz);
    out.valid = true;
    out.h = std::atan2(p.x, p.y) / cfg.delta_theta;
    out.v = std::asin(dz / range) / cfg.delta_phi;
    out.d = std::sqrt(rho2);
    return out;
}

ProjectedPoint project_point_spherical(const Point3& p, const ProjectionConfig& cfg) {
    ProjectedPoint out;
    double rho2 = p.x * p.x + p.y * p.y;
    if (rho2 == 0.0) return out;
    double rho = std::sqrt(rho2);
    double dz = p.z - cfg.sphere_center_z;
    out.valid = true;
    out.h = std::atan2(p.x, p.y) / cfg.delta_theta;
    out.v = std::atan2(dz, rho) / cfg.delta_phi;
    out.d = std::max(std::sqrt(rho2 + dz * dz) - cfg.sphere_radius, kSphericalDepthEps);
    return out;
}

bool raster_pixel(double h, double v, const ProjectionConfig& cfg, int& row, int& col) {
    col = static_cast<int>(std::round(h)) + cfg.raster_width / 2;
    row = cfg.raster_height / 2 - static_cast<int>(std::round(v));
    return row >= 0 && row < cfg.raster_height && col >= 0 && col < cfg.raster_width;
}

DepthFrame rasterize(const PointCloudFrame& frame, const ProjectionConfig& cfg) {
    DepthFrame df;
    df.width = cfg.raster_width;
    df.height = cfg.raster_height;
    df.depth.assign(static_cast<size_t>(df.width) * df.height, 0.0);
    df.occupancy.assign(static_cast<size_t>(df.width) * df.height, 0);

    for (const auto& p : frame.points) {
        ProjectedPoint pp = (cfg.mode == ProjectionMode::planar) ? project_point_planar(p, cfg)
                                                                 : project_point_spherical(p, cfg);
        if (!pp.valid) {
            ++df.skipped_on_axis;
            continue;
        }
        int row, col;
        if (!raster_pixel(pp.h, pp.v, cfg, row, col)) {
            ++df.dropped_out_of_raster;
            continue;
        }
        size_t idx = static_cast<size_t>(row) * df.width + col;
        if (!df.occupancy[idx] || pp.d < df.depth[idx]) {
            df.depth[idx] = pp.d;
            df.occupancy[idx] = 1;
        }
    }
    return df;
}

namespace {

// Fixed 5-anchor piecewise-linear colormap (turbo-like ramp).
constexpr double kAnchors[5][3] = {
    {0.19, 0.07, 0.23},
    {0.22, 0.56, 0.82},
    {0.16, 0.91, 0.36},
    {0.96, 0.73, 0.13},
    {0.73, 0.11, 0.11},
};

void turbo_like(double t, double rgb[3]) {
    double s = std::clamp(t, 0.0, 1.0) * 4.0;
    int i = std::min(static_cast<int>(s), 3);
    double f = s - i;
    for (int c = 0; c < 3; ++c) rgb[c] = kAnchors[i][c] + f * (kAnchors[i + 1][c] - kAnchors[i][c]);
}

}  // namespace

RgbImage normalize_colorize(const DepthFrame& df, Colormap colormap) {
    RgbImage img;
    img.width = df.width;
    img.height = df.height;
    img.data.assign(3 * static_cast<size_t>(df.width) * df.height, 0.0);

    double dmin = std::numeric_limits<double>::infinity();
    double dmax = -std::numeric_limits<double>::infinity();
    size_t n = df.depth.size();
    for (size_t i = 0; i < n; ++i) {
        if (!df.occupancy[i]) continue;
        dmin = std::min(dmin, df.depth[i]);
        dmax = std::max(dmax, df.depth[i]);
    }
    if (!(dmin <= dmax)) return img;  // all background

    double span = dmax - dmin;
    for (size_t i = 0; i < n; ++i) {
        if (!df.occupancy[i]) continue;
        double v = (span > 0.0) ? 0.05 + 0.95 * (df.depth[i] - dmin) / span : 1.0;
        if (colormap == Colormap::gray3) {
            img.data[i] = v;
            img.data[n + i] = v;
            img.data[2 * n + i] = v;
        } else {
            double rgb[3];
            turbo_like(v, rgb);
            img.data[i] = rgb[0];
            img.data[n + i] = rgb[1];
            img.data[2 * n + i] = rgb[2];
        }
    }
    return img;
}

RgbFrame crop_resize(const RgbImage& rgb) {
    RgbFrame out;
    int y0 = rgb.height, y1 = -1, x0 = rgb.width, x1 = -1;
    for (int y = 0; y < rgb.height; ++y)
        for (int x = 0; x < rgb.width; ++x)
            for (int c = 0; c < 3; ++c)
                if (rgb.at(c, y, x) > 0.0) {
                    y0 = std::min(y0, y);
                    y1 = std::max(y1, y);
                    x0 = std::min(x0, x);
                    x1 = std::max(x1, x);
                    break;
                }
    if (y1 < 0) return out;  // all background -> all zero

    int bh = y1 - y0 + 1;
    int bw = x1 - x0 + 1;
    // Smallest box with the exact 64:44 = 16:11 aspect that contains the
    // bounding box: 16m x 11m. Pad symmetrically (extra pixel goes to the
    // bottom/right); padding may extend past the raster, which reads as
    // background.
    int m = std::max((bh + 15) / 16, (bw + 10) / 11);
    int ch = 16 * m, cw = 11 * m;
    int top = y0 - (ch - bh) / 2;
    int left = x0 - (cw - bw) / 2;

    for (int i = 0; i < RgbFrame::kHeight; ++i) {
        int sy = top + static_cast<int>(std::floor((i + 0.5) * ch / static_cast<double>(RgbFrame::kHeight)));
        for (int j = 0; j < RgbFrame::kWidth; ++j) {
            int sx = left + static_cast<int>(std::floor((j + 0.5) * cw / static_cast<double>(RgbFrame::kWidth)));
            if (sy < 0 || sy >= rgb.height || sx < 0 || sx >= rgb.width) continue;
            for (int c = 0; c < 3; ++c) out.at(c, i, j) = rgb.at(c, sy, sx);
        }
    }
    return out;
}

DepthMapSequence project_sequence(const PointCloudSequence& seq, const ProjectionConfig& cfg,
                                  Colormap colormap) {
    DepthMapSequence out;
    out.identity_label = seq.identity_label;
    out.sequence_id = seq.sequence_id;
    out.frames.resize(seq.frames.size());
#pragma omp parallel for schedule(static)
    for (long f = 0; f < static_cast<long>(seq.frames.size()); ++f) {
        DepthFrame df = rasterize(seq.frames[static_cast<size_t>(f)], cfg);
        out.frames[static_cast<size_t>(f)] = crop_resize(normalize_colorize(df, colormap));
    }
    return out;
}

void write_ppm(const RgbFrame& frame, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "P6\n" << RgbFrame::kWidth << " " << RgbFrame::kHeight << "\n255\n";
    for (int y = 0; y < RgbFrame::kHeight; ++y)
        for (int x = 0; x < RgbFrame::kWidth; ++x)
            for (int c = 0; c < 3; ++c)
                out.put(static_cast<char>(static_cast<int>(std::round(255.0 * frame.at(c, y, x)))));
}

}  // namespace horgait
