// SPDX-License-Identifier: Apache-2.0
#include "horgait/pointcloud.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace horgait {

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

std::string format_coord(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

PointCloudSequence load_pcseq(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    int lineno = 0;
    std::string line;
    auto next_line = [&](const char* what) {
        if (!std::getline(in, line)) parse_fail(path, lineno + 1, std::string("unexpected end of file, expected ") + what);
        ++lineno;
    };

    next_line("PCSEQ header");
    int declared_frames = 0;
    if (std::sscanf(line.c_str(), "PCSEQ v1 frames=%d", &declared_frames) != 1)
        parse_fail(path, lineno, "malformed header: " + line);
    if (declared_frames < 1) parse_fail(path, lineno, "frame count must be >= 1");

    PointCloudSequence seq;
    auto stem = path.find_last_of("/\\");
    std::string name = (stem == std::string::npos) ? path : path.substr(stem + 1);
    auto dot = name.find_last_of('.');
    seq.sequence_id = (dot == std::string::npos) ? name : name.substr(0, dot);

    for (int f = 0; f < declared_frames; ++f) {
        next_line("frame record");
        int idx = 0, npts = -1;
        if (std::sscanf(line.c_str(), "frame %d %d", &idx, &npts) != 2 || npts < 0)
            parse_fail(path, lineno, "malformed frame record: " + line);
        if (idx != f) parse_fail(path, lineno, "frame index not strictly increasing from 0");
        PointCloudFrame frame;
        frame.frame_index = idx;
        frame.points.reserve(static_cast<size_t>(npts));
        for (int p = 0; p < npts; ++p) {
            next_line("point");
            Point3 pt;
            if (std::sscanf(line.c_str(), "%lf %lf %lf", &pt.x, &pt.y, &pt.z) != 3)
                parse_fail(path, lineno, "malformed point: " + line);
            if (!std::isfinite(pt.x) || !std::isfinite(pt.y) || !std::isfinite(pt.z))
                parse_fail(path, lineno, "non-finite coordinate");
            frame.points.push_back(pt);
        }
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

void save_pcseq(const PointCloudSequence& seq, const std::string& path) {
    std::ostringstream out;
    out << "PCSEQ v1 frames=" << seq.frames.size() << "\n";
    for (size_t f = 0; f < seq.frames.size(); ++f) {
        const auto& frame = seq.frames[f];
        out << "frame " << f << " " << frame.points.size() << "\n";
        for (const auto& p : frame.points)
            out << format_coord(p.x) << " " << format_coord(p.y) << " " << format_coord(p.z) << "\n";
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write " + path);
    file << out.str();
    if (!file) throw std::runtime_error("write failed: " + path);
}

PointCloudSequence rotate_z(const PointCloudSequence& seq, double angle) {
    double c = std::cos(angle), s = std::sin(angle);
    PointCloudSequence out = seq;
    for (auto& frame : out.frames)
        for (auto& p : frame.points) {
            double x = p.x, y = p.y;
            p.x = x * c + y * s;
            p.y = -x * s + y * c;
        }
    return out;
}

bool sequences_equal(const PointCloudSequence& a, const PointCloudSequence& b) {
    if (a.frames.size() != b.frames.size()) return false;
    for (size_t f = 0; f < a.frames.size(); ++f) {
        if (a.frames[f].frame_index != b.frames[f].frame_index) return false;
        if (a.frames[f].points.size() != b.frames[f].points.size()) return false;
        for (size_t p = 0; p < a.frames[f].points.size(); ++p) {
            const auto& u = a.frames[f].points[p];
            const auto& v = b.frames[f].points[p];
            if (u.x != v.x || u.y != v.y || u.z != v.z) return false;
        }
    }
    return true;
}

}  // namespace horgait
