// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "horgait/pointcloud.hpp"

using namespace horgait;
namespace fs = std::filesystem;

namespace {
fs::path temp_file(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "horgait_test_pointcloud";
    fs::create_directories(dir);
    return dir / name;
}
}  // namespace

TEST_CASE("pcseq round-trip preserves every coordinate exactly") {
    PointCloudSequence seq;
    seq.frames.resize(3);
    for (size_t t = 0; t < seq.frames.size(); ++t) seq.frames[t].frame_index = static_cast<int>(t);
    double vals[] = {0.1, -2.5, 1e-17, 3.14159265358979312, -0.0, 7.0};
    int vi = 0;
    for (auto& f : seq.frames)
        for (int i = 0; i < 4; ++i) {
            f.points.push_back({vals[(vi++) % 6] * (i + 1), vals[(vi++) % 6], vals[(vi++) % 6]});
        }
    auto path = temp_file("roundtrip.pcseq");
    save_pcseq(seq, path.string());
    PointCloudSequence back = load_pcseq(path.string());
    REQUIRE(back.frames.size() == 3);
    CHECK(sequences_equal(seq, back));
    for (size_t t = 0; t < 3; ++t)
        for (size_t i = 0; i < 4; ++i) {
            CHECK(back.frames[t].points[i].x == seq.frames[t].points[i].x);
            CHECK(back.frames[t].points[i].y == seq.frames[t].points[i].y);
            CHECK(back.frames[t].points[i].z == seq.frames[t].points[i].z);
        }
}

TEST_CASE("save is deterministic byte-for-byte") {
    PointCloudSequence seq;
    seq.frames.resize(2);
    seq.frames[0].points = {{1.0 / 3.0, -2.0 / 7.0, 0.1}};
    seq.frames[1].points = {{-1e-9, 5e8, 2.0 / 3.0}, {0, 0, 0}};
    auto p1 = temp_file("det1.pcseq"), p2 = temp_file("det2.pcseq");
    save_pcseq(seq, p1.string());
    save_pcseq(seq, p2.string());
    std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), {});
    std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
    CHECK(!sa.empty());
}

TEST_CASE("rotate_z quarter turn maps (1,0,2) to (0,-1,2)") {
    PointCloudSequence seq;
    seq.frames.resize(1);
    seq.frames[0].points = {{1, 0, 2}};
    PointCloudSequence rot = rotate_z(seq, M_PI / 2);
    CHECK(std::abs(rot.frames[0].points[0].x - 0.0) < 1e-12);
    CHECK(std::abs(rot.frames[0].points[0].y - (-1.0)) < 1e-12);
    CHECK(rot.frames[0].points[0].z == 2.0);
}

TEST_CASE("rotate_z preserves radius and z, composes additively") {
    PointCloudSequence seq;
    seq.frames.resize(1);
    seq.frames[0].points = {{0.3, -1.2, 0.7}, {2.0, 0.5, -0.1}};
    double a = 0.37, b = -1.1;
    PointCloudSequence r1 = rotate_z(rotate_z(seq, a), b);
    PointCloudSequence r2 = rotate_z(seq, a + b);
    for (size_t i = 0; i < 2; ++i) {
        const auto& p = seq.frames[0].points[i];
        const auto& q = r1.frames[0].points[i];
        CHECK(std::abs(std::hypot(p.x, p.y) - std::hypot(q.x, q.y)) < 1e-12);
        CHECK(q.z == p.z);
        CHECK(std::abs(q.x - r2.frames[0].points[i].x) < 1e-12);
        CHECK(std::abs(q.y - r2.frames[0].points[i].y) < 1e-12);
    }
}

TEST_CASE("rotate_z by zero is the identity") {
    PointCloudSequence seq;
    seq.frames.resize(1);
    seq.frames[0].points = {{0.5, 0.25, -3.0}};
    PointCloudSequence r = rotate_z(seq, 0.0);
    CHECK(sequences_equal(seq, r));
}

TEST_CASE("malformed header is rejected with path and line") {
    auto path = temp_file("bad_header.pcseq");
    {
        std::ofstream out(path);
        out << "PQSEQ v1 frames=1\n";
    }
    try {
        load_pcseq(path.string());
        FAIL("expected an exception");
    } catch (const std::exception& e) {
        std::string msg = e.what();
        CHECK(msg.find("bad_header.pcseq") != std::string::npos);
        CHECK(msg.find(":1") != std::string::npos);
    }
}

TEST_CASE("frame count mismatch and non-finite coordinates are rejected") {
    auto p1 = temp_file("bad_count.pcseq");
    {
        std::ofstream out(p1);
        out << "PCSEQ v1 frames=2\nframe 0 1\n1 2 3\n";
    }
    CHECK_THROWS(load_pcseq(p1.string()));

    auto p2 = temp_file("bad_nan.pcseq");
    {
        std::ofstream out(p2);
        out << "PCSEQ v1 frames=1\nframe 0 1\nnan 2 3\n";
    }
    CHECK_THROWS(load_pcseq(p2.string()));
}

TEST_CASE("sequence_id is taken from the filename stem on load") {
    PointCloudSequence seq;
    seq.frames.resize(1);
    seq.frames[0].points = {{1, 2, 3}};
    auto path = temp_file("id042_seq03.pcseq");
    save_pcseq(seq, path.string());
    PointCloudSequence back = load_pcseq(path.string());
    CHECK(back.sequence_id == "id042_seq03");
}
