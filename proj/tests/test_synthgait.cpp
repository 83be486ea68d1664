// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "horgait/synthgait.hpp"

using namespace horgait;

namespace {
bool params_equal(const WalkerParams& a, const WalkerParams& b) {
    return a.height == b.height && a.leg_length_ratio == b.leg_length_ratio &&
           a.stride_amplitude == b.stride_amplitude && a.gait_frequency == b.gait_frequency &&
           a.arm_swing_ratio == b.arm_swing_ratio && a.torso_radius == b.torso_radius &&
           a.phase_offset == b.phase_offset;
}

double frame_z_extent(const PointCloudFrame& f) {
    double lo = 1e30, hi = -1e30;
    for (const auto& p : f.points) {
        lo = std::min(lo, p.z);
        hi = std::max(hi, p.z);
    }
    return hi - lo;
}
}  // namespace

TEST_CASE("synth_identity is deterministic and in range") {
    for (uint64_t seed : {0ULL, 1ULL, 42ULL, 0xFFFFFFFFFFFFFFFFULL}) {
        WalkerParams a = synth_identity(seed);
        WalkerParams b = synth_identity(seed);
        CHECK(params_equal(a, b));
        CHECK(a.height >= 1.5);
        CHECK(a.height <= 2.0);
        CHECK(a.leg_length_ratio >= 0.45);
        CHECK(a.leg_length_ratio <= 0.55);
        CHECK(a.stride_amplitude >= 0.3);
        CHECK(a.stride_amplitude <= 0.7);
        CHECK(a.gait_frequency >= 0.8);
        CHECK(a.gait_frequency <= 1.4);
        CHECK(a.arm_swing_ratio >= 0.5);
        CHECK(a.arm_swing_ratio <= 1.0);
        CHECK(a.torso_radius >= 0.10);
        CHECK(a.torso_radius <= 0.18);
        CHECK(a.phase_offset >= 0.0);
        CHECK(a.phase_offset < 2 * M_PI);
    }
}

TEST_CASE("100 seed pairs produce at least 99 distinct identities") {
    int distinct = 0;
    for (uint64_t i = 0; i < 100; ++i) {
        WalkerParams a = synth_identity(2 * i);
        WalkerParams b = synth_identity(2 * i + 1);
        if (!params_equal(a, b)) ++distinct;
    }
    CHECK(distinct >= 99);
}

TEST_CASE("generate_sequence is deterministic and shape-correct") {
    WalkerParams params = synth_identity(5);
    SynthConfig cfg;
    cfg.frames = 1;
    cfg.points_per_frame = 10;
    cfg.seed = 9;
    PointCloudSequence a = generate_sequence(params, cfg);
    PointCloudSequence b = generate_sequence(params, cfg);
    REQUIRE(a.frames.size() == 1);
    CHECK(a.frames[0].points.size() == 10);
    CHECK(sequences_equal(a, b));
}

TEST_CASE("noise-free z values stay within the body-model bound") {
    for (uint64_t seed : {1ULL, 17ULL, 333ULL}) {
        WalkerParams params = synth_identity(seed);
        SynthConfig cfg;
        cfg.frames = 20;
        cfg.points_per_frame = 500;
        cfg.noise_sigma = 0.0;
        cfg.seed = seed + 100;
        PointCloudSequence seq = generate_sequence(params, cfg);
        for (const auto& f : seq.frames)
            for (const auto& p : f.points) {
                CHECK(p.z >= -0.05);
                CHECK(p.z <= params.height + 0.05);
            }
    }
}

TEST_CASE("height gap of 0.1 m separates mean z-extent by at least 0.08 m") {
    WalkerParams tall = synth_identity(3);
    WalkerParams shrt = tall;
    tall.height = 1.95;
    shrt.height = 1.55;  // gap 0.4 >= 0.1
    SynthConfig cfg;
    cfg.frames = 10;
    cfg.points_per_frame = 2000;
    cfg.noise_sigma = 0.0;
    cfg.seed = 11;
    PointCloudSequence a = generate_sequence(tall, cfg);
    PointCloudSequence b = generate_sequence(shrt, cfg);
    double ma = 0, mb = 0;
    for (const auto& f : a.frames) ma += frame_z_extent(f) / cfg.frames;
    for (const auto& f : b.frames) mb += frame_z_extent(f) / cfg.frames;
    CHECK(std::abs(ma - mb) >= 0.08);

    // a 0.1 m gap should already clear the separation bound
    WalkerParams close_tall = tall;
    close_tall.height = 1.75;
    WalkerParams close_short = tall;
    close_short.height = 1.65;
    PointCloudSequence c = generate_sequence(close_tall, cfg);
    PointCloudSequence d = generate_sequence(close_short, cfg);
    double mc = 0, md = 0;
    for (const auto& f : c.frames) mc += frame_z_extent(f) / cfg.frames;
    for (const auto& f : d.frames) md += frame_z_extent(f) / cfg.frames;
    CHECK(std::abs(mc - md) >= 0.08);
}

TEST_CASE("joint angles are periodic at round(frame_rate/gait_frequency) frames") {
    WalkerParams params = synth_identity(8);
    params.gait_frequency = 1.25;  // divides 10 Hz evenly: period = 8 frames
    double frame_rate = 10.0;
    int period = static_cast<int>(std::round(frame_rate / params.gait_frequency));
    for (int t = 0; t < 5; ++t) {
        BodyPose p0 = joint_angles(params, t / frame_rate);
        BodyPose p1 = joint_angles(params, (t + period) / frame_rate);
        CHECK(std::abs(p0.left_leg - p1.left_leg) < 1e-6);
        CHECK(std::abs(p0.right_leg - p1.right_leg) < 1e-6);
        CHECK(std::abs(p0.left_arm - p1.left_arm) < 1e-6);
        CHECK(std::abs(p0.right_arm - p1.right_arm) < 1e-6);
    }
}

TEST_CASE("legs are antiphase and arms counter same-side legs") {
    WalkerParams params = synth_identity(12);
    params.phase_offset = 0.0;
    for (double t : {0.0, 0.1, 0.31, 0.77}) {
        BodyPose p = joint_angles(params, t);
        CHECK(std::abs(p.left_leg + p.right_leg) < 1e-12);
        CHECK(std::abs(p.left_arm + params.arm_swing_ratio * p.left_leg) < 1e-12);
        CHECK(std::abs(p.right_arm + params.arm_swing_ratio * p.right_leg) < 1e-12);
    }
}
