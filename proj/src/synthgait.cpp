// SPDX-License-Identifier: Apache-2.0
#include "horgait/synthgait.hpp"

#include <array>
#include <cmath>

#include "horgait/rng.hpp"

namespace horgait {

namespace {

struct Vec3 {
    double x, y, z;
};

Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Vec3 operator*(double k, Vec3 v) { return {k * v.x, k * v.y, k * v.z}; }

// Orthonormal basis with w as the third axis.
void basis(Vec3 w, Vec3& u, Vec3& v) {
    Vec3 a = (std::abs(w.x) < 0.9) ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    // u = normalize(a x w)
    Vec3 c{a.y * w.z - a.z * w.y, a.z * w.x - a.x * w.z, a.x * w.y - a.y * w.x};
    double n = std::sqrt(c.x * c.x + c.y * c.y + c.z * c.z);
    u = (1.0 / n) * c;
    v = {w.y * u.z - w.z * u.y, w.z * u.x - w.x * u.z, w.x * u.y - w.y * u.x};
}

// Surface primitives. Sampling is area-weighted across the whole body.
struct Cylinder {  // lateral surface only
    Vec3 base;
    Vec3 axis;  // unit
    double length, radius;
    double area() const { return 2.0 * M_PI * radius * length; }
    Vec3 sample(SplitMix64& rng) const {
        double a = rng.uniform() * 2.0 * M_PI;
        double h = rng.uniform() * length;
        Vec3 u, v;
        basis(axis, u, v);
        return base + h * axis + (radius * std::cos(a)) * u + (radius * std::sin(a)) * v;
    }
};

struct Sphere {
    Vec3 center;
    double radius;
    double area() const { return 4.0 * M_PI * radius * radius; }
    Vec3 sample(SplitMix64& rng) const {
        double z = 2.0 * rng.uniform() - 1.0;
        double a = rng.uniform() * 2.0 * M_PI;
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return center + Vec3{radius * r * std::cos(a), radius * r * std::sin(a), radius * z};
    }
};

struct Capsule {  // cylinder plus hemispherical caps
    Vec3 base;
    Vec3 axis;  // unit, from base toward tip
    double length, radius;
    double area() const { return 2.0 * M_PI * radius * length + 4.0 * M_PI * radius * radius; }
    Vec3 sample(SplitMix64& rng) const {
        double lateral = 2.0 * M_PI * radius * length;
        double pick = rng.uniform() * area();
        Vec3 u, v;
        basis(axis, u, v);
        if (pick < lateral) {
            double a = rng.uniform() * 2.0 * M_PI;
            double h = rng.uniform() * length;
            return base + h * axis + (radius * std::cos(a)) * u + (radius * std::sin(a)) * v;
        }
        // caps: one full sphere of area split across the two ends
        double z = 2.0 * rng.uniform() - 1.0;
        double a = rng.uniform() * 2.0 * M_PI;
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        Vec3 offset = (radius * r * std::cos(a)) * u + (radius * r * std::sin(a)) * v + (radius * z) * axis;
        Vec3 center = (z >= 0.0) ? base + length * axis : base;
        return center + offset;
    }
};

struct BodyModel {
    Cylinder torso;
    Sphere head;
    std::array<Capsule, 4> limbs;  // left leg, right leg, left arm, right arm

    template <typename F>
    void for_each(F&& f) const {
        f(torso);
        f(head);
        for (const auto& limb : limbs) f(limb);
    }
};

constexpr double kLegRadius = 0.06;
constexpr double kArmRadius = 0.04;

// Pose the 6 primitives at time t. Geometry keeps every surface point in
// z ∈ [0, height]: leg capsules bottom out at z = 0 when vertical, the head
// sphere tops out at exactly height.
BodyModel pose_body(const WalkerParams& wp, double t) {
    BodyPose pose = joint_angles(wp, t);
    double head_radius = 0.06 * wp.height;
    double hip_z = wp.leg_length_ratio * wp.height;
    double shoulder_z = wp.height - 2.0 * head_radius - 0.02;
    double leg_len = hip_z - kLegRadius;
    double arm_len = 0.35 * wp.height - kArmRadius;

    BodyModel body;
    body.torso = {{0, 0, hip_z}, {0, 0, 1}, shoulder_z - hip_z, wp.torso_radius};
    body.head = {{0, 0, wp.height - head_radius}, head_radius};

    double hip_off = 0.5 * wp.torso_radius;
    double shoulder_off = wp.torso_radius + kArmRadius;
    auto limb_dir = [](double angle) { return Vec3{std::sin(angle), 0, -std::cos(angle)}; };
    // limbs swing in the x-z plane (walker faces +x, sensor views the profile)
    body.limbs[0] = {{0, -hip_off, hip_z}, limb_dir(pose.left_leg), leg_len, kLegRadius};
    body.limbs[1] = {{0, hip_off, hip_z}, limb_dir(pose.right_leg), leg_len, kLegRadius};
    body.limbs[2] = {{0, -shoulder_off, shoulder_z}, limb_dir(pose.left_arm), arm_len, kArmRadius};
    body.limbs[3] = {{0, shoulder_off, shoulder_z}, limb_dir(pose.right_arm), arm_len, kArmRadius};
    return body;
}

}  // namespace

BodyPose joint_angles(const WalkerParams& p, double t) {
    double phase = 2.0 * M_PI * p.gait_frequency * t + p.phase_offset;
    double leg = p.stride_amplitude * std::sin(phase);
    double arm = p.arm_swing_ratio * p.stride_amplitude * std::sin(phase + M_PI);
    return {leg, -leg, arm, -arm};
}

WalkerParams synth_identity(uint64_t seed) {
    SplitMix64 rng(seed);
    WalkerParams p;
    p.height = rng.uniform(1.5, 2.0);
    p.leg_length_ratio = rng.uniform(0.45, 0.55);
    p.stride_amplitude = rng.uniform(0.3, 0.7);
    p.gait_frequency = rng.uniform(0.8, 1.4);
    p.arm_swing_ratio = rng.uniform(0.5, 1.0);
    p.torso_radius = rng.uniform(0.10, 0.18);
    p.phase_offset = rng.uniform(0.0, 2.0 * M_PI);
    return p;
}

PointCloudSequence generate_sequence(const WalkerParams& params, const SynthConfig& cfg) {
    SplitMix64 rng(cfg.seed);
    PointCloudSequence seq;
    seq.sequence_id = "synth";
    seq.frames.reserve(static_cast<size_t>(cfg.frames));

    for (int f = 0; f < cfg.frames; ++f) {
        double t = static_cast<double>(f) / cfg.frame_rate;
        BodyModel body = pose_body(params, t);

        double total_area = 0.0;
        body.for_each([&](const auto& prim) { total_area += prim.area(); });

        PointCloudFrame frame;
        frame.frame_index = f;
        frame.points.reserve(static_cast<size_t>(cfg.points_per_frame));
        double walk_x = cfg.translate ? 0.5 * t : 0.0;

        for (int i = 0; i < cfg.points_per_frame; ++i) {
            double pick = rng.uniform() * total_area;
            Vec3 pt{0, 0, 0};
            double acc = 0.0;
            bool picked = false;
            body.for_each([&](const auto& prim) {
                if (picked) return;
                acc += prim.area();
                if (pick < acc) {
                    pt = prim.sample(rng);
                    picked = true;
                }
            });
            if (!picked) pt = body.head.sample(rng);  // pick == total_area edge
            Point3 out{pt.x + walk_x, pt.y + cfg.sensor_distance, pt.z};
            if (cfg.noise_sigma > 0.0) {
                out.x += cfg.noise_sigma * rng.gaussian();
                out.y += cfg.noise_sigma * rng.gaussian();
                out.z += cfg.noise_sigma * rng.gaussian();
            }
            frame.points.push_back(out);
        }
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

}  // namespace horgait
