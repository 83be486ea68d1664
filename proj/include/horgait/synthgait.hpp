// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "horgait/pointcloud.hpp"

namespace horgait {

// Parametric walker identity. Every field lives in a closed range so that
// identities drawn from seeds are always physically plausible.
struct WalkerParams {
    double height;            // [1.5, 2.0] m
    double leg_length_ratio;  // [0.45, 0.55]
    double stride_amplitude;  // [0.3, 0.7] rad
    double gait_frequency;    // [0.8, 1.4] Hz
    double arm_swing_ratio;   // [0.5, 1.0]
    double torso_radius;      // [0.10, 0.18] m
    double phase_offset;      // [0, 2pi) rad
};

struct SynthConfig {
    int frames = 30;
    int points_per_frame = 768;
    double frame_rate = 10.0;      // Hz
    double sensor_distance = 4.0;  // m along +y
    double noise_sigma = 0.0;      // m
    uint64_t seed = 0;
    bool translate = false;  // walk in place by default
};

// Sinusoidal joint state of the body model at time t (seconds).
// Legs are antiphase; arms are antiphase to the same-side leg and scaled
// by arm_swing_ratio.
struct BodyPose {
    double left_leg;
    double right_leg;
    double left_arm;
    double right_arm;
};

BodyPose joint_angles(const WalkerParams& params, double t);

// Uniform draw of an identity from the per-field ranges, splitmix64 stream.
WalkerParams synth_identity(uint64_t seed);

// Samples points_per_frame surface points per frame from a 6-primitive
// body model (torso cylinder, head sphere, 4 limb capsules) posed by
// joint_angles, standing at sensor_distance along +y. With zero noise the
// body model keeps every z in [0, params.height].
PointCloudSequence generate_sequence(const WalkerParams& params, const SynthConfig& cfg);

}  // namespace horgait
