#pragma once

#include <cstdint>

#include "skelrec/skeleton.hpp"

namespace skelrec {

// Parametric flick motions rendered in randomized camera frames: each
// sequence winds up toward a random azimuth, snaps to an extended class pose
// a couple of frames in, and relaxes exponentially onto the root, so the
// remainder of the clip rests at the origin of the view-invariant frame.
// Classes share the same joint groups and differ in the azimuth the limbs
// flick toward and in which limbs reach farthest, so they are confusable but
// separable. All stochastic variation except the camera and the true length
// scales with `noise`; at noise = 0 with min_frames = frames every sequence
// of a class is the same canonical trajectory.
struct SynthSpec {
    int classes = 4;
    int per_class = 50;
    int frames = 50;      // maximum (and default) true length
    int min_frames = 0;   // > 0 draws true lengths uniformly in [min_frames, frames]
    int joints = 15;
    double noise = 0.1;
    double train_fraction = 0.7;
    std::uint64_t seed = 1;
};

Dataset generate_synthetic(const SynthSpec& spec);

// Canonical (camera-free, jitter-free) pose of class `cls` at frame index
// `frame`. generate_synthetic renders exactly this when noise = 0.
JointFrame synthetic_class_frame(int cls, int frame, int joints);

// Joint layout used by the generator: 0=root, 1=spine, 2=hip_left, 3=hip_right.
JointMap synthetic_joint_map();

}  // namespace skelrec
