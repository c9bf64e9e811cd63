#pragma once

#include <optional>
#include <string>
#include <vector>

#include "skelrec/common.hpp"

namespace skelrec {

// Indices of the joints the view-invariant transform is built from.
struct JointMap {
    int root = -1;
    int spine = -1;
    int hip_left = -1;
    int hip_right = -1;

    bool valid(int num_joints) const;
};

using JointFrame = Eigen::Matrix<double, Eigen::Dynamic, 3>;  // J x 3

struct ActionSequence {
    std::string id;
    std::optional<int> label;
    std::optional<int> subject;
    std::optional<int> view;
    JointMap joints;
    std::vector<JointFrame> frames;
    // Per-frame validity; empty means every frame is real. resample() fills it
    // so zero padding can be told apart from data downstream.
    std::vector<bool> frame_valid;

    int num_frames() const { return static_cast<int>(frames.size()); }
    int num_joints() const { return frames.empty() ? 0 : static_cast<int>(frames[0].rows()); }
    bool frame_is_valid(int t) const { return frame_valid.empty() || frame_valid[t]; }
};

// Canonical frame: column 1 up the spine, column 2 across the hips with the
// spine component removed, column 3 their cross product; origin at the root
// joint of frame 0.
struct ViewInvariantBasis {
    Eigen::Matrix3d rotation;
    Eigen::Vector3d origin;
};

enum class Split { Train, Test };

struct Dataset {
    std::vector<ActionSequence> sequences;
    std::vector<Split> split;  // parallel to sequences
    std::string provenance;

    int size() const { return static_cast<int>(sequences.size()); }
};

enum class NormMode { Global, PerAxis };

// Min/max over the training split. Global mode tracks one pair for all axes
// (index 0); per-axis mode tracks x, y, z separately.
struct NormStats {
    NormMode mode = NormMode::Global;
    Eigen::Vector3d min = Eigen::Vector3d::Zero();
    Eigen::Vector3d max = Eigen::Vector3d::Zero();
};

constexpr double kGeomEps = 1e-8;  // degenerate-pose threshold
constexpr int kDefaultTmax = 50;

ViewInvariantBasis compute_basis(const ActionSequence& seq);
ActionSequence apply_view_invariant(const ActionSequence& seq, const ViewInvariantBasis& basis);

// Exactly t_max output frames: uniform endpoint-inclusive index selection when
// the sequence is longer, zero padding (frame_valid=false) when shorter.
ActionSequence resample(const ActionSequence& seq, int t_max = kDefaultTmax);

NormStats compute_norm_stats(const Dataset& ds, NormMode mode);
// x -> 2(x - min)/(max - min) - 1 per tracked axis; padded frames untouched.
// Stats come from the training split when not supplied.
NormStats normalize(Dataset& ds, const std::optional<NormStats>& stats = std::nullopt,
                    NormMode mode = NormMode::Global);

// Row t = frame t flattened joint-major, axis-minor: (j0x j0y j0z j1x ...).
Eigen::MatrixXd flatten(const ActionSequence& seq);
std::vector<JointFrame> unflatten(const Eigen::MatrixXd& m, int num_joints);

}  // namespace skelrec
