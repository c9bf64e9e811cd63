#include "skelrec/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace skelrec {

bool JointMap::valid(int num_joints) const {
    std::set<int> ids{root, spine, hip_left, hip_right};
    if (ids.size() != 4) return false;
    for (int j : ids)
        if (j < 0 || j >= num_joints) return false;
    return true;
}

ViewInvariantBasis compute_basis(const ActionSequence& seq) {
    if (seq.frames.empty()) throw DegeneratePoseError("empty sequence");
    const JointFrame& f0 = seq.frames.front();
    if (!seq.joints.valid(static_cast<int>(f0.rows())))
        throw DegeneratePoseError("joint_map invalid for " + std::to_string(f0.rows()) + " joints");

    const Eigen::Vector3d root = f0.row(seq.joints.root);
    const Eigen::Vector3d v1 = Eigen::Vector3d(f0.row(seq.joints.spine)) - root;
    const Eigen::Vector3d v2 =
        Eigen::Vector3d(f0.row(seq.joints.hip_left)) - Eigen::Vector3d(f0.row(seq.joints.hip_right));

    if (v1.norm() <= kGeomEps) throw DegeneratePoseError("spine coincides with root");
    const Eigen::Vector3d v2_perp = v2 - v1 * (v1.dot(v2) / v1.squaredNorm());
    if (v2_perp.norm() <= kGeomEps) throw DegeneratePoseError("hip axis parallel to spine");

    ViewInvariantBasis basis;
    basis.rotation.col(0) = v1.normalized();
    basis.rotation.col(1) = v2_perp.normalized();
    basis.rotation.col(2) = v1.cross(v2_perp).normalized();
    basis.origin = root;
    return basis;
}

ActionSequence apply_view_invariant(const ActionSequence& seq, const ViewInvariantBasis& basis) {
    ActionSequence out = seq;
    // Columns are orthonormal by construction, so the inverse is the transpose.
    const Eigen::Matrix3d rinv = basis.rotation.transpose();
    for (auto& frame : out.frames)
        frame = ((frame.rowwise() - basis.origin.transpose()) * rinv.transpose()).eval();
    return out;
}

ActionSequence resample(const ActionSequence& seq, int t_max) {
    const int t = seq.num_frames();
    if (t < 1) throw ParseError("empty sequence");
    if (t_max < 1) throw ParseError("t_max must be positive");

    ActionSequence out = seq;
    out.frames.clear();
    out.frame_valid.assign(t_max, true);

    if (t > t_max) {
        // Endpoint-inclusive uniform subsampling.
        for (int i = 0; i < t_max; ++i) {
            int idx = (t_max == 1) ? 0
                                   : static_cast<int>(std::llround(
                                         static_cast<double>(i) * (t - 1) / (t_max - 1)));
            out.frames.push_back(seq.frames[idx]);
        }
    } else {
        out.frames = seq.frames;
        const int j = seq.num_joints();
        for (int i = t; i < t_max; ++i) {
            out.frames.push_back(JointFrame::Zero(j, 3));
            out.frame_valid[i] = false;
        }
    }
    return out;
}

namespace {

template <typename Fn>
void for_each_valid_coord(const Dataset& ds, bool train_only, Fn&& fn) {
    for (int i = 0; i < ds.size(); ++i) {
        if (train_only && ds.split[i] != Split::Train) continue;
        const ActionSequence& seq = ds.sequences[i];
        for (int t = 0; t < seq.num_frames(); ++t) {
            if (!seq.frame_is_valid(t)) continue;
            const JointFrame& f = seq.frames[t];
            for (Eigen::Index j = 0; j < f.rows(); ++j)
                for (int a = 0; a < 3; ++a) fn(f(j, a), a);
        }
    }
}

}  // namespace

NormStats compute_norm_stats(const Dataset& ds, NormMode mode) {
    NormStats s;
    s.mode = mode;
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = Eigen::Vector3d::Constant(-std::numeric_limits<double>::infinity());
    bool any = false;
    for_each_valid_coord(ds, /*train_only=*/true, [&](double v, int axis) {
        int a = (mode == NormMode::Global) ? 0 : axis;
        lo[a] = std::min(lo[a], v);
        hi[a] = std::max(hi[a], v);
        any = true;
    });
    if (!any) throw ParseError("no training-split coordinates to normalize over");
    if (mode == NormMode::Global) {
        lo.fill(lo[0]);
        hi.fill(hi[0]);
    }
    for (int a = 0; a < 3; ++a)
        if (!(hi[a] > lo[a])) throw ParseError("constant dataset: max equals min");
    s.min = lo;
    s.max = hi;
    return s;
}

NormStats normalize(Dataset& ds, const std::optional<NormStats>& stats, NormMode mode) {
    NormStats s = stats ? *stats : compute_norm_stats(ds, mode);
    for (auto& seq : ds.sequences) {
        for (int t = 0; t < seq.num_frames(); ++t) {
            if (!seq.frame_is_valid(t)) continue;  // padding stays zero
            JointFrame& f = seq.frames[t];
            for (Eigen::Index j = 0; j < f.rows(); ++j)
                for (int a = 0; a < 3; ++a) {
                    int ax = (s.mode == NormMode::Global) ? 0 : a;
                    f(j, a) = 2.0 * (f(j, a) - s.min[ax]) / (s.max[ax] - s.min[ax]) - 1.0;
                }
        }
    }
    return s;
}

Eigen::MatrixXd flatten(const ActionSequence& seq) {
    const int t = seq.num_frames();
    const int j = seq.num_joints();
    Eigen::MatrixXd m(t, j * 3);
    for (int i = 0; i < t; ++i)
        for (int k = 0; k < j; ++k)
            for (int a = 0; a < 3; ++a) m(i, k * 3 + a) = seq.frames[i](k, a);
    return m;
}

std::vector<JointFrame> unflatten(const Eigen::MatrixXd& m, int num_joints) {
    std::vector<JointFrame> frames;
    frames.reserve(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        JointFrame f(num_joints, 3);
        for (int k = 0; k < num_joints; ++k)
            for (int a = 0; a < 3; ++a) f(k, a) = m(i, k * 3 + a);
        frames.push_back(std::move(f));
    }
    return frames;
}

}  // namespace skelrec
