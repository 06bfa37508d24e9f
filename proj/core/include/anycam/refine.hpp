#pragma once

#include "anycam/geometry.hpp"
#include "anycam/losses.hpp"

#include <cstdint>
#include <vector>

namespace anycam {

// A pixel followed across consecutive frames by chaining flow, anchored by a
// single inverse-depth variable in its first frame. sigmas accumulate the
// per-step uncertainty samples, so sigmas[0] = 0 and the sequence is
// non-decreasing.
struct Track {
    int anchor_frame = 0;                 // original frame index, always a stride sample
    std::vector<Eigen::Vector2d> pixels;  // positions in consecutive frames
    std::vector<double> sigmas;
    double inv_depth = 0.0;

    std::size_t length() const { return pixels.size(); }
};

struct TrackSet {
    std::vector<Track> tracks;
};

struct RefineConfig {
    int grid = 16;             // grid x grid anchors per sampled frame
    int track_length = 8;      // consecutive frames per track
    int stride = 3;            // anchor / pose sampling stride in original frames
    int window = 8;            // window width in sampled frames
    int overlap = 6;           // window overlap in sampled frames
    int steps_per_window = 400;
    int global_steps = 5000;
    double step_size = 1e-4;
    double sigma_max = 0.05;   // tracks at or above this accumulated value are ignored
    double lambda_smooth = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct RefinedTrajectory {
    std::vector<PoseSE3> poses; // camera-to-world, one per original frame
    double focal = 0.0;
    std::vector<double> inv_depths; // per track, refined anchors
};

// Flow-chained track construction with uncertainty accumulation. Bilinear
// sampling throughout; tracks leaving the image are truncated at the last
// in-bounds position and kept when at least 2 positions remain.
TrackSet build_tracks(const std::vector<FlowMap> &flows_fwd,
                      const std::vector<UncertaintyMap> &sigmas,
                      const std::vector<DepthMap> &depths, const RefineConfig &config);

// Mean over tracks of
//   sum_{i>=2} || project(P^{a->a+i-1} unproject(p_1, 1/inv_depth)) - p_i ||_1
//     * max(sigma_max - sigma_i, 0)
// over camera-to-world `poses`; points with sigma_i >= sigma_max contribute
// exactly zero cost and zero gradient.
double reprojection_cost(const TrackSet &tracks, const std::vector<PoseSE3> &poses, double focal,
                         int width, int height, double sigma_max);

// Mean over consecutive-difference pairs of || D_i^-1 D_{i+1} - I ||_{1,1}
// where D_i = inv(poses[i]) * poses[i+1]. Needs >= 3 poses.
double smoothness_cost(const std::vector<PoseSE3> &poses);

// Uncertainty-weighted sliding-window bundle adjustment over stride-sampled
// poses, track inverse depths and (in the global pass) the focal length,
// followed by Lie-algebra interpolation of the skipped frames.
RefinedTrajectory refine_trajectory(const std::vector<PoseSE3> &initial_poses, double focal,
                                    const std::vector<FlowMap> &flows_fwd,
                                    const std::vector<UncertaintyMap> &sigmas,
                                    const std::vector<DepthMap> &depths,
                                    const RefineConfig &config);

// Fills non-sampled frames by composing refined sampled poses with the
// initial relative motion and distributing the endpoint discrepancy linearly
// in the Lie algebra. Segments whose refined endpoints equal the initial
// poses bit-for-bit are copied from the initial trajectory verbatim.
std::vector<PoseSE3> interpolate_refined_poses(const std::vector<PoseSE3> &initial_poses,
                                               const std::vector<int> &sampled_indices,
                                               const std::vector<PoseSE3> &refined_sampled);

} // namespace anycam
