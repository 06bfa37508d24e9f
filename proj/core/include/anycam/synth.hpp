#pragma once

#include "anycam/geometry.hpp"
#include "anycam/observations.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace anycam {

enum class CameraPath { Straight, Arc, RotationDominant, HandheldJitter };

CameraPath camera_path_from_string(const std::string &name);
std::string to_string(CameraPath path);

// A fronto-parallel background plane plus thin axis-aligned boxes between the
// camera and the plane; a subset of boxes translates with a constant velocity
// per frame. World frame = camera frame of the first frame.
struct SceneSpec {
    CameraPath camera_path = CameraPath::Arc;
    int frames = 8;
    int width = 48;
    int height = 48;
    double focal = 72.0;              // pixels
    double plane_depth = 4.0;         // scene units, median depth lands in 2..5
    int num_boxes = 3;
    int num_movers = 0;
    double mover_coverage = 0.2;      // target pixel fraction per mover at frame 0, in [0, 0.6]
    double mover_speed = 0.05;        // scene units per frame
    double rotation_per_frame = 0.2 * M_PI / 180.0; // radians, path-dependent use
    double translation_per_frame = 0.03;            // scene units
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticSequence {
    std::vector<PoseSE3> gt_absolute_poses;  // camera-to-world, first = identity
    std::vector<PoseSE3> gt_relative_poses;  // consecutive differences inv(T_i) T_{i+1}
    std::vector<DepthMap> depths;            // per frame
    std::vector<FlowMap> flow_fwd;           // pair i: frame i -> i+1
    std::vector<FlowMap> flow_bwd;           // pair i: frame i+1 -> i
    std::vector<PixelMask> motion_masks;     // nonzero where a mover is visible
    std::vector<std::vector<std::int16_t>> surface_ids; // 0 = plane, 1+k = box k
    double focal = 0.0;
    int width = 0;
    int height = 0;

    int frames() const { return static_cast<int>(gt_absolute_poses.size()); }
    Pinhole camera() const { return {focal, width, height}; }
    // Source-to-target point map of pair i, the pose that induces flow_fwd[i].
    PoseSE3 gt_pair_pose(std::size_t i) const { return invert(gt_relative_poses[i]); }
    bool is_mover(std::int16_t surface_id) const;
    std::vector<std::int16_t> mover_box_ids;
};

// Analytic rendering: per-pixel ray/plane and ray/box intersection, exact
// flow from projecting each surface point through both frames' cameras (and
// the box's own motion for movers). Deterministic per seed.
SyntheticSequence generate_scene(const SceneSpec &spec);

// Additive Gaussian flow noise and multiplicative log-normal depth noise on
// the observation rasters; ground-truth poses/masks stay untouched.
SyntheticSequence perturb(const SyntheticSequence &seq, double flow_sigma,
                          double depth_rel_sigma, std::uint64_t seed);

// Packs frames [start, start + count) as solver input; count = -1 takes the
// rest of the sequence.
std::vector<FrameObservations> to_observations(const SyntheticSequence &seq, int start = 0,
                                               int count = -1);

} // namespace anycam
