#pragma once

#include "anycam/eval.hpp"
#include "anycam/geometry.hpp"
#include "anycam/losses.hpp"
#include "anycam/synth.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace anycam {

// Binary raster container:
//   "ACRS" | u16 version=1 | u16 dtype (0 = f32) | u16 channels |
//   u32 height | u32 width | channel-planar row-major f32 payload,
// all little-endian. Writes go to a temp file renamed into place.
struct RasterData {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> values; // channel-planar, row-major per plane

    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
};

void write_raster(const std::string &path, const RasterData &raster);
RasterData read_raster(const std::string &path);

RasterData raster_from_depth(const DepthMap &depth);
RasterData raster_from_flow(const FlowMap &flow);
RasterData raster_from_sigma(const UncertaintyMap &sigma);
RasterData raster_from_mask(const PixelMask &mask);
DepthMap depth_from_raster(const RasterData &raster);
FlowMap flow_from_raster(const RasterData &raster);
UncertaintyMap sigma_from_raster(const RasterData &raster);

// Plain-text trajectory: '#' comment header (carries focal and schedule
// metadata), then one line per frame: "index tx ty tz qx qy qz qw" with
// unit quaternions. Poses are camera-to-world.
struct TrajectoryData {
    std::vector<PoseSE3> poses;
    double focal = -1.0; // negative = absent
    std::size_t schedule_m = 0;
    double schedule_f_min = 0.0;
    double schedule_f_max = 0.0;
};

void write_trajectory(const std::string &path, const TrajectoryData &traj);
TrajectoryData read_trajectory(const std::string &path);

// Axis-angle <-> unit quaternion (x, y, z, w), canonical angle in [0, pi].
Eigen::Vector4d quaternion_from_axis_angle(const Eigen::Vector3d &axis_angle);
Eigen::Vector3d axis_angle_from_quaternion(const Eigen::Vector4d &quat);

// Flat key=value run configuration. Unknown keys are rejected; values are
// validated against the owning module's invariants when used.
struct RunConfig {
    std::uint64_t seed = 0;

    std::size_t schedule_m = 32;
    double schedule_f_min_scale = 0.1; // x image height
    double schedule_f_max_scale = 3.5;

    double lambda_flow = 1.0;
    double lambda_consistency = 1.0;
    double lambda_intr = 1.0;
    double softmax_temperature = 100.0;

    double fit_step_size = 1e-3;
    int fit_max_iterations = 400;
    int fit_sigma_stride = 8;
    double fit_convergence_tol = 1e-7;

    int refine_grid = 16;
    int refine_track_length = 8;
    int refine_stride = 3;
    int refine_window = 8;
    int refine_overlap = 6;
    int refine_steps_per_window = 400;
    int refine_global_steps = 5000;
    double refine_step_size = 1e-4;
    double refine_sigma_max = 0.05;
    double refine_lambda_smooth = 0.1;

    std::string eval_alignment = "similarity";
    int eval_rpe_delta = 1;

    std::string synth_path = "arc";
    int synth_frames = 8;
    int synth_width = 48;
    int synth_height = 48;
    double synth_focal_scale = 1.5; // x image height
    double synth_plane_depth = 4.0;
    int synth_boxes = 3;
    int synth_movers = 0;
    double synth_mover_coverage = 0.2;
    double synth_mover_speed = 0.05;
    double synth_rotation_deg_per_frame = 0.75;
    double synth_translation_per_frame = 0.03;
    double synth_flow_noise = 0.0;
    double synth_depth_noise = 0.0;

    int model_feature_dim = 64;
    int model_attention_layers = 2;
    int model_attention_heads = 4;
    int model_patch_stride = 8;
    int model_m = 8;
    double model_p_drop = 0.1;
    double model_weight_decay_pose_tokens = 0.01;
    int model_max_pairs = 16;

    int train_corpus_sequences = 200;
    int train_stage1_steps = 1500;
    int train_stage2_steps = 800;
    int train_stage1_len = 2;
    int train_stage2_len = 8;
    int train_batch = 4;
    double train_step_size = 1e-4;
    double train_step_size_after_drop = 1e-5;
    int train_step_drop = 1800;
};

RunConfig parse_run_config(const std::string &path);
void apply_config_line(RunConfig &config, const std::string &line, int line_number);

// Rasters of a sequence directory: depth_%06d.acrs per frame,
// flow_%06d.acrs / flow_%06d_bwd.acrs per pair, optional sigma_%06d.acrs.
std::string frame_filename(const std::string &prefix, int index, const std::string &suffix = "");

} // namespace anycam
