#pragma once

#include "anycam/geometry.hpp"

#include <string>
#include <vector>

namespace anycam {

enum class AlignmentMode { None, Rigid, Similarity };

AlignmentMode alignment_mode_from_string(const std::string &name);
std::string to_string(AlignmentMode mode);

// Closed-form least-squares registration est -> gt of the position
// sequences (Umeyama); scale is 1 for rigid mode.
struct Alignment {
    double scale = 1.0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    PoseSE3 apply(const PoseSE3 &pose) const;
};

struct AlignedTrajectory {
    std::vector<PoseSE3> poses;
    Alignment alignment;
};

// Trajectories are camera-to-world pose sequences; positions are the
// translation components.
AlignedTrajectory align(const std::vector<PoseSE3> &est, const std::vector<PoseSE3> &gt,
                        AlignmentMode mode);

// RMSE of positional differences of equal-length trajectories.
double ate(const std::vector<PoseSE3> &est_aligned, const std::vector<PoseSE3> &gt);

// Relative pose error over frame gap delta:
//   E_i = (gt_i^-1 gt_{i+delta})^-1 (est_i^-1 est_{i+delta}),
// rpe_trans = RMSE of |trans(E_i)|, rpe_rot = RMSE of the geodesic rotation
// angle of E_i in degrees.
struct RpeResult {
    double rpe_trans = 0.0;
    double rpe_rot_deg = 0.0;
};
RpeResult rpe(const std::vector<PoseSE3> &est, const std::vector<PoseSE3> &gt, std::size_t delta = 1);

// afe = |est - gt| pixels, rfe = afe / gt.
struct FocalErrors {
    double afe = 0.0;
    double rfe = 0.0;
};
FocalErrors focal_errors(double est_focal, double gt_focal);

struct MetricsReport {
    double ate = 0.0;
    double rpe_trans = 0.0;
    double rpe_rot_deg = 0.0;
    double afe = -1.0; // negative = not evaluated
    double rfe = -1.0;
    AlignmentMode alignment = AlignmentMode::Similarity;
};

} // namespace anycam
