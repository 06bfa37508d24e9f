#include "anycam/eval.hpp"

#include "anycam/errors.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace anycam {

AlignmentMode alignment_mode_from_string(const std::string &name) {
    if (name == "none")
        return AlignmentMode::None;
    if (name == "rigid")
        return AlignmentMode::Rigid;
    if (name == "similarity")
        return AlignmentMode::Similarity;
    throw input_error("unknown alignment mode '" + name + "' (none|rigid|similarity)");
}

std::string to_string(AlignmentMode mode) {
    switch (mode) {
    case AlignmentMode::None: return "none";
    case AlignmentMode::Rigid: return "rigid";
    case AlignmentMode::Similarity: return "similarity";
    }
    return "unknown";
}

PoseSE3 Alignment::apply(const PoseSE3 &pose) const {
    PoseSE3 out;
    out.axis_angle = axis_angle_from_rotation(rotation * pose.rotation());
    out.translation = scale * (rotation * pose.translation) + translation;
    return out;
}

AlignedTrajectory align(const std::vector<PoseSE3> &est, const std::vector<PoseSE3> &gt,
                        AlignmentMode mode) {
    if (est.size() != gt.size())
        throw input_error("align: trajectory lengths differ");
    if (est.empty())
        throw input_error("align: empty trajectories");

    AlignedTrajectory out;
    if (mode == AlignmentMode::None) {
        out.poses = est;
        return out;
    }
    if (est.size() < 3)
        throw input_error("align: need at least 3 poses for least-squares alignment");

    const std::size_t n = est.size();
    Eigen::Vector3d mean_e = Eigen::Vector3d::Zero(), mean_g = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        mean_e += est[i].translation;
        mean_g += gt[i].translation;
    }
    mean_e /= static_cast<double>(n);
    mean_g /= static_cast<double>(n);

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    double var_e = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d de = est[i].translation - mean_e;
        const Eigen::Vector3d dg = gt[i].translation - mean_g;
        cov += dg * de.transpose();
        var_e += de.squaredNorm();
    }
    cov /= static_cast<double>(n);
    var_e /= static_cast<double>(n);
    if (var_e < 1e-18)
        throw input_error("align: degenerate (stationary) estimated trajectory");

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0)
        s(2, 2) = -1.0;
    const Eigen::Matrix3d r = svd.matrixU() * s * svd.matrixV().transpose();

    double scale = 1.0;
    if (mode == AlignmentMode::Similarity) {
        const double trace_ds = (svd.singularValues().asDiagonal() * s).trace();
        scale = trace_ds / var_e;
        if (!(scale > 0.0) || !std::isfinite(scale))
            throw input_error("align: degenerate similarity alignment");
    }

    out.alignment.scale = scale;
    out.alignment.rotation = r;
    out.alignment.translation = mean_g - scale * (r * mean_e);
    out.poses.reserve(n);
    for (const PoseSE3 &p : est)
        out.poses.push_back(out.alignment.apply(p));
    return out;
}

double ate(const std::vector<PoseSE3> &est_aligned, const std::vector<PoseSE3> &gt) {
    if (est_aligned.size() != gt.size())
        throw input_error("ate: trajectory lengths differ");
    if (est_aligned.empty())
        throw input_error("ate: empty trajectories");
    double acc = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i)
        acc += (est_aligned[i].translation - gt[i].translation).squaredNorm();
    return std::sqrt(acc / static_cast<double>(gt.size()));
}

RpeResult rpe(const std::vector<PoseSE3> &est, const std::vector<PoseSE3> &gt, std::size_t delta) {
    if (est.size() != gt.size())
        throw input_error("rpe: trajectory lengths differ");
    if (delta == 0 || est.size() <= delta)
        throw input_error("rpe: trajectory shorter than the frame gap");

    double acc_t = 0.0, acc_r = 0.0;
    const std::size_t n = est.size() - delta;
    for (std::size_t i = 0; i < n; ++i) {
        const PoseSE3 rel_gt = compose(invert(gt[i]), gt[i + delta]);
        const PoseSE3 rel_est = compose(invert(est[i]), est[i + delta]);
        const PoseSE3 err = compose(invert(rel_gt), rel_est);
        acc_t += err.translation.squaredNorm();
        const double ang = err.axis_angle.norm();
        acc_r += ang * ang;
    }
    RpeResult out;
    out.rpe_trans = std::sqrt(acc_t / static_cast<double>(n));
    out.rpe_rot_deg = std::sqrt(acc_r / static_cast<double>(n)) * 180.0 / M_PI;
    return out;
}

FocalErrors focal_errors(double est_focal, double gt_focal) {
    if (!(gt_focal > 0.0))
        throw input_error("focal_errors: ground-truth focal must be positive");
    if (!(est_focal > 0.0))
        throw input_error("focal_errors: estimated focal must be positive");
    FocalErrors out;
    out.afe = std::abs(est_focal - gt_focal);
    out.rfe = out.afe / gt_focal;
    return out;
}

} // namespace anycam
