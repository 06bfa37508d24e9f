#pragma once

#include "anycam/geometry.hpp"
#include "anycam/losses.hpp"

namespace anycam {

// Fused evaluation of the per-pair uncertainty flow loss
//   mean over valid pixels of ln(sqrt(2) sigma_p) + sqrt(2) l_p / sigma_p,
//   l_p = || project(pose * unproject(p, d_p)) - p - F_ref(p) ||_1
// with analytic gradients in the pose parameters [axis_angle; translation]
// and in the raw sigma-grid values. Pixels whose transformed point has
// z <= 0 are excluded and shrink the averaging denominator.
struct PairFlowResult {
    double loss = 0.0;
    std::size_t valid_count = 0;
    Eigen::Matrix<double, 6, 1> d_pose = Eigen::Matrix<double, 6, 1>::Zero();
    std::vector<double> d_sigma_raw; // same layout as SigmaGrid::raw
};

PairFlowResult pair_flow_objective(const PoseSE3 &pose, const SigmaGrid &sigma,
                                   const DepthMap &depth, const FlowMap &reference,
                                   const Pinhole &cam, bool with_grad);

} // namespace anycam
