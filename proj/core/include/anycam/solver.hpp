#pragma once

#include "anycam/geometry.hpp"
#include "anycam/hypotheses.hpp"
#include "anycam/losses.hpp"
#include "anycam/observations.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace anycam {

// One focal hypothesis after fitting: per-pair forward poses (i -> i+1 point
// maps), matching uncertainty rasters, and the sequence flow loss used for
// candidate ranking.
struct CandidateEstimate {
    double focal = 0.0;
    std::vector<PoseSE3> poses;     // n-1 forward pair poses
    std::vector<PoseSE3> bwd_poses; // n-1 backward pair poses (i+1 -> i)
    std::vector<UncertaintyMap> sigmas;
    double flow_loss = 0.0;
    double consistency_loss = 0.0;
};

struct FitConfig {
    double step_size = 1e-3;
    int max_iterations = 400;
    int sigma_stride = 8;           // uncertainty grid resolution in pixels
    double convergence_tol = 1e-7;
    double temperature = kDefaultSoftmaxTemperature;
    std::uint64_t seed = 0;

    void validate() const;
};

struct FitResult {
    std::vector<CandidateEstimate> bank;
    LikelihoodVector likelihood;
    std::size_t best_index = 0;
    std::vector<std::vector<double>> loss_history; // per candidate, per iteration
};

// Network-free estimation: for every candidate focal length, directly
// optimizes per-pair forward/backward poses (identity init) and coarse
// uncertainty grids (sigma init 1.0) against
//   lambda_flow * (flow NLL fwd + bwd) + lambda_consistency * consistency,
// then ranks candidates by the forward-sequence flow loss. Candidates are
// independent and run in parallel; results are deterministic.
FitResult fit_sequence(const std::vector<FrameObservations> &obs, const FocalSchedule &schedule,
                       const FitConfig &config, const LossWeights &weights = {});

// Loss evaluator contract: returns the loss at `params`; when `grad` is
// non-null it must also fill the analytic gradient.
using LossEvaluator = std::function<double(const std::vector<double> &, std::vector<double> *)>;

struct GradientCheckReport {
    double max_rel_deviation = 0.0;
    std::size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double fd_at_worst = 0.0;
};

// Central finite differences against the evaluator's analytic gradient.
// Deviation is |analytic - fd| relative to max(|analytic|, |fd|) floored at
// a small fraction of the gradient's overall magnitude.
GradientCheckReport gradient_check(const std::vector<double> &params, const LossEvaluator &eval,
                                   double fd_step = 1e-5);

} // namespace anycam
