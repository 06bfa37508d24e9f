#include "anycam/solver.hpp"

#include "anycam/adam.hpp"
#include "anycam/errors.hpp"
#include "anycam/flow_objective.hpp"
#include "anycam/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace anycam {

void FitConfig::validate() const {
    if (!(step_size > 0.0) || max_iterations < 1 || sigma_stride < 1 ||
        !(convergence_tol > 0.0) || !(temperature > 0.0))
        throw input_error("fit config values must be positive");
}

namespace {

struct CandidateFit {
    CandidateEstimate estimate;
    std::vector<double> history;
};

// Parameter layout: [fwd poses | bwd poses | fwd sigma grids | bwd sigma grids].
struct ParamLayout {
    std::size_t pairs = 0;
    std::size_t grid = 0;

    std::size_t fwd_pose(std::size_t i) const { return i * 6; }
    std::size_t bwd_pose(std::size_t i) const { return (pairs + i) * 6; }
    std::size_t fwd_sigma(std::size_t i) const { return pairs * 12 + i * grid; }
    std::size_t bwd_sigma(std::size_t i) const { return pairs * 12 + (pairs + i) * grid; }
    std::size_t total() const { return pairs * 12 + 2 * pairs * grid; }
};

PoseSE3 pose_from(const std::vector<double> &p, std::size_t off) {
    PoseSE3 pose;
    pose.axis_angle = {p[off], p[off + 1], p[off + 2]};
    pose.translation = {p[off + 3], p[off + 4], p[off + 5]};
    return pose;
}

CandidateFit fit_candidate(const std::vector<FrameObservations> &obs, double focal,
                           const FitConfig &config, const LossWeights &weights) {
    const std::size_t pairs = obs.size() - 1;
    const int h = obs.front().depth.height;
    const int w = obs.front().depth.width;
    const Pinhole cam{focal, w, h};

    SigmaGrid proto = SigmaGrid::make(h, w, config.sigma_stride, 1.0);
    ParamLayout lay{pairs, proto.raw.size()};

    std::vector<double> params(lay.total(), 0.0); // identity poses, sigma = 1
    std::vector<double> grad(lay.total(), 0.0);

    SigmaGrid scratch = proto;
    auto eval = [&](const std::vector<double> &p, std::vector<double> *g) {
        if (g)
            std::fill(g->begin(), g->end(), 0.0);
        double flow_fwd_sum = 0.0, flow_bwd_sum = 0.0, cons_sum = 0.0;
        for (std::size_t i = 0; i < pairs; ++i) {
            const PoseSE3 fwd = pose_from(p, lay.fwd_pose(i));
            const PoseSE3 bwd = pose_from(p, lay.bwd_pose(i));

            std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(lay.fwd_sigma(i)), lay.grid,
                        scratch.raw.begin());
            const PairFlowResult rf = pair_flow_objective(fwd, scratch, obs[i].depth,
                                                          obs[i].flow_fwd, cam, g != nullptr);
            flow_fwd_sum += rf.loss;

            std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(lay.bwd_sigma(i)), lay.grid,
                        scratch.raw.begin());
            const PairFlowResult rb = pair_flow_objective(bwd, scratch, obs[i + 1].depth,
                                                          obs[i].flow_bwd, cam, g != nullptr);
            flow_bwd_sum += rb.loss;

            Eigen::Matrix<double, 6, 1> d_fwd, d_bwd;
            double cons;
            if (g) {
                cons = consistency_term_grad(fwd, bwd, d_fwd, d_bwd);
                for (int k = 0; k < 6; ++k) {
                    (*g)[lay.fwd_pose(i) + k] +=
                        weights.lambda_flow * rf.d_pose[k] + weights.lambda_consistency * d_fwd[k];
                    (*g)[lay.bwd_pose(i) + k] +=
                        weights.lambda_flow * rb.d_pose[k] + weights.lambda_consistency * d_bwd[k];
                }
                for (std::size_t k = 0; k < lay.grid; ++k) {
                    (*g)[lay.fwd_sigma(i) + k] += weights.lambda_flow * rf.d_sigma_raw[k];
                    (*g)[lay.bwd_sigma(i) + k] += weights.lambda_flow * rb.d_sigma_raw[k];
                }
            } else {
                cons = fwd_bwd_consistency_loss({fwd}, {bwd});
            }
            cons_sum += cons;
        }
        return weights.lambda_flow * (flow_fwd_sum + flow_bwd_sum) +
               weights.lambda_consistency * cons_sum;
    };

    AdamOptimizer adam(params.size(), config.step_size);
    CandidateFit out;
    out.history.reserve(static_cast<std::size_t>(config.max_iterations));

    const int n_iter = config.max_iterations;
    for (int it = 0; it < n_iter; ++it) {
        // Step schedule: full, then 0.3x, then 0.1x of the configured step.
        if (it == (n_iter * 6) / 10)
            adam.set_step(0.3 * config.step_size);
        else if (it == (n_iter * 85) / 100)
            adam.set_step(0.1 * config.step_size);

        const double loss = eval(params, &grad);
        if (!std::isfinite(loss))
            throw numerical_error("fit_sequence: non-finite loss at iteration " + std::to_string(it) +
                                  " (focal " + std::to_string(focal) + ")");
        out.history.push_back(loss);
        adam.update(params, grad);

        if (it > 50 && it % 10 == 0) {
            const double prev = out.history[static_cast<std::size_t>(it - 20)];
            if (std::abs(prev - loss) < config.convergence_tol * std::max(1.0, std::abs(loss)))
                break;
        }
    }

    // Final report at the optimized parameters.
    CandidateEstimate &est = out.estimate;
    est.focal = focal;
    est.poses.resize(pairs);
    est.bwd_poses.resize(pairs);
    est.sigmas.resize(pairs);
    double flow_loss = 0.0;
    for (std::size_t i = 0; i < pairs; ++i) {
        est.poses[i] = pose_from(params, lay.fwd_pose(i));
        est.bwd_poses[i] = pose_from(params, lay.bwd_pose(i));
        std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(lay.fwd_sigma(i)), lay.grid,
                    scratch.raw.begin());
        est.sigmas[i] = scratch.upsample();
        flow_loss += pair_flow_objective(est.poses[i], scratch, obs[i].depth, obs[i].flow_fwd,
                                         cam, false)
                         .loss;
    }
    est.flow_loss = flow_loss; // forward-sequence sum, the candidate ranking score
    est.consistency_loss = fwd_bwd_consistency_loss(est.poses, est.bwd_poses);
    if (!std::isfinite(est.flow_loss))
        throw numerical_error("fit_sequence: non-finite flow loss after fitting");
    return out;
}

} // namespace

FitResult fit_sequence(const std::vector<FrameObservations> &obs, const FocalSchedule &schedule,
                       const FitConfig &config, const LossWeights &weights) {
    if (obs.size() < 2)
        throw input_error("fit_sequence: sequence must contain at least 2 frames");
    validate_observations(obs);
    config.validate();
    weights.validate();
    if (schedule.candidates.empty())
        throw input_error("fit_sequence: empty focal schedule");

    FitResult result;
    result.bank.resize(schedule.candidates.size());
    result.loss_history.resize(schedule.candidates.size());

    std::vector<CandidateFit> fits(schedule.candidates.size());
    parallel_for_each(schedule.candidates.size(), [&](std::size_t k) {
        fits[k] = fit_candidate(obs, schedule.candidates[k], config, weights);
    });

    std::vector<double> flow_losses(schedule.candidates.size());
    for (std::size_t k = 0; k < fits.size(); ++k) {
        result.bank[k] = std::move(fits[k].estimate);
        result.loss_history[k] = std::move(fits[k].history);
        flow_losses[k] = result.bank[k].flow_loss;
    }

    result.likelihood = losses_to_target_distribution(flow_losses, config.temperature);
    result.best_index = 0;
    for (std::size_t k = 1; k < flow_losses.size(); ++k)
        if (flow_losses[k] < flow_losses[result.best_index])
            result.best_index = k;
    return result;
}

GradientCheckReport gradient_check(const std::vector<double> &params, const LossEvaluator &eval,
                                   double fd_step) {
    std::vector<double> analytic(params.size(), 0.0);
    const double base = eval(params, &analytic);
    if (!std::isfinite(base))
        throw numerical_error("gradient_check: loss not finite at the test point");

    double max_abs = 0.0;
    for (double a : analytic)
        max_abs = std::max(max_abs, std::abs(a));
    const double floor = 1e-4 * max_abs + 1e-9;

    GradientCheckReport report;
    std::vector<double> x = params;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + fd_step;
        const double hi = eval(x, nullptr);
        x[i] = saved - fd_step;
        const double lo = eval(x, nullptr);
        x[i] = saved;
        const double fd = (hi - lo) / (2.0 * fd_step);
        const double dev = std::abs(analytic[i] - fd) / std::max({std::abs(analytic[i]), std::abs(fd), floor});
        if (dev > report.max_rel_deviation) {
            report.max_rel_deviation = dev;
            report.worst_index = i;
            report.analytic_at_worst = analytic[i];
            report.fd_at_worst = fd;
        }
    }
    return report;
}

} // namespace anycam
