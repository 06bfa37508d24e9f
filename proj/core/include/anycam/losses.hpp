#pragma once

#include "anycam/geometry.hpp"
#include "anycam/hypotheses.hpp"

#include <vector>

namespace anycam {

// Raw uncertainty parameters are mapped through exp() and clamped to
// [kSigmaFloor, kSigmaCeil]; the Laplacian likelihood diverges as sigma -> 0.
inline constexpr double kSigmaFloor = 1e-3;
inline constexpr double kSigmaCeil = 10.0;

double sigma_from_raw(double raw);
double sigma_from_raw_derivative(double raw); // d sigma / d raw (0 when clamped)

// Per-pixel aleatoric scale, full raster resolution.
struct UncertaintyMap {
    int height = 0;
    int width = 0;
    std::vector<double> sigma; // row-major, in [kSigmaFloor, kSigmaCeil]

    static UncertaintyMap constant(int h, int w, double value);
    double at(int i, int j) const { return sigma[static_cast<std::size_t>(i) * width + j]; }
    double &at(int i, int j) { return sigma[static_cast<std::size_t>(i) * width + j]; }
    void validate() const;
};

// Coarse grid of raw uncertainty parameters, bilinearly upsampled to raster
// resolution. Keeping sigma spatially smooth stops it from absorbing the
// pose residual pixel by pixel.
struct SigmaGrid {
    int raster_height = 0;
    int raster_width = 0;
    int stride = 8;
    int gh = 0;
    int gw = 0;
    std::vector<double> raw; // gh x gw, row-major

    static SigmaGrid make(int raster_h, int raster_w, int stride, double initial_sigma = 1.0);

    struct Corners {
        int idx[4];
        double w[4];
    };
    // Bilinear footprint at continuous pixel (x, y); grid node (gi, gj) sits
    // at ((gj + 0.5) * stride, (gi + 0.5) * stride), edge-clamped.
    Corners corners(double x, double y) const;
    double sigma_at(double x, double y) const;
    UncertaintyMap upsample() const;
};

struct LossWeights {
    double lambda_flow = 1.0;
    double lambda_consistency = 1.0;
    double lambda_intr = 1.0;

    void validate() const;
};

struct LossReport {
    std::vector<double> flow_losses;        // per candidate
    std::vector<double> consistency_losses; // per candidate
    double intrinsics_kl = 0.0;
    double total = 0.0;
};

// Per-pixel L1 norm of the flow difference; masked pixels are set to 0 and
// excluded from downstream averages.
std::vector<double> flow_residual(const FlowMap &induced, const FlowMap &reference,
                                  const PixelMask &mask);

// Mean over unmasked pixels of ln(sqrt(2) sigma) + sqrt(2) l / sigma, the
// negative log of a Laplacian density with scale sigma/sqrt(2).
double uncertainty_flow_nll(const std::vector<double> &residual, const UncertaintyMap &sigma,
                            const PixelMask &mask);

// As above, also accumulating d/d residual and d/d sigma (same shapes).
double uncertainty_flow_nll_grad(const std::vector<double> &residual, const UncertaintyMap &sigma,
                                 const PixelMask &mask, std::vector<double> &d_residual,
                                 std::vector<double> &d_sigma);

// Sum of per-pair losses over the neighboring-frame pairs of a sequence.
double sequence_flow_nll(const std::vector<double> &per_pair_losses);

// sum_i || M(fwd_i)^-1 M(bwd_i) - I ||_{1,1}; bwd_i is the i+1 -> i
// prediction from the reversed sequence.
double fwd_bwd_consistency_loss(const std::vector<PoseSE3> &fwd, const std::vector<PoseSE3> &bwd);

// One pair's consistency term with gradients in the [axis_angle; translation]
// layout of each pose.
double consistency_term_grad(const PoseSE3 &fwd, const PoseSE3 &bwd,
                             Eigen::Matrix<double, 6, 1> &d_fwd, Eigen::Matrix<double, 6, 1> &d_bwd);

// D_KL(target || predicted) = sum_k target_k ln(target_k / predicted_k).
// The target is treated as a constant; gradients belong to `predicted` only.
double intrinsics_kl_loss(const LikelihoodVector &predicted, const LikelihoodVector &target);

// KL gradient with respect to the logits that produced `predicted` through a
// softmax: d/d logits = predicted - target.
std::vector<double> intrinsics_kl_logit_grad(const std::vector<double> &predicted,
                                             const std::vector<double> &target);

// sum_k (lambda_flow flow_k + lambda_consistency cons_k) + lambda_intr kl.
double total_loss(const LossReport &parts, const LossWeights &weights);

} // namespace anycam
