#include "anycam/losses.hpp"

#include "anycam/errors.hpp"

#include <algorithm>
#include <cmath>

namespace anycam {

namespace {
const double kSqrt2 = std::sqrt(2.0);
const double kLogSqrt2 = 0.5 * std::log(2.0);
} // namespace

double sigma_from_raw(double raw) { return std::clamp(std::exp(raw), kSigmaFloor, kSigmaCeil); }

double sigma_from_raw_derivative(double raw) {
    const double e = std::exp(raw);
    if (e <= kSigmaFloor || e >= kSigmaCeil)
        return 0.0;
    return e;
}

UncertaintyMap UncertaintyMap::constant(int h, int w, double value) {
    UncertaintyMap m;
    m.height = h;
    m.width = w;
    m.sigma.assign(static_cast<std::size_t>(h) * w, value);
    return m;
}

void UncertaintyMap::validate() const {
    if (height < 1 || width < 1 || sigma.size() != static_cast<std::size_t>(height) * width)
        throw input_error("uncertainty map dimensions inconsistent with payload");
    for (double s : sigma)
        if (!std::isfinite(s) || s < kSigmaFloor || s > kSigmaCeil)
            throw input_error("uncertainty values must lie in [sigma_floor, sigma_ceil]");
}

SigmaGrid SigmaGrid::make(int raster_h, int raster_w, int stride, double initial_sigma) {
    if (raster_h < 1 || raster_w < 1 || stride < 1)
        throw input_error("sigma grid requires positive dimensions and stride");
    SigmaGrid g;
    g.raster_height = raster_h;
    g.raster_width = raster_w;
    g.stride = stride;
    g.gh = (raster_h + stride - 1) / stride;
    g.gw = (raster_w + stride - 1) / stride;
    g.raw.assign(static_cast<std::size_t>(g.gh) * g.gw, std::log(initial_sigma));
    return g;
}

SigmaGrid::Corners SigmaGrid::corners(double x, double y) const {
    const double u = x / stride - 0.5;
    const double v = y / stride - 0.5;
    const double uc = std::clamp(u, 0.0, static_cast<double>(gw - 1));
    const double vc = std::clamp(v, 0.0, static_cast<double>(gh - 1));
    int j0 = std::min(static_cast<int>(uc), gw - 2 >= 0 ? gw - 2 : 0);
    int i0 = std::min(static_cast<int>(vc), gh - 2 >= 0 ? gh - 2 : 0);
    j0 = std::max(j0, 0);
    i0 = std::max(i0, 0);
    const int j1 = std::min(j0 + 1, gw - 1);
    const int i1 = std::min(i0 + 1, gh - 1);
    const double fu = std::clamp(uc - j0, 0.0, 1.0);
    const double fv = std::clamp(vc - i0, 0.0, 1.0);

    Corners c;
    c.idx[0] = i0 * gw + j0;
    c.idx[1] = i0 * gw + j1;
    c.idx[2] = i1 * gw + j0;
    c.idx[3] = i1 * gw + j1;
    c.w[0] = (1.0 - fu) * (1.0 - fv);
    c.w[1] = fu * (1.0 - fv);
    c.w[2] = (1.0 - fu) * fv;
    c.w[3] = fu * fv;
    return c;
}

double SigmaGrid::sigma_at(double x, double y) const {
    const Corners c = corners(x, y);
    double s = 0.0;
    for (int k = 0; k < 4; ++k)
        s += c.w[k] * sigma_from_raw(raw[c.idx[k]]);
    return s;
}

UncertaintyMap SigmaGrid::upsample() const {
    UncertaintyMap m;
    m.height = raster_height;
    m.width = raster_width;
    m.sigma.resize(static_cast<std::size_t>(raster_height) * raster_width);
    for (int i = 0; i < raster_height; ++i)
        for (int j = 0; j < raster_width; ++j)
            m.sigma[static_cast<std::size_t>(i) * raster_width + j] = sigma_at(j + 0.5, i + 0.5);
    return m;
}

void LossWeights::validate() const {
    if (lambda_flow < 0.0 || lambda_consistency < 0.0 || lambda_intr < 0.0)
        throw input_error("loss weights must be nonnegative");
}

std::vector<double> flow_residual(const FlowMap &induced, const FlowMap &reference,
                                  const PixelMask &mask) {
    if (induced.height != reference.height || induced.width != reference.width ||
        induced.height != mask.height || induced.width != mask.width)
        throw input_error("flow_residual: dimension mismatch");
    const std::size_t n = induced.du.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        if (!mask.values[k])
            continue;
        out[k] = std::abs(induced.du[k] - reference.du[k]) + std::abs(induced.dv[k] - reference.dv[k]);
    }
    return out;
}

double uncertainty_flow_nll(const std::vector<double> &residual, const UncertaintyMap &sigma,
                            const PixelMask &mask) {
    if (residual.size() != sigma.sigma.size() || residual.size() != mask.values.size())
        throw input_error("uncertainty_flow_nll: dimension mismatch");
    double acc = 0.0;
    std::size_t n_valid = 0;
    for (std::size_t k = 0; k < residual.size(); ++k) {
        if (!mask.values[k])
            continue;
        const double s = sigma.sigma[k];
        if (!(s > 0.0))
            throw input_error("uncertainty_flow_nll: sigma must be positive");
        acc += kLogSqrt2 + std::log(s) + kSqrt2 * residual[k] / s;
        ++n_valid;
    }
    if (n_valid == 0)
        return 0.0;
    return acc / static_cast<double>(n_valid);
}

double uncertainty_flow_nll_grad(const std::vector<double> &residual, const UncertaintyMap &sigma,
                                 const PixelMask &mask, std::vector<double> &d_residual,
                                 std::vector<double> &d_sigma) {
    if (residual.size() != sigma.sigma.size() || residual.size() != mask.values.size())
        throw input_error("uncertainty_flow_nll: dimension mismatch");
    d_residual.assign(residual.size(), 0.0);
    d_sigma.assign(residual.size(), 0.0);

    std::size_t n_valid = 0;
    for (std::size_t k = 0; k < residual.size(); ++k)
        n_valid += mask.values[k] != 0;
    if (n_valid == 0)
        return 0.0;
    const double inv_n = 1.0 / static_cast<double>(n_valid);

    double acc = 0.0;
    for (std::size_t k = 0; k < residual.size(); ++k) {
        if (!mask.values[k])
            continue;
        const double s = sigma.sigma[k];
        if (!(s > 0.0))
            throw input_error("uncertainty_flow_nll: sigma must be positive");
        acc += kLogSqrt2 + std::log(s) + kSqrt2 * residual[k] / s;
        d_residual[k] = kSqrt2 / s * inv_n;
        d_sigma[k] = (1.0 / s - kSqrt2 * residual[k] / (s * s)) * inv_n;
    }
    return acc * inv_n;
}

double sequence_flow_nll(const std::vector<double> &per_pair_losses) {
    double acc = 0.0;
    for (double l : per_pair_losses)
        acc += l;
    return acc;
}

double fwd_bwd_consistency_loss(const std::vector<PoseSE3> &fwd, const std::vector<PoseSE3> &bwd) {
    if (fwd.size() != bwd.size())
        throw input_error("fwd_bwd_consistency_loss: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < fwd.size(); ++i) {
        const Eigen::Matrix4d a = invert(fwd[i]).matrix() * bwd[i].matrix();
        acc += (a - Eigen::Matrix4d::Identity()).cwiseAbs().sum();
    }
    return acc;
}

double consistency_term_grad(const PoseSE3 &fwd, const PoseSE3 &bwd,
                             Eigen::Matrix<double, 6, 1> &d_fwd, Eigen::Matrix<double, 6, 1> &d_bwd) {
    const Eigen::Matrix3d ra = fwd.rotation();
    const Eigen::Matrix3d rb = bwd.rotation();
    const Eigen::Vector3d dt = bwd.translation - fwd.translation;

    // A = M(fwd)^-1 M(bwd): rotation Ra^T Rb, translation Ra^T (tb - ta).
    const Eigen::Matrix3d a_rot = ra.transpose() * rb;
    const Eigen::Vector3d a_t = ra.transpose() * dt;

    double loss = 0.0;
    Eigen::Matrix3d g_rot;
    Eigen::Vector3d g_t;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            const double d = a_rot(r, c) - (r == c ? 1.0 : 0.0);
            loss += std::abs(d);
            g_rot(r, c) = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        }
        loss += std::abs(a_t(r));
        g_t(r) = a_t(r) > 0.0 ? 1.0 : (a_t(r) < 0.0 ? -1.0 : 0.0);
    }

    // d loss / d Rb = Ra G_rot ; d loss / d tb = Ra g_t ; d/d ta = -Ra g_t.
    // d loss / d Ra = Rb G_rot^T + dt g_t^T   (from <G_rot, Ra^T Rb> + <g_t, Ra^T dt>).
    const Eigen::Matrix3d d_ra = rb * g_rot.transpose() + dt * g_t.transpose();
    const Eigen::Matrix3d d_rb = ra * g_rot;
    const Eigen::Vector3d d_tb = ra * g_t;

    const auto ja = rotation_jacobian(fwd.axis_angle);
    const auto jb = rotation_jacobian(bwd.axis_angle);
    for (int k = 0; k < 3; ++k) {
        d_fwd[k] = (d_ra.array() * ja[k].array()).sum();
        d_bwd[k] = (d_rb.array() * jb[k].array()).sum();
    }
    d_fwd.tail<3>() = -d_tb;
    d_bwd.tail<3>() = d_tb;
    return loss;
}

double intrinsics_kl_loss(const LikelihoodVector &predicted, const LikelihoodVector &target) {
    predicted.validate();
    target.validate();
    if (predicted.probabilities.size() != target.probabilities.size())
        throw input_error("intrinsics_kl_loss: length mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < target.probabilities.size(); ++k) {
        const double t = target.probabilities[k];
        if (t == 0.0)
            continue;
        const double p = predicted.probabilities[k];
        if (!(p > 0.0))
            throw input_error("intrinsics_kl_loss: predicted mass is zero where target is positive");
        acc += t * std::log(t / p);
    }
    return acc;
}

std::vector<double> intrinsics_kl_logit_grad(const std::vector<double> &predicted,
                                             const std::vector<double> &target) {
    if (predicted.size() != target.size())
        throw input_error("intrinsics_kl_logit_grad: length mismatch");
    std::vector<double> g(predicted.size());
    for (std::size_t k = 0; k < predicted.size(); ++k)
        g[k] = predicted[k] - target[k];
    return g;
}

double total_loss(const LossReport &parts, const LossWeights &weights) {
    weights.validate();
    if (parts.flow_losses.size() != parts.consistency_losses.size())
        throw input_error("total_loss: per-candidate vectors must have equal length");
    double acc = weights.lambda_intr * parts.intrinsics_kl;
    for (std::size_t k = 0; k < parts.flow_losses.size(); ++k)
        acc += weights.lambda_flow * parts.flow_losses[k] +
               weights.lambda_consistency * parts.consistency_losses[k];
    return acc;
}

} // namespace anycam
