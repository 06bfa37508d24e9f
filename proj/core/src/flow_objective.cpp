#include "anycam/flow_objective.hpp"

#include "anycam/errors.hpp"

#include <cmath>

namespace anycam {

PairFlowResult pair_flow_objective(const PoseSE3 &pose, const SigmaGrid &sigma,
                                   const DepthMap &depth, const FlowMap &reference,
                                   const Pinhole &cam, bool with_grad) {
    if (depth.height != cam.height || depth.width != cam.width)
        throw input_error("pair_flow_objective: depth does not match camera dims");
    if (reference.height != depth.height || reference.width != depth.width)
        throw input_error("pair_flow_objective: flow does not match depth dims");
    if (sigma.raster_height != depth.height || sigma.raster_width != depth.width)
        throw input_error("pair_flow_objective: sigma grid does not match raster dims");

    static const double kSqrt2 = std::sqrt(2.0);
    static const double kLogSqrt2 = 0.5 * std::log(2.0);

    PairFlowResult out;
    if (with_grad)
        out.d_sigma_raw.assign(sigma.raw.size(), 0.0);

    const Eigen::Matrix3d r = pose.rotation();
    const Eigen::Vector3d t = pose.translation;
    std::array<Eigen::Matrix3d, 3> dr;
    if (with_grad)
        dr = rotation_jacobian(pose.axis_angle);

    // Node sigmas and their raw-derivatives are shared by every pixel.
    std::vector<double> node_sigma(sigma.raw.size()), node_dsigma(sigma.raw.size());
    for (std::size_t k = 0; k < sigma.raw.size(); ++k) {
        node_sigma[k] = sigma_from_raw(sigma.raw[k]);
        node_dsigma[k] = sigma_from_raw_derivative(sigma.raw[k]);
    }

    const double f = cam.focal;
    const double inv_f = 1.0 / f;
    const double cx = cam.cx(), cy = cam.cy();

    double acc = 0.0;
    Eigen::Matrix<double, 6, 1> d_pose_acc = Eigen::Matrix<double, 6, 1>::Zero();

    for (int i = 0; i < depth.height; ++i) {
        const double y = i + 0.5;
        for (int j = 0; j < depth.width; ++j) {
            const double x = j + 0.5;
            const double d = depth.at(i, j);
            const Eigen::Vector3d p0((x - cx) * inv_f * d, (y - cy) * inv_f * d, d);
            const Eigen::Vector3d p = r * p0 + t;
            if (!(p.z() > 0.0))
                continue;
            ++out.valid_count;

            const double inv_z = 1.0 / p.z();
            const double u_proj = f * p.x() * inv_z + cx;
            const double v_proj = f * p.y() * inv_z + cy;
            const double ru = u_proj - x - reference.u_at(i, j);
            const double rv = v_proj - y - reference.v_at(i, j);
            const double ell = std::abs(ru) + std::abs(rv);

            const SigmaGrid::Corners c = sigma.corners(x, y);
            double s = 0.0;
            for (int k = 0; k < 4; ++k)
                s += c.w[k] * node_sigma[c.idx[k]];

            acc += kLogSqrt2 + std::log(s) + kSqrt2 * ell / s;

            if (!with_grad)
                continue;

            // d term / d (proj) through the L1 residual.
            const double su = ru > 0.0 ? 1.0 : (ru < 0.0 ? -1.0 : 0.0);
            const double sv = rv > 0.0 ? 1.0 : (rv < 0.0 ? -1.0 : 0.0);
            const double scale = kSqrt2 / s;

            // d proj / d X = [f/z, 0, -f x/z^2 ; 0, f/z, -f y/z^2].
            const double gx = scale * su * f * inv_z;
            const double gy = scale * sv * f * inv_z;
            const double gz = -(gx * p.x() + gy * p.y()) * inv_z;

            d_pose_acc[3] += gx;
            d_pose_acc[4] += gy;
            d_pose_acc[5] += gz;
            for (int k = 0; k < 3; ++k) {
                const Eigen::Vector3d dp = dr[k] * p0;
                d_pose_acc[k] += gx * dp.x() + gy * dp.y() + gz * dp.z();
            }

            const double d_s = 1.0 / s - kSqrt2 * ell / (s * s);
            for (int k = 0; k < 4; ++k)
                out.d_sigma_raw[c.idx[k]] += d_s * c.w[k] * node_dsigma[c.idx[k]];
        }
    }

    if (out.valid_count == 0) {
        out.loss = 0.0;
        return out;
    }
    const double inv_n = 1.0 / static_cast<double>(out.valid_count);
    out.loss = acc * inv_n;
    if (with_grad) {
        out.d_pose = d_pose_acc * inv_n;
        for (double &g : out.d_sigma_raw)
            g *= inv_n;
    }
    return out;
}

} // namespace anycam
