#include "anycam/geometry.hpp"

#include "anycam/errors.hpp"

#include <cmath>
#include <string>

namespace anycam {

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d &v) {
    Eigen::Matrix3d s;
    s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return s;
}

constexpr double kTinyAngle = 1e-12;

} // namespace

void Pinhole::validate() const {
    if (!(focal > 0.0) || !std::isfinite(focal))
        throw input_error("pinhole focal must be positive and finite");
    if (width < 1 || height < 1)
        throw input_error("pinhole dimensions must be >= 1");
}

Eigen::Matrix3d PoseSE3::rotation() const { return rotation_from_axis_angle(axis_angle); }

Eigen::Matrix4d PoseSE3::matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation();
    m.topRightCorner<3, 1>() = translation;
    return m;
}

Eigen::Vector3d PoseSE3::apply(const Eigen::Vector3d &p) const { return rotation() * p + translation; }

bool PoseSE3::is_finite() const { return axis_angle.allFinite() && translation.allFinite(); }

void DepthMap::validate() const {
    if (height < 1 || width < 1 || values.size() != static_cast<std::size_t>(height) * width)
        throw input_error("depth map dimensions inconsistent with payload");
    for (double d : values)
        if (!(d > 0.0) || !std::isfinite(d))
            throw input_error("depth map values must be positive and finite");
}

FlowMap FlowMap::zero(int h, int w) {
    FlowMap f;
    f.height = h;
    f.width = w;
    f.du.assign(static_cast<std::size_t>(h) * w, 0.0);
    f.dv.assign(static_cast<std::size_t>(h) * w, 0.0);
    return f;
}

void FlowMap::validate() const {
    const std::size_t n = static_cast<std::size_t>(height) * width;
    if (height < 1 || width < 1 || du.size() != n || dv.size() != n)
        throw input_error("flow map dimensions inconsistent with payload");
    for (std::size_t k = 0; k < n; ++k)
        if (!std::isfinite(du[k]) || !std::isfinite(dv[k]))
            throw input_error("flow map values must be finite");
}

std::size_t PixelMask::count() const {
    std::size_t n = 0;
    for (auto v : values)
        n += v != 0;
    return n;
}

Eigen::Matrix3d rotation_from_axis_angle(const Eigen::Vector3d &axis_angle) {
    const double theta2 = axis_angle.squaredNorm();
    if (theta2 == 0.0)
        return Eigen::Matrix3d::Identity();

    const double theta = std::sqrt(theta2);
    const Eigen::Matrix3d k = skew(axis_angle);
    double a, b; // R = I + a K + b K^2 with K = skew(axis_angle)
    if (theta < 1e-4) {
        a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
        b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
    } else {
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / theta2;
    }
    return Eigen::Matrix3d::Identity() + a * k + b * (k * k);
}

Eigen::Vector3d axis_angle_from_rotation(const Eigen::Matrix3d &R) {
    Eigen::AngleAxisd aa(R);
    double angle = aa.angle();
    Eigen::Vector3d axis = aa.axis();
    // Eigen returns angle in [0, pi]; keep it there.
    if (angle < kTinyAngle)
        return Eigen::Vector3d::Zero();
    return angle * axis;
}

std::array<Eigen::Matrix3d, 3> rotation_jacobian(const Eigen::Vector3d &axis_angle) {
    std::array<Eigen::Matrix3d, 3> jac;
    const double theta2 = axis_angle.squaredNorm();
    if (theta2 < 1e-14) {
        for (int k = 0; k < 3; ++k)
            jac[k] = skew(Eigen::Vector3d::Unit(k));
        return jac;
    }
    // dR/dw_k = (w_k [w]x + [w x (I - R) e_k]x) / theta^2 * R
    const Eigen::Matrix3d R = rotation_from_axis_angle(axis_angle);
    const Eigen::Matrix3d w_skew = skew(axis_angle);
    const Eigen::Matrix3d i_minus_r = Eigen::Matrix3d::Identity() - R;
    for (int k = 0; k < 3; ++k) {
        const Eigen::Vector3d v = axis_angle.cross(i_minus_r.col(k));
        jac[k] = ((axis_angle[k] * w_skew + skew(v)) / theta2) * R;
    }
    return jac;
}

Eigen::Vector2d project(const Eigen::Vector3d &point, const Pinhole &cam) {
    if (!(point.z() > 0.0))
        throw input_error("project: point is behind the camera (z <= 0)");
    const double inv_z = 1.0 / point.z();
    return {cam.focal * point.x() * inv_z + cam.cx(), cam.focal * point.y() * inv_z + cam.cy()};
}

Eigen::Vector3d unproject(const Eigen::Vector2d &pixel, double depth, const Pinhole &cam) {
    if (!(depth > 0.0))
        throw input_error("unproject: depth must be positive");
    return {(pixel.x() - cam.cx()) / cam.focal * depth, (pixel.y() - cam.cy()) / cam.focal * depth, depth};
}

PoseSE3 compose(const PoseSE3 &a, const PoseSE3 &b) {
    const Eigen::Matrix3d ra = a.rotation();
    PoseSE3 out;
    out.axis_angle = axis_angle_from_rotation(ra * b.rotation());
    out.translation = ra * b.translation + a.translation;
    return out;
}

PoseSE3 invert(const PoseSE3 &a) {
    const Eigen::Matrix3d rt = a.rotation().transpose();
    PoseSE3 out;
    out.axis_angle = -a.axis_angle;
    out.translation = -(rt * a.translation);
    return out;
}

PoseSE3 se3_exp(const Eigen::Matrix<double, 6, 1> &twist) {
    const Eigen::Vector3d rho = twist.head<3>();
    const Eigen::Vector3d omega = twist.tail<3>();
    const double theta2 = omega.squaredNorm();
    const Eigen::Matrix3d k = skew(omega);

    double b, c; // V = I + b K + c K^2
    if (theta2 < 1e-10) {
        b = 0.5 - theta2 / 24.0;
        c = 1.0 / 6.0 - theta2 / 120.0;
    } else {
        const double theta = std::sqrt(theta2);
        b = (1.0 - std::cos(theta)) / theta2;
        c = (theta - std::sin(theta)) / (theta2 * theta);
    }
    const Eigen::Matrix3d v = Eigen::Matrix3d::Identity() + b * k + c * (k * k);

    PoseSE3 out;
    out.axis_angle = omega;
    out.translation = v * rho;
    return out;
}

Eigen::Matrix<double, 6, 1> se3_log(const PoseSE3 &pose) {
    const Eigen::Vector3d omega = pose.axis_angle;
    const double theta2 = omega.squaredNorm();
    const Eigen::Matrix3d k = skew(omega);

    Eigen::Matrix3d v_inv;
    if (theta2 < 1e-10) {
        v_inv = Eigen::Matrix3d::Identity() - 0.5 * k + (1.0 / 12.0) * (k * k);
    } else {
        const double theta = std::sqrt(theta2);
        const double half = 0.5 * theta;
        const double cot_term = 1.0 / theta2 - 0.5 * std::cos(half) / (theta * std::sin(half));
        v_inv = Eigen::Matrix3d::Identity() - 0.5 * k + cot_term * (k * k);
    }

    Eigen::Matrix<double, 6, 1> twist;
    twist.head<3>() = v_inv * pose.translation;
    twist.tail<3>() = omega;
    return twist;
}

InducedFlow induced_flow(const PoseSE3 &pose, const DepthMap &depth, const Pinhole &cam) {
    if (depth.height != cam.height || depth.width != cam.width)
        throw input_error("induced_flow: depth dimensions do not match the camera");
    if (!pose.is_finite())
        throw input_error("induced_flow: pose must be finite");

    InducedFlow out;
    out.flow = FlowMap::zero(depth.height, depth.width);
    out.valid = PixelMask::all_valid(depth.height, depth.width);

    const Eigen::Matrix3d r = pose.rotation();
    const Eigen::Vector3d t = pose.translation;
    const double inv_f = 1.0 / cam.focal;
    const double cx = cam.cx(), cy = cam.cy();

    for (int i = 0; i < depth.height; ++i) {
        const double y = i + 0.5;
        for (int j = 0; j < depth.width; ++j) {
            const double x = j + 0.5;
            const double d = depth.at(i, j);
            const Eigen::Vector3d p0((x - cx) * inv_f * d, (y - cy) * inv_f * d, d);
            const Eigen::Vector3d p = r * p0 + t;
            if (!(p.z() > 0.0)) {
                out.valid.set(i, j, false);
                continue;
            }
            const double inv_z = 1.0 / p.z();
            out.flow.u_at(i, j) = cam.focal * p.x() * inv_z + cx - x;
            out.flow.v_at(i, j) = cam.focal * p.y() * inv_z + cy - y;
        }
    }
    return out;
}

std::vector<PoseSE3> chain_relative_poses(const std::vector<PoseSE3> &rel) {
    if (rel.empty())
        throw input_error("chain_relative_poses: empty input sequence");
    std::vector<PoseSE3> abs;
    abs.reserve(rel.size());
    PoseSE3 acc = rel.front();
    abs.push_back(acc);
    for (std::size_t i = 1; i < rel.size(); ++i) {
        acc = compose(acc, rel[i]);
        abs.push_back(acc);
    }
    return abs;
}

double bilinear_sample(const std::vector<double> &values, int height, int width, double x, double y) {
    const double u = std::clamp(x - 0.5, 0.0, static_cast<double>(width - 1));
    const double v = std::clamp(y - 0.5, 0.0, static_cast<double>(height - 1));
    int j0 = std::min(static_cast<int>(u), width - 2 >= 0 ? width - 2 : 0);
    int i0 = std::min(static_cast<int>(v), height - 2 >= 0 ? height - 2 : 0);
    j0 = std::max(j0, 0);
    i0 = std::max(i0, 0);
    const int j1 = std::min(j0 + 1, width - 1);
    const int i1 = std::min(i0 + 1, height - 1);
    const double fu = std::clamp(u - j0, 0.0, 1.0);
    const double fv = std::clamp(v - i0, 0.0, 1.0);
    const auto at = [&](int i, int j) { return values[static_cast<std::size_t>(i) * width + j]; };
    return (1.0 - fv) * ((1.0 - fu) * at(i0, j0) + fu * at(i0, j1)) +
           fv * ((1.0 - fu) * at(i1, j0) + fu * at(i1, j1));
}

double rotation_geodesic(const PoseSE3 &a, const PoseSE3 &b) {
    const Eigen::Matrix3d rel = a.rotation().transpose() * b.rotation();
    const double c = std::clamp(0.5 * (rel.trace() - 1.0), -1.0, 1.0);
    return std::acos(c);
}

double translation_direction_angle(const PoseSE3 &a, const PoseSE3 &b) {
    const double na = a.translation.norm();
    const double nb = b.translation.norm();
    if (na < 1e-15 && nb < 1e-15)
        return 0.0;
    if (na < 1e-15 || nb < 1e-15)
        return M_PI / 2.0;
    const double c = std::clamp(a.translation.dot(b.translation) / (na * nb), -1.0, 1.0);
    return std::acos(c);
}

} // namespace anycam
