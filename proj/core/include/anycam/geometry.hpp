#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <vector>

namespace anycam {

// Simplified pinhole camera: one focal length, principal point fixed at the
// image center (W/2, H/2). Pixel (row i, col j), 0-based, samples the
// continuous image coordinate (j + 0.5, i + 0.5); the continuous frame has
// x right, y down, origin at the top-left corner.
struct Pinhole {
    double focal = 1.0; // pixels
    int width = 1;      // pixels
    int height = 1;     // pixels

    double cx() const { return 0.5 * width; }
    double cy() const { return 0.5 * height; }
    void validate() const; // throws input_error on violated invariants
};

// Rigid transform x' = R x + t with the rotation stored as an axis-angle
// 3-vector (direction = axis, norm = angle in radians). Canonical range
// |axis_angle| <= pi is maintained by all operations here.
struct PoseSE3 {
    Eigen::Vector3d axis_angle = Eigen::Vector3d::Zero();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static PoseSE3 identity() { return {}; }

    Eigen::Matrix3d rotation() const;
    Eigen::Matrix4d matrix() const;
    Eigen::Vector3d apply(const Eigen::Vector3d &p) const;
    bool is_finite() const;
};

struct DepthMap {
    int height = 0;
    int width = 0;
    std::vector<double> values; // row-major, all > 0 and finite

    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * width + j]; }
    double &at(int i, int j) { return values[static_cast<std::size_t>(i) * width + j]; }
    void validate() const;
};

struct FlowMap {
    int height = 0;
    int width = 0;
    std::vector<double> du; // x displacement, row-major
    std::vector<double> dv; // y displacement, row-major

    static FlowMap zero(int h, int w);
    double u_at(int i, int j) const { return du[static_cast<std::size_t>(i) * width + j]; }
    double v_at(int i, int j) const { return dv[static_cast<std::size_t>(i) * width + j]; }
    double &u_at(int i, int j) { return du[static_cast<std::size_t>(i) * width + j]; }
    double &v_at(int i, int j) { return dv[static_cast<std::size_t>(i) * width + j]; }
    void validate() const;
};

// Per-pixel byte mask, nonzero = valid.
struct PixelMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> values;

    static PixelMask all_valid(int h, int w) { return {h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w, 1)}; }
    bool at(int i, int j) const { return values[static_cast<std::size_t>(i) * width + j] != 0; }
    void set(int i, int j, bool v) { values[static_cast<std::size_t>(i) * width + j] = v ? 1 : 0; }
    std::size_t count() const;
};

// Rodrigues formula; returns the exact identity for the zero vector.
Eigen::Matrix3d rotation_from_axis_angle(const Eigen::Vector3d &axis_angle);

// Log map, canonical |result| <= pi.
Eigen::Vector3d axis_angle_from_rotation(const Eigen::Matrix3d &R);

// dR/d(axis_angle_k) for k = 0,1,2 at the given axis-angle point.
std::array<Eigen::Matrix3d, 3> rotation_jacobian(const Eigen::Vector3d &axis_angle);

// Projects a camera-frame point with z > 0 to continuous pixel coordinates
// (f x/z + W/2, f y/z + H/2). Throws input_error when z <= 0.
Eigen::Vector2d project(const Eigen::Vector3d &point, const Pinhole &cam);

// Inverse of project for a given depth (> 0): the camera-frame point at
// projective depth `depth` along the pixel ray.
Eigen::Vector3d unproject(const Eigen::Vector2d &pixel, double depth, const Pinhole &cam);

PoseSE3 compose(const PoseSE3 &a, const PoseSE3 &b); // M(result) = M(a) M(b)
PoseSE3 invert(const PoseSE3 &a);

// se3 exponential/log used for trajectory interpolation. Twist layout:
// [translational; rotational].
PoseSE3 se3_exp(const Eigen::Matrix<double, 6, 1> &twist);
Eigen::Matrix<double, 6, 1> se3_log(const PoseSE3 &pose);

struct InducedFlow {
    FlowMap flow;
    PixelMask valid; // false where the transformed point has z <= 0
};

// Flow implied by a camera motion and a depth map under a static world:
// per pixel p with depth d, flow = project(pose * unproject(p, d)) - p.
// `pose` maps source-frame camera coordinates to target-frame coordinates.
// Degenerate pixels (transformed z <= 0) are masked out, not fatal.
InducedFlow induced_flow(const PoseSE3 &pose, const DepthMap &depth, const Pinhole &cam);

// Left-to-right running products: out[j] = rel[0] * rel[1] * ... * rel[j].
// Feeding camera-to-world increments yields a camera-to-world trajectory
// relative to the first frame; consecutive differences
// invert(out[j-1]) * out[j] recover the inputs.
std::vector<PoseSE3> chain_relative_poses(const std::vector<PoseSE3> &rel);

// Edge-clamped bilinear lookup of a row-major raster whose pixel (i, j)
// holds the value at continuous coordinate (j + 0.5, i + 0.5).
double bilinear_sample(const std::vector<double> &values, int height, int width, double x, double y);

// Geodesic distance between the rotations of two poses, radians.
double rotation_geodesic(const PoseSE3 &a, const PoseSE3 &b);

// Angle between translation directions, radians; zero-length translations
// compare as 0 against themselves and pi/2 against non-zero ones.
double translation_direction_angle(const PoseSE3 &a, const PoseSE3 &b);

} // namespace anycam
