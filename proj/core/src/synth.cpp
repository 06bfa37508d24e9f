#include "anycam/synth.hpp"

#include "anycam/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace anycam {

CameraPath camera_path_from_string(const std::string &name) {
    if (name == "straight")
        return CameraPath::Straight;
    if (name == "arc")
        return CameraPath::Arc;
    if (name == "rotation")
        return CameraPath::RotationDominant;
    if (name == "handheld")
        return CameraPath::HandheldJitter;
    throw input_error("unknown camera path '" + name + "' (straight|arc|rotation|handheld)");
}

std::string to_string(CameraPath path) {
    switch (path) {
    case CameraPath::Straight: return "straight";
    case CameraPath::Arc: return "arc";
    case CameraPath::RotationDominant: return "rotation";
    case CameraPath::HandheldJitter: return "handheld";
    }
    return "unknown";
}

void SceneSpec::validate() const {
    if (frames < 1)
        throw input_error("scene needs at least 1 frame");
    if (width < 4 || height < 4)
        throw input_error("scene raster must be at least 4x4");
    if (!(focal > 0.0))
        throw input_error("scene focal must be positive");
    if (!(plane_depth > 0.5))
        throw input_error("background plane must sit in front of the camera");
    if (num_movers > num_boxes)
        throw input_error("num_movers cannot exceed num_boxes");
    if (mover_coverage < 0.0 || mover_coverage > 0.6)
        throw input_error("mover coverage must lie in [0, 0.6]");
}

bool SyntheticSequence::is_mover(std::int16_t surface_id) const {
    if (surface_id <= 0)
        return false;
    return std::find(mover_box_ids.begin(), mover_box_ids.end(), surface_id) != mover_box_ids.end();
}

namespace {

struct Box {
    Eigen::Vector3d center; // frame-0 position
    Eigen::Vector3d half;
    Eigen::Vector3d velocity; // scene units per frame, zero for static boxes
};

struct Hit {
    double depth = 0.0;   // camera-z depth parameter
    std::int16_t id = 0;  // 0 = plane, 1+k = box k
};

// Slab test along x = origin + s * dir with s the camera-depth parameter.
bool intersect_box(const Eigen::Vector3d &origin, const Eigen::Vector3d &dir,
                   const Eigen::Vector3d &lo, const Eigen::Vector3d &hi, double &s_hit) {
    double s_near = 1e-9, s_far = 1e30;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(dir[a]) < 1e-12) {
            if (origin[a] < lo[a] || origin[a] > hi[a])
                return false;
            continue;
        }
        double s0 = (lo[a] - origin[a]) / dir[a];
        double s1 = (hi[a] - origin[a]) / dir[a];
        if (s0 > s1)
            std::swap(s0, s1);
        s_near = std::max(s_near, s0);
        s_far = std::min(s_far, s1);
        if (s_near > s_far)
            return false;
    }
    s_hit = s_near;
    return true;
}

Hit trace(const Eigen::Vector3d &origin, const Eigen::Vector3d &dir, double plane_depth,
          const std::vector<Box> &boxes, int frame) {
    Hit hit;
    if (dir.z() <= 1e-9)
        throw input_error("synthetic scene: ray misses the background plane (rotation too large)");
    hit.depth = (plane_depth - origin.z()) / dir.z();
    if (hit.depth <= 0.0)
        throw input_error("synthetic scene: camera passed the background plane");
    hit.id = 0;
    for (std::size_t k = 0; k < boxes.size(); ++k) {
        const Eigen::Vector3d offset = boxes[k].velocity * static_cast<double>(frame);
        const Eigen::Vector3d lo = boxes[k].center + offset - boxes[k].half;
        const Eigen::Vector3d hi = boxes[k].center + offset + boxes[k].half;
        double s = 0.0;
        if (intersect_box(origin, dir, lo, hi, s) && s < hit.depth) {
            hit.depth = s;
            hit.id = static_cast<std::int16_t>(1 + k);
        }
    }
    return hit;
}

std::vector<PoseSE3> camera_increments(const SceneSpec &spec, std::mt19937_64 &rng) {
    std::vector<PoseSE3> inc;
    inc.reserve(static_cast<std::size_t>(std::max(0, spec.frames - 1)));
    const double rot = spec.rotation_per_frame;
    const double trans = spec.translation_per_frame;

    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Vector3d jitter_aa = Eigen::Vector3d::Zero();
    Eigen::Vector3d jitter_t = Eigen::Vector3d::Zero();

    for (int i = 0; i + 1 < spec.frames; ++i) {
        PoseSE3 d;
        switch (spec.camera_path) {
        case CameraPath::Straight:
            d.translation = trans * Eigen::Vector3d(0.65, 0.2, 0.45).normalized();
            break;
        case CameraPath::Arc:
            d.axis_angle = Eigen::Vector3d(0.12 * rot, rot, 0.0);
            d.translation = trans * Eigen::Vector3d(0.9, 0.1, 0.3).normalized();
            break;
        case CameraPath::RotationDominant:
            d.axis_angle = Eigen::Vector3d(0.3 * rot, rot, 0.1 * rot);
            d.translation = 0.15 * trans * Eigen::Vector3d(1.0, 0.2, 0.1).normalized();
            break;
        case CameraPath::HandheldJitter: {
            // AR(1) noise keeps the jitter temporally smooth.
            jitter_aa = 0.6 * jitter_aa + 0.4 * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng)) * (0.5 * rot);
            jitter_t = 0.6 * jitter_t + 0.4 * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng)) * (0.4 * trans);
            d.axis_angle = Eigen::Vector3d(0.0, 0.4 * rot, 0.0) + jitter_aa;
            d.translation = trans * Eigen::Vector3d(0.7, 0.1, 0.3).normalized() + jitter_t;
            break;
        }
        }
        inc.push_back(d);
    }
    return inc;
}

} // namespace

SyntheticSequence generate_scene(const SceneSpec &spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const Pinhole cam{spec.focal, spec.width, spec.height};
    cam.validate();

    // Camera trajectory (camera-to-world, world = frame 0).
    std::vector<PoseSE3> increments = camera_increments(spec, rng);
    std::vector<PoseSE3> absolute;
    absolute.reserve(static_cast<std::size_t>(spec.frames));
    absolute.push_back(PoseSE3::identity());
    for (const PoseSE3 &d : increments)
        absolute.push_back(compose(absolute.back(), d));

    // Boxes: movers first, each a thin slab so its projection is the front face.
    std::vector<Box> boxes;
    std::vector<std::int16_t> mover_ids;
    for (int k = 0; k < spec.num_boxes; ++k) {
        const bool mover = k < spec.num_movers;
        Box b;
        const double z = mover ? 1.7 + 0.3 * unit(rng) : 2.4 + 0.8 * unit(rng);
        const double px = mover ? spec.width * (0.35 + 0.3 * unit(rng))
                                : spec.width * (0.15 + 0.7 * unit(rng));
        const double py = mover ? spec.height * (0.35 + 0.3 * unit(rng))
                                : spec.height * (0.15 + 0.7 * unit(rng));
        b.center = unproject({px, py}, z, cam);
        if (mover) {
            const double side_px = std::sqrt(std::max(1e-9, spec.mover_coverage) *
                                             spec.width * spec.height);
            const double side = side_px * z / spec.focal;
            b.half = {0.5 * side, 0.5 * side, 0.005};
            const double angle = 2.0 * M_PI * unit(rng);
            b.velocity = spec.mover_speed * Eigen::Vector3d(std::cos(angle), 0.6 * std::sin(angle), 0.0);
            // Start shifted back so the box stays near the view center mid-sequence.
            b.center -= b.velocity * (0.5 * spec.frames);
            mover_ids.push_back(static_cast<std::int16_t>(1 + k));
        } else {
            const double side = (0.3 + 0.4 * unit(rng)) * z / 3.0;
            b.half = {0.5 * side, 0.5 * side, 0.005};
            b.velocity = Eigen::Vector3d::Zero();
        }
        boxes.push_back(b);
    }

    // Camera must stay outside every box and in front of the plane.
    for (int t = 0; t < spec.frames; ++t) {
        const Eigen::Vector3d c = absolute[static_cast<std::size_t>(t)].translation;
        if (c.z() > spec.plane_depth - 0.3)
            throw input_error("synthetic scene: camera inside geometry (background plane)");
        for (const Box &b : boxes) {
            const Eigen::Vector3d offset = b.velocity * static_cast<double>(t);
            const Eigen::Vector3d lo = b.center + offset - b.half - Eigen::Vector3d::Constant(0.05);
            const Eigen::Vector3d hi = b.center + offset + b.half + Eigen::Vector3d::Constant(0.05);
            if ((c.array() >= lo.array()).all() && (c.array() <= hi.array()).all())
                throw input_error("synthetic scene: camera inside geometry (box)");
        }
    }

    SyntheticSequence seq;
    seq.focal = spec.focal;
    seq.width = spec.width;
    seq.height = spec.height;
    seq.gt_absolute_poses = absolute;
    seq.gt_relative_poses.reserve(increments.size());
    for (std::size_t i = 0; i + 1 < absolute.size(); ++i)
        seq.gt_relative_poses.push_back(compose(invert(absolute[i]), absolute[i + 1]));
    seq.mover_box_ids = mover_ids;

    const std::size_t npx = static_cast<std::size_t>(spec.width) * spec.height;
    seq.depths.resize(static_cast<std::size_t>(spec.frames));
    seq.motion_masks.resize(static_cast<std::size_t>(spec.frames));
    seq.surface_ids.resize(static_cast<std::size_t>(spec.frames));

    // Per-frame hit buffers reused for flow generation.
    std::vector<std::vector<Eigen::Vector3d>> world_points(static_cast<std::size_t>(spec.frames));

    for (int t = 0; t < spec.frames; ++t) {
        const Eigen::Matrix3d r = absolute[static_cast<std::size_t>(t)].rotation();
        const Eigen::Vector3d c = absolute[static_cast<std::size_t>(t)].translation;

        DepthMap depth;
        depth.height = spec.height;
        depth.width = spec.width;
        depth.values.resize(npx);
        PixelMask mask{spec.height, spec.width, std::vector<std::uint8_t>(npx, 0)};
        std::vector<std::int16_t> ids(npx, 0);
        world_points[static_cast<std::size_t>(t)].resize(npx);

        for (int i = 0; i < spec.height; ++i) {
            for (int j = 0; j < spec.width; ++j) {
                const double x = j + 0.5, y = i + 0.5;
                const Eigen::Vector3d u((x - cam.cx()) / spec.focal, (y - cam.cy()) / spec.focal, 1.0);
                const Eigen::Vector3d dir = r * u;
                const Hit hit = trace(c, dir, spec.plane_depth, boxes, t);
                const std::size_t k = static_cast<std::size_t>(i) * spec.width + j;
                depth.values[k] = hit.depth;
                ids[k] = hit.id;
                mask.values[k] = seq.is_mover(hit.id) ? 1 : 0;
                world_points[static_cast<std::size_t>(t)][k] = c + hit.depth * dir;
            }
        }
        seq.depths[static_cast<std::size_t>(t)] = std::move(depth);
        seq.motion_masks[static_cast<std::size_t>(t)] = std::move(mask);
        seq.surface_ids[static_cast<std::size_t>(t)] = std::move(ids);
    }

    auto mover_velocity = [&](std::int16_t id) -> Eigen::Vector3d {
        if (id > 0)
            return boxes[static_cast<std::size_t>(id - 1)].velocity;
        return Eigen::Vector3d::Zero();
    };

    // Exact flow: project each surface point through the other frame's camera,
    // moving the material point along the box velocity for movers.
    seq.flow_fwd.resize(static_cast<std::size_t>(std::max(0, spec.frames - 1)));
    seq.flow_bwd.resize(static_cast<std::size_t>(std::max(0, spec.frames - 1)));
    for (int t = 0; t + 1 < spec.frames; ++t) {
        FlowMap fwd = FlowMap::zero(spec.height, spec.width);
        FlowMap bwd = FlowMap::zero(spec.height, spec.width);

        const PoseSE3 world_to_next = invert(absolute[static_cast<std::size_t>(t + 1)]);
        const PoseSE3 world_to_cur = invert(absolute[static_cast<std::size_t>(t)]);

        for (int i = 0; i < spec.height; ++i) {
            for (int j = 0; j < spec.width; ++j) {
                const std::size_t k = static_cast<std::size_t>(i) * spec.width + j;
                const double x = j + 0.5, y = i + 0.5;
                {
                    const std::int16_t id = seq.surface_ids[static_cast<std::size_t>(t)][k];
                    const Eigen::Vector3d moved =
                        world_points[static_cast<std::size_t>(t)][k] + mover_velocity(id);
                    const Eigen::Vector3d p_next = world_to_next.apply(moved);
                    const Eigen::Vector2d px = project(p_next, cam);
                    fwd.u_at(i, j) = px.x() - x;
                    fwd.v_at(i, j) = px.y() - y;
                }
                {
                    const std::int16_t id = seq.surface_ids[static_cast<std::size_t>(t + 1)][k];
                    const Eigen::Vector3d moved =
                        world_points[static_cast<std::size_t>(t + 1)][k] - mover_velocity(id);
                    const Eigen::Vector3d p_cur = world_to_cur.apply(moved);
                    const Eigen::Vector2d px = project(p_cur, cam);
                    bwd.u_at(i, j) = px.x() - x;
                    bwd.v_at(i, j) = px.y() - y;
                }
            }
        }
        seq.flow_fwd[static_cast<std::size_t>(t)] = std::move(fwd);
        seq.flow_bwd[static_cast<std::size_t>(t)] = std::move(bwd);
    }
    return seq;
}

SyntheticSequence perturb(const SyntheticSequence &seq, double flow_sigma,
                          double depth_rel_sigma, std::uint64_t seed) {
    if (flow_sigma < 0.0 || depth_rel_sigma < 0.0)
        throw input_error("perturb: noise levels must be nonnegative");
    SyntheticSequence out = seq;
    if (flow_sigma == 0.0 && depth_rel_sigma == 0.0)
        return out;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    if (flow_sigma > 0.0) {
        for (auto list : {&out.flow_fwd, &out.flow_bwd}) {
            for (FlowMap &f : *list) {
                for (double &v : f.du)
                    v += flow_sigma * gauss(rng);
                for (double &v : f.dv)
                    v += flow_sigma * gauss(rng);
            }
        }
    }
    if (depth_rel_sigma > 0.0) {
        for (DepthMap &d : out.depths)
            for (double &v : d.values)
                v *= std::exp(depth_rel_sigma * gauss(rng));
    }
    return out;
}

std::vector<FrameObservations> to_observations(const SyntheticSequence &seq, int start, int count) {
    const int n = seq.frames();
    if (count < 0)
        count = n - start;
    if (start < 0 || count < 2 || start + count > n)
        throw input_error("to_observations: frame range out of bounds");
    std::vector<FrameObservations> obs(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        obs[static_cast<std::size_t>(i)].depth = seq.depths[static_cast<std::size_t>(start + i)];
        if (i + 1 < count) {
            obs[static_cast<std::size_t>(i)].flow_fwd = seq.flow_fwd[static_cast<std::size_t>(start + i)];
            obs[static_cast<std::size_t>(i)].flow_bwd = seq.flow_bwd[static_cast<std::size_t>(start + i)];
        }
    }
    return obs;
}

} // namespace anycam
