#include "anycam/refine.hpp"

#include "anycam/adam.hpp"
#include "anycam/errors.hpp"
#include "anycam/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace anycam {

void RefineConfig::validate() const {
    if (grid < 1 || track_length < 2 || stride < 1 || window < 2 || steps_per_window < 1 ||
        global_steps < 0)
        throw input_error("refine config counts must be positive");
    if (overlap < 0 || overlap >= window)
        throw input_error("refine overlap must satisfy 0 <= overlap < window");
    if (!(step_size > 0.0) || !(sigma_max > 0.0) || lambda_smooth < 0.0)
        throw input_error("refine step/sigma_max must be positive, lambda_smooth nonnegative");
}

TrackSet build_tracks(const std::vector<FlowMap> &flows_fwd,
                      const std::vector<UncertaintyMap> &sigmas,
                      const std::vector<DepthMap> &depths, const RefineConfig &config) {
    config.validate();
    const std::size_t n = depths.size();
    if (n < 2)
        throw input_error("build_tracks: sequence length must be >= 2");
    if (flows_fwd.size() != n - 1 || sigmas.size() != n - 1)
        throw input_error("build_tracks: need n-1 flow and uncertainty rasters");

    const int h = depths.front().height;
    const int w = depths.front().width;

    TrackSet set;
    for (int anchor = 0; anchor + 1 < static_cast<int>(n); anchor += config.stride) {
        for (int gi = 0; gi < config.grid; ++gi) {
            for (int gj = 0; gj < config.grid; ++gj) {
                Track tr;
                tr.anchor_frame = anchor;
                Eigen::Vector2d p(w * (gj + 0.5) / config.grid, h * (gi + 0.5) / config.grid);
                tr.pixels.push_back(p);
                tr.sigmas.push_back(0.0);
                const double d =
                    bilinear_sample(depths[static_cast<std::size_t>(anchor)].values, h, w, p.x(), p.y());
                tr.inv_depth = 1.0 / d;

                for (int step = 1; step < config.track_length; ++step) {
                    const int frame = anchor + step - 1; // flow pair frame -> frame+1
                    if (frame + 1 >= static_cast<int>(n))
                        break;
                    const FlowMap &f = flows_fwd[static_cast<std::size_t>(frame)];
                    const Eigen::Vector2d q(p.x() + bilinear_sample(f.du, h, w, p.x(), p.y()),
                                            p.y() + bilinear_sample(f.dv, h, w, p.x(), p.y()));
                    if (q.x() < 0.0 || q.x() > w || q.y() < 0.0 || q.y() > h)
                        break; // truncated at the last in-bounds position
                    const double s_step = bilinear_sample(
                        sigmas[static_cast<std::size_t>(frame)].sigma, h, w, p.x(), p.y());
                    tr.sigmas.push_back(tr.sigmas.back() + s_step);
                    tr.pixels.push_back(q);
                    p = q;
                }
                if (tr.length() >= 2)
                    set.tracks.push_back(std::move(tr));
            }
        }
    }
    return set;
}

namespace {

struct SampledLayout {
    std::vector<int> sampled;      // original indices of sampled frames
    std::vector<int> parent;       // per original frame: index into `sampled`
    std::vector<PoseSE3> attach;   // per original frame: inv(init[parent]) * init[frame]
};

SampledLayout make_layout(const std::vector<PoseSE3> &initial, int stride) {
    SampledLayout lay;
    const int n = static_cast<int>(initial.size());
    for (int j = 0; j < n; j += stride)
        lay.sampled.push_back(j);
    lay.parent.resize(static_cast<std::size_t>(n));
    lay.attach.resize(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const int k = std::min<int>(j / stride, static_cast<int>(lay.sampled.size()) - 1);
        lay.parent[static_cast<std::size_t>(j)] = k;
        lay.attach[static_cast<std::size_t>(j)] =
            compose(invert(initial[static_cast<std::size_t>(lay.sampled[static_cast<std::size_t>(k)])]),
                    initial[static_cast<std::size_t>(j)]);
    }
    return lay;
}

struct PoseCache {
    Eigen::Matrix3d r;
    Eigen::Vector3d t;
    std::array<Eigen::Matrix3d, 3> dr;
};

// Reprojection of one track with gradients into the sampled-pose parameters,
// the track's inverse depth, and the focal length. Gated points are skipped
// entirely, so they contribute neither cost nor gradient.
double track_cost_grad(const Track &tr, double inv_depth, const SampledLayout &lay,
                       const std::vector<PoseCache> &cache, double focal, double cx, double cy,
                       double sigma_max, bool with_grad, std::vector<double> *d_pose6,
                       double *d_inv_depth, double *d_focal) {
    const int ka = lay.parent[static_cast<std::size_t>(tr.anchor_frame)];
    const PoseCache &a = cache[static_cast<std::size_t>(ka)];

    const double depth = 1.0 / inv_depth;
    const Eigen::Vector3d x_anchor((tr.pixels[0].x() - cx) / focal * depth,
                                   (tr.pixels[0].y() - cy) / focal * depth, depth);
    const Eigen::Vector3d x_world = a.r * x_anchor + a.t;

    // d x_anchor / d inv_depth and / d focal.
    const double d_depth_d_inv = -depth * depth;
    const Eigen::Vector3d dxa_dd((tr.pixels[0].x() - cx) / focal, (tr.pixels[0].y() - cy) / focal, 1.0);
    const Eigen::Vector3d dxa_dinv = dxa_dd * d_depth_d_inv;
    const Eigen::Vector3d dxa_df(-(tr.pixels[0].x() - cx) / (focal * focal) * depth,
                                 -(tr.pixels[0].y() - cy) / (focal * focal) * depth, 0.0);

    double cost = 0.0;
    for (std::size_t i = 1; i < tr.length(); ++i) {
        const double weight = sigma_max - tr.sigmas[i];
        if (weight <= 0.0)
            continue;

        const int frame = tr.anchor_frame + static_cast<int>(i);
        const int kb = lay.parent[static_cast<std::size_t>(frame)];
        const PoseCache &b = cache[static_cast<std::size_t>(kb)];
        const PoseSE3 &att = lay.attach[static_cast<std::size_t>(frame)];
        const Eigen::Matrix3d att_rt = att.rotation().transpose();

        const Eigen::Vector3d diff = x_world - b.t;
        const Eigen::Vector3d y = b.r.transpose() * diff;
        const Eigen::Vector3d x_cam = att_rt * (y - att.translation);
        if (!(x_cam.z() > 1e-9))
            continue;

        const double inv_z = 1.0 / x_cam.z();
        const double u = focal * x_cam.x() * inv_z + cx;
        const double v = focal * x_cam.y() * inv_z + cy;
        const double ru = u - tr.pixels[i].x();
        const double rv = v - tr.pixels[i].y();
        cost += weight * (std::abs(ru) + std::abs(rv));

        if (!with_grad)
            continue;

        const double su = weight * (ru > 0.0 ? 1.0 : (ru < 0.0 ? -1.0 : 0.0));
        const double sv = weight * (rv > 0.0 ? 1.0 : (rv < 0.0 ? -1.0 : 0.0));

        // d cost / d x_cam through the projection.
        Eigen::Vector3d g_cam(su * focal * inv_z, sv * focal * inv_z, 0.0);
        g_cam.z() = -(g_cam.x() * x_cam.x() + g_cam.y() * x_cam.y()) * inv_z;
        // Direct focal dependence of the projection.
        if (d_focal)
            *d_focal += su * x_cam.x() * inv_z + sv * x_cam.y() * inv_z;

        const Eigen::Vector3d g_y = att_rt.transpose() * g_cam;  // d cost / d y
        const Eigen::Vector3d g_world = b.r * g_y;               // d cost / d x_world

        if (d_pose6) {
            // Target pose kb: y = R_b^T (x_world - t_b).
            double *gb = d_pose6->data() + static_cast<std::ptrdiff_t>(kb) * 6;
            for (int m = 0; m < 3; ++m)
                gb[m] += (b.dr[m].transpose() * diff).dot(g_y);
            gb[3] -= g_world.x();
            gb[4] -= g_world.y();
            gb[5] -= g_world.z();

            // Anchor pose ka: x_world = R_a x_anchor + t_a.
            double *ga = d_pose6->data() + static_cast<std::ptrdiff_t>(ka) * 6;
            for (int m = 0; m < 3; ++m)
                ga[m] += (a.dr[m] * x_anchor).dot(g_world);
            ga[3] += g_world.x();
            ga[4] += g_world.y();
            ga[5] += g_world.z();
        }

        const Eigen::Vector3d g_anchor = a.r.transpose() * g_world; // d cost / d x_anchor
        if (d_inv_depth)
            *d_inv_depth += g_anchor.dot(dxa_dinv);
        if (d_focal)
            *d_focal += g_anchor.dot(dxa_df);
    }
    return cost;
}

std::vector<PoseCache> make_cache(const std::vector<PoseSE3> &sampled_poses, bool with_grad) {
    std::vector<PoseCache> cache(sampled_poses.size());
    for (std::size_t k = 0; k < sampled_poses.size(); ++k) {
        cache[k].r = sampled_poses[k].rotation();
        cache[k].t = sampled_poses[k].translation;
        if (with_grad)
            cache[k].dr = rotation_jacobian(sampled_poses[k].axis_angle);
    }
    return cache;
}

// || D_k^-1 D_{k+1} - I ||_{1,1} terms over the sampled chain, with gradients
// backpropagated through the 4x4 matrix products.
void accumulate_matrix_pose_grad(const PoseSE3 &pose, const Eigen::Matrix4d &g, bool inverted,
                                 const std::array<Eigen::Matrix3d, 3> &dr, double *out6) {
    const Eigen::Matrix3d r = pose.rotation();
    const Eigen::Vector3d t = pose.translation;
    const Eigen::Matrix3d g_rot = g.topLeftCorner<3, 3>();
    const Eigen::Vector3d g_t = g.topRightCorner<3, 1>();

    Eigen::Matrix3d d_r;
    Eigen::Vector3d d_t;
    if (!inverted) {
        d_r = g_rot;
        d_t = g_t;
    } else {
        // A = inv(T): A_rot = R^T, A_t = -R^T t.
        d_r = g_rot.transpose() - t * g_t.transpose();
        d_t = -(r * g_t);
    }
    for (int m = 0; m < 3; ++m)
        out6[m] += (d_r.array() * dr[m].array()).sum();
    out6[3] += d_t.x();
    out6[4] += d_t.y();
    out6[5] += d_t.z();
}

double sampled_smoothness_grad(const std::vector<PoseSE3> &sampled,
                               const std::vector<PoseCache> &cache, bool with_grad,
                               std::vector<double> *d_pose6, int begin, int end) {
    const int triples_begin = std::max(begin, 0);
    const int triples_end = std::min<int>(end, static_cast<int>(sampled.size())) - 2;
    int count = 0;
    double cost = 0.0;
    for (int k = triples_begin; k < triples_end; ++k) {
        const Eigen::Matrix4d m_k = sampled[static_cast<std::size_t>(k)].matrix();
        const Eigen::Matrix4d m_k2 = sampled[static_cast<std::size_t>(k + 2)].matrix();
        Eigen::Matrix4d m_inv1 = Eigen::Matrix4d::Identity();
        {
            const Eigen::Matrix3d rt = cache[static_cast<std::size_t>(k + 1)].r.transpose();
            m_inv1.topLeftCorner<3, 3>() = rt;
            m_inv1.topRightCorner<3, 1>() = -(rt * cache[static_cast<std::size_t>(k + 1)].t);
        }
        // S = inv(T_{k+1}) T_k inv(T_{k+1}) T_{k+2}.
        const Eigen::Matrix4d p12 = m_inv1 * m_k;
        const Eigen::Matrix4d p34 = m_inv1 * m_k2;
        const Eigen::Matrix4d s = p12 * p34;
        const Eigen::Matrix4d dev = s - Eigen::Matrix4d::Identity();
        cost += dev.cwiseAbs().sum();
        ++count;

        if (!with_grad)
            continue;
        const Eigen::Matrix4d g_s = dev.unaryExpr([](double x) {
            return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
        });
        const Eigen::Matrix4d g_p12 = g_s * p34.transpose();
        const Eigen::Matrix4d g_p34 = p12.transpose() * g_s;
        const Eigen::Matrix4d g_minv1 = g_p12 * m_k.transpose() + g_p34 * m_k2.transpose();
        const Eigen::Matrix4d g_mk = m_inv1.transpose() * g_p12;
        const Eigen::Matrix4d g_mk2 = m_inv1.transpose() * g_p34;

        accumulate_matrix_pose_grad(sampled[static_cast<std::size_t>(k)], g_mk, false,
                                    cache[static_cast<std::size_t>(k)].dr,
                                    d_pose6->data() + static_cast<std::ptrdiff_t>(k) * 6);
        accumulate_matrix_pose_grad(sampled[static_cast<std::size_t>(k + 1)], g_minv1, true,
                                    cache[static_cast<std::size_t>(k + 1)].dr,
                                    d_pose6->data() + static_cast<std::ptrdiff_t>(k + 1) * 6);
        accumulate_matrix_pose_grad(sampled[static_cast<std::size_t>(k + 2)], g_mk2, false,
                                    cache[static_cast<std::size_t>(k + 2)].dr,
                                    d_pose6->data() + static_cast<std::ptrdiff_t>(k + 2) * 6);
    }
    if (count == 0)
        return 0.0;
    // Mean over triples; rescale accumulated gradients accordingly.
    if (with_grad) {
        const double inv = 1.0 / count;
        for (int k = 6 * triples_begin; k < 6 * (triples_end + 2); ++k)
            (*d_pose6)[static_cast<std::size_t>(k)] *= inv;
    }
    return cost / count;
}

struct BaProblem {
    const TrackSet *tracks;
    SampledLayout lay;
    double cx, cy;
    double sigma_max;
    double lambda_smooth;
    int width, height;

    std::vector<PoseSE3> sampled_poses;
    std::vector<double> inv_depths;
    double focal;

    // Gradient buffers (full size; the optimizer picks the free subset).
    std::vector<double> g_pose6;
    std::vector<double> g_inv_depth;
    double g_focal = 0.0;

    std::vector<std::size_t> active_tracks;
    int smooth_begin = 0, smooth_end = 0; // sampled-index range for the smoothness term

    double evaluate(bool with_grad) {
        const std::vector<PoseCache> cache = make_cache(sampled_poses, with_grad);
        if (with_grad) {
            std::fill(g_pose6.begin(), g_pose6.end(), 0.0);
            std::fill(g_inv_depth.begin(), g_inv_depth.end(), 0.0);
            g_focal = 0.0;
        }

        double repr = 0.0;
        if (!active_tracks.empty()) {
            const std::size_t blocks = 8;
            std::vector<double> partial(blocks, 0.0);
            std::vector<std::vector<double>> block_pose(blocks);
            std::vector<std::vector<double>> block_depth(blocks);
            std::vector<double> block_focal(blocks, 0.0);
            parallel_blocks(active_tracks.size(), blocks,
                            [&](std::size_t b, std::size_t begin, std::size_t end) {
                std::vector<double> *bp = nullptr;
                if (with_grad) {
                    block_pose[b].assign(g_pose6.size(), 0.0);
                    block_depth[b].assign(g_inv_depth.size(), 0.0);
                    bp = &block_pose[b];
                }
                double acc = 0.0;
                for (std::size_t q = begin; q < end; ++q) {
                    const std::size_t ti = active_tracks[q];
                    acc += track_cost_grad(tracks->tracks[ti], inv_depths[ti], lay, cache, focal,
                                           cx, cy, sigma_max, with_grad, bp,
                                           with_grad ? &block_depth[b][ti] : nullptr,
                                           with_grad ? &block_focal[b] : nullptr);
                }
                partial[b] = acc;
            });
            // Mean over the tracks active in this phase.
            const double inv_count = 1.0 / static_cast<double>(active_tracks.size());
            for (std::size_t b = 0; b < blocks; ++b) {
                repr += partial[b];
                if (!with_grad || block_pose[b].empty())
                    continue;
                for (std::size_t k = 0; k < g_pose6.size(); ++k)
                    g_pose6[k] += block_pose[b][k] * inv_count;
                for (std::size_t k = 0; k < g_inv_depth.size(); ++k)
                    g_inv_depth[k] += block_depth[b][k] * inv_count;
                g_focal += block_focal[b] * inv_count;
            }
            repr *= inv_count;
        }

        std::vector<double> g_smooth;
        if (with_grad)
            g_smooth.assign(g_pose6.size(), 0.0);
        const double smooth = sampled_smoothness_grad(sampled_poses, cache, with_grad,
                                                      with_grad ? &g_smooth : nullptr,
                                                      smooth_begin, smooth_end);
        if (with_grad)
            for (std::size_t k = 0; k < g_pose6.size(); ++k)
                g_pose6[k] += lambda_smooth * g_smooth[k];
        return repr + lambda_smooth * smooth;
    }
};

// Free-variable bookkeeping for one optimization phase.
struct VariableSet {
    std::vector<int> pose_indices;        // sampled indices with free poses
    std::vector<std::size_t> depth_indices; // track indices with free inverse depths
    bool optimize_focal = false;

    std::size_t size() const {
        return pose_indices.size() * 6 + depth_indices.size() + (optimize_focal ? 1 : 0);
    }

    void gather(const BaProblem &p, std::vector<double> &x) const {
        x.resize(size());
        std::size_t o = 0;
        for (int k : pose_indices) {
            const PoseSE3 &pose = p.sampled_poses[static_cast<std::size_t>(k)];
            for (int m = 0; m < 3; ++m)
                x[o++] = pose.axis_angle[m];
            for (int m = 0; m < 3; ++m)
                x[o++] = pose.translation[m];
        }
        for (std::size_t t : depth_indices)
            x[o++] = p.inv_depths[t];
        if (optimize_focal)
            x[o++] = p.focal;
    }

    void scatter(BaProblem &p, const std::vector<double> &x) const {
        std::size_t o = 0;
        for (int k : pose_indices) {
            PoseSE3 &pose = p.sampled_poses[static_cast<std::size_t>(k)];
            for (int m = 0; m < 3; ++m)
                pose.axis_angle[m] = x[o++];
            for (int m = 0; m < 3; ++m)
                pose.translation[m] = x[o++];
        }
        for (std::size_t t : depth_indices)
            p.inv_depths[t] = std::max(x[o++], 1e-4);
        if (optimize_focal)
            p.focal = std::max(x[o++], 1e-2);
    }

    void gather_grad(const BaProblem &p, std::vector<double> &g) const {
        g.resize(size());
        std::size_t o = 0;
        for (int k : pose_indices)
            for (int m = 0; m < 6; ++m)
                g[o++] = p.g_pose6[static_cast<std::size_t>(k) * 6 + static_cast<std::size_t>(m)];
        for (std::size_t t : depth_indices)
            g[o++] = p.g_inv_depth[t];
        if (optimize_focal)
            g[o++] = p.g_focal;
    }
};

// Adam loop with the 10x divergence guard; on divergence the phase's
// variables are rolled back to their starting values.
void optimize_phase(BaProblem &problem, const VariableSet &vars, int steps, double step_size) {
    if (vars.size() == 0 || steps <= 0)
        return;
    std::vector<double> x, g;
    vars.gather(problem, x);
    const std::vector<double> x0 = x;
    AdamOptimizer adam(x.size(), step_size);

    const double start_loss = problem.evaluate(false);
    for (int it = 0; it < steps; ++it) {
        const double loss = problem.evaluate(true);
        if (!std::isfinite(loss))
            throw numerical_error("refine_trajectory: non-finite bundle adjustment loss");
        if (loss > 10.0 * std::max(start_loss, 1e-12)) {
            vars.scatter(problem, x0);
            return;
        }
        vars.gather_grad(problem, g);
        adam.update(x, g);
        vars.scatter(problem, x);
    }
}

} // namespace

double reprojection_cost(const TrackSet &tracks, const std::vector<PoseSE3> &poses, double focal,
                         int width, int height, double sigma_max) {
    if (tracks.tracks.empty())
        return 0.0;
    // Direct evaluation against the full trajectory: every frame is its own
    // "sampled" pose with an identity attachment.
    SampledLayout lay;
    lay.sampled.resize(poses.size());
    lay.parent.resize(poses.size());
    lay.attach.resize(poses.size());
    for (std::size_t j = 0; j < poses.size(); ++j) {
        lay.sampled[j] = static_cast<int>(j);
        lay.parent[j] = static_cast<int>(j);
        lay.attach[j] = PoseSE3::identity();
    }
    const std::vector<PoseCache> cache = make_cache(poses, false);
    const Pinhole cam{focal, width, height};
    double acc = 0.0;
    for (const Track &tr : tracks.tracks)
        acc += track_cost_grad(tr, tr.inv_depth, lay, cache, focal, cam.cx(), cam.cy(), sigma_max,
                               false, nullptr, nullptr, nullptr);
    return acc / static_cast<double>(tracks.tracks.size());
}

double smoothness_cost(const std::vector<PoseSE3> &poses) {
    if (poses.size() < 3)
        throw input_error("smoothness_cost: need at least 3 poses");
    double acc = 0.0;
    for (std::size_t i = 0; i + 2 < poses.size(); ++i) {
        const PoseSE3 d0 = compose(invert(poses[i]), poses[i + 1]);
        const PoseSE3 d1 = compose(invert(poses[i + 1]), poses[i + 2]);
        const Eigen::Matrix4d s = invert(d0).matrix() * d1.matrix();
        acc += (s - Eigen::Matrix4d::Identity()).cwiseAbs().sum();
    }
    return acc / static_cast<double>(poses.size() - 2);
}

std::vector<PoseSE3> interpolate_refined_poses(const std::vector<PoseSE3> &initial_poses,
                                               const std::vector<int> &sampled_indices,
                                               const std::vector<PoseSE3> &refined_sampled) {
    if (sampled_indices.size() != refined_sampled.size() || sampled_indices.empty())
        throw input_error("interpolate_refined_poses: sampled index/pose mismatch");

    auto bit_equal = [](const PoseSE3 &a, const PoseSE3 &b) {
        return a.axis_angle == b.axis_angle && a.translation == b.translation;
    };

    std::vector<PoseSE3> out = initial_poses;
    for (std::size_t k = 0; k < sampled_indices.size(); ++k) {
        const int s0 = sampled_indices[k];
        out[static_cast<std::size_t>(s0)] = refined_sampled[k];
        const bool last = k + 1 == sampled_indices.size();
        const int s1 = last ? static_cast<int>(initial_poses.size()) - 1 : sampled_indices[k + 1];

        const PoseSE3 &init0 = initial_poses[static_cast<std::size_t>(s0)];
        if (!last && bit_equal(refined_sampled[k], init0) &&
            bit_equal(refined_sampled[k + 1], initial_poses[static_cast<std::size_t>(s1)]))
            continue; // untouched segment: keep the initial poses verbatim
        if (last && bit_equal(refined_sampled[k], init0))
            continue;

        // Predicted interior poses: refined anchor composed with the initial
        // relative motion; the endpoint discrepancy is spread linearly in the
        // Lie algebra.
        Eigen::Matrix<double, 6, 1> residual = Eigen::Matrix<double, 6, 1>::Zero();
        if (!last) {
            const PoseSE3 pred_end = compose(refined_sampled[k],
                                             compose(invert(init0), initial_poses[static_cast<std::size_t>(s1)]));
            residual = se3_log(compose(invert(pred_end), refined_sampled[k + 1]));
        }
        for (int j = s0 + 1; j <= s1; ++j) {
            if (!last && j == s1)
                break; // owned by the next anchor
            const PoseSE3 pred = compose(refined_sampled[k],
                                         compose(invert(init0), initial_poses[static_cast<std::size_t>(j)]));
            if (last) {
                out[static_cast<std::size_t>(j)] = pred;
                continue;
            }
            const double alpha = static_cast<double>(j - s0) / static_cast<double>(s1 - s0);
            out[static_cast<std::size_t>(j)] = compose(pred, se3_exp(alpha * residual));
        }
    }
    return out;
}

RefinedTrajectory refine_trajectory(const std::vector<PoseSE3> &initial_poses, double focal,
                                    const std::vector<FlowMap> &flows_fwd,
                                    const std::vector<UncertaintyMap> &sigmas,
                                    const std::vector<DepthMap> &depths,
                                    const RefineConfig &config) {
    config.validate();
    const std::size_t n = initial_poses.size();
    if (n < 2 || depths.size() != n)
        throw input_error("refine_trajectory: trajectory/raster length mismatch");

    const int h = depths.front().height;
    const int w = depths.front().width;

    BaProblem problem;
    TrackSet tracks = build_tracks(flows_fwd, sigmas, depths, config);
    problem.tracks = &tracks;
    problem.lay = make_layout(initial_poses, config.stride);
    problem.cx = 0.5 * w;
    problem.cy = 0.5 * h;
    problem.width = w;
    problem.height = h;
    problem.sigma_max = config.sigma_max;
    problem.lambda_smooth = config.lambda_smooth;
    problem.focal = focal;
    problem.inv_depths.resize(tracks.tracks.size());
    for (std::size_t t = 0; t < tracks.tracks.size(); ++t)
        problem.inv_depths[t] = tracks.tracks[t].inv_depth;

    const int n_sampled = static_cast<int>(problem.lay.sampled.size());
    problem.sampled_poses.resize(static_cast<std::size_t>(n_sampled));
    for (int k = 0; k < n_sampled; ++k)
        problem.sampled_poses[static_cast<std::size_t>(k)] =
            initial_poses[static_cast<std::size_t>(problem.lay.sampled[static_cast<std::size_t>(k)])];
    problem.g_pose6.assign(static_cast<std::size_t>(n_sampled) * 6, 0.0);
    problem.g_inv_depth.assign(tracks.tracks.size(), 0.0);

    // Track -> sampled-window assignment helpers.
    auto track_last_frame = [&](const Track &tr) {
        return tr.anchor_frame + static_cast<int>(tr.length()) - 1;
    };
    auto tracks_within = [&](int sampled_begin, int sampled_end) {
        std::vector<std::size_t> ids;
        const int frame_begin = problem.lay.sampled[static_cast<std::size_t>(sampled_begin)];
        const int frame_end_sample = problem.lay.sampled[static_cast<std::size_t>(sampled_end - 1)];
        const int frame_end = std::min<int>(static_cast<int>(n) - 1,
                                            frame_end_sample + config.stride - 1);
        for (std::size_t t = 0; t < tracks.tracks.size(); ++t)
            if (tracks.tracks[t].anchor_frame >= frame_begin &&
                track_last_frame(tracks.tracks[t]) <= frame_end)
                ids.push_back(t);
        return ids;
    };

    // Sliding-window sweep over sampled frames; previously optimized poses
    // stay frozen, frame 0 pins the gauge.
    std::vector<bool> optimized(static_cast<std::size_t>(n_sampled), false);
    optimized[0] = true;
    const int advance = config.window - config.overlap;
    for (int begin = 0;; begin += advance) {
        const int end = std::min(begin + config.window, n_sampled);
        VariableSet vars;
        for (int k = begin; k < end; ++k)
            if (!optimized[static_cast<std::size_t>(k)])
                vars.pose_indices.push_back(k);
        vars.depth_indices = tracks_within(begin, end);
        problem.active_tracks = vars.depth_indices;
        problem.smooth_begin = begin;
        problem.smooth_end = end;
        if (!vars.pose_indices.empty())
            optimize_phase(problem, vars, config.steps_per_window, config.step_size);
        for (int k : vars.pose_indices)
            optimized[static_cast<std::size_t>(k)] = true;
        if (end >= n_sampled)
            break;
    }

    // Global pass: all poses (gauge fixed), all inverse depths, the focal.
    {
        VariableSet vars;
        for (int k = 1; k < n_sampled; ++k)
            vars.pose_indices.push_back(k);
        vars.depth_indices.resize(tracks.tracks.size());
        for (std::size_t t = 0; t < tracks.tracks.size(); ++t)
            vars.depth_indices[t] = t;
        vars.optimize_focal = true;
        problem.active_tracks = vars.depth_indices;
        problem.smooth_begin = 0;
        problem.smooth_end = n_sampled;

        const std::vector<PoseSE3> pre_global = problem.sampled_poses;
        const std::vector<double> pre_depths = problem.inv_depths;
        const double pre_focal = problem.focal;
        const double before = problem.evaluate(false);
        optimize_phase(problem, vars, config.global_steps, config.step_size);
        if (problem.evaluate(false) > before) {
            problem.sampled_poses = pre_global;
            problem.inv_depths = pre_depths;
            problem.focal = pre_focal;
        }
    }

    RefinedTrajectory out;
    out.focal = problem.focal;
    out.inv_depths = problem.inv_depths;
    out.poses = interpolate_refined_poses(initial_poses, problem.lay.sampled, problem.sampled_poses);
    return out;
}

} // namespace anycam
