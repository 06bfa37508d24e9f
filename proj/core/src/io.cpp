#include "anycam/io.hpp"

#include "anycam/errors.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace anycam {

namespace {

constexpr char kRasterMagic[4] = {'A', 'C', 'R', 'S'};
constexpr std::uint16_t kRasterVersion = 1;
constexpr std::uint16_t kDtypeF32 = 0;

template <typename T> void write_le(std::ostream &out, T value) {
    out.write(reinterpret_cast<const char *>(&value), sizeof(T));
}

template <typename T> T read_le(std::istream &in, const std::string &path, const char *what) {
    T value{};
    in.read(reinterpret_cast<char *>(&value), sizeof(T));
    if (!in)
        throw input_error(path + ": truncated raster header (" + what + ")");
    return value;
}

} // namespace

void write_raster(const std::string &path, const RasterData &raster) {
    if (raster.channels < 1 || raster.height < 1 || raster.width < 1 ||
        raster.values.size() != raster.plane() * raster.channels)
        throw input_error("write_raster: payload does not match declared dimensions");

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw input_error("cannot open for writing: " + tmp);
        out.write(kRasterMagic, 4);
        write_le<std::uint16_t>(out, kRasterVersion);
        write_le<std::uint16_t>(out, kDtypeF32);
        write_le<std::uint16_t>(out, static_cast<std::uint16_t>(raster.channels));
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(raster.height));
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(raster.width));
        out.write(reinterpret_cast<const char *>(raster.values.data()),
                  static_cast<std::streamsize>(raster.values.size() * sizeof(float)));
        if (!out)
            throw input_error("raster write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

RasterData read_raster(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw input_error("cannot open raster file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kRasterMagic, 4) != 0)
        throw input_error(path + ": wrong magic bytes (expected ACRS)");
    const auto version = read_le<std::uint16_t>(in, path, "version");
    if (version != kRasterVersion)
        throw input_error(path + ": unsupported raster version " + std::to_string(version));
    const auto dtype = read_le<std::uint16_t>(in, path, "dtype");
    if (dtype != kDtypeF32)
        throw input_error(path + ": unsupported dtype tag " + std::to_string(dtype));

    RasterData raster;
    raster.channels = read_le<std::uint16_t>(in, path, "channels");
    raster.height = static_cast<int>(read_le<std::uint32_t>(in, path, "height"));
    raster.width = static_cast<int>(read_le<std::uint32_t>(in, path, "width"));
    if (raster.channels < 1 || raster.height < 1 || raster.width < 1)
        throw input_error(path + ": degenerate raster dimensions");

    raster.values.resize(raster.plane() * raster.channels);
    in.read(reinterpret_cast<char *>(raster.values.data()),
            static_cast<std::streamsize>(raster.values.size() * sizeof(float)));
    if (!in)
        throw input_error(path + ": truncated raster payload");
    return raster;
}

RasterData raster_from_depth(const DepthMap &depth) {
    RasterData r;
    r.channels = 1;
    r.height = depth.height;
    r.width = depth.width;
    r.values.assign(depth.values.begin(), depth.values.end());
    return r;
}

RasterData raster_from_flow(const FlowMap &flow) {
    RasterData r;
    r.channels = 2;
    r.height = flow.height;
    r.width = flow.width;
    r.values.reserve(2 * r.plane());
    r.values.assign(flow.du.begin(), flow.du.end());
    r.values.insert(r.values.end(), flow.dv.begin(), flow.dv.end());
    return r;
}

RasterData raster_from_sigma(const UncertaintyMap &sigma) {
    RasterData r;
    r.channels = 1;
    r.height = sigma.height;
    r.width = sigma.width;
    r.values.assign(sigma.sigma.begin(), sigma.sigma.end());
    return r;
}

RasterData raster_from_mask(const PixelMask &mask) {
    RasterData r;
    r.channels = 1;
    r.height = mask.height;
    r.width = mask.width;
    r.values.assign(mask.values.begin(), mask.values.end());
    return r;
}

DepthMap depth_from_raster(const RasterData &raster) {
    if (raster.channels != 1)
        throw input_error("depth raster must have 1 channel");
    DepthMap d;
    d.height = raster.height;
    d.width = raster.width;
    d.values.assign(raster.values.begin(), raster.values.end());
    d.validate();
    return d;
}

FlowMap flow_from_raster(const RasterData &raster) {
    if (raster.channels != 2)
        throw input_error("flow raster must have 2 channels");
    FlowMap f;
    f.height = raster.height;
    f.width = raster.width;
    f.du.assign(raster.values.begin(), raster.values.begin() + static_cast<std::ptrdiff_t>(raster.plane()));
    f.dv.assign(raster.values.begin() + static_cast<std::ptrdiff_t>(raster.plane()), raster.values.end());
    f.validate();
    return f;
}

UncertaintyMap sigma_from_raster(const RasterData &raster) {
    if (raster.channels != 1)
        throw input_error("uncertainty raster must have 1 channel");
    UncertaintyMap s;
    s.height = raster.height;
    s.width = raster.width;
    s.sigma.assign(raster.values.begin(), raster.values.end());
    return s;
}

Eigen::Vector4d quaternion_from_axis_angle(const Eigen::Vector3d &axis_angle) {
    const double angle = axis_angle.norm();
    Eigen::Vector4d q(0.0, 0.0, 0.0, 1.0);
    if (angle < 1e-14)
        return q;
    const double half = 0.5 * angle;
    const Eigen::Vector3d axis = axis_angle / angle;
    q.head<3>() = std::sin(half) * axis;
    q[3] = std::cos(half);
    return q;
}

Eigen::Vector3d axis_angle_from_quaternion(const Eigen::Vector4d &quat) {
    Eigen::Vector4d q = quat;
    if (q[3] < 0.0)
        q = -q; // canonical hemisphere keeps the angle in [0, pi]
    const double v_norm = q.head<3>().norm();
    if (v_norm < 1e-14)
        return Eigen::Vector3d::Zero();
    const double angle = 2.0 * std::atan2(v_norm, q[3]);
    return (angle / v_norm) * q.head<3>();
}

void write_trajectory(const std::string &path, const TrajectoryData &traj) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out)
            throw input_error("cannot open for writing: " + tmp);
        out << "# trajectory index tx ty tz qx qy qz qw (camera-to-world)\n";
        if (traj.focal > 0.0) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.9e", traj.focal);
            out << "# focal " << buf << "\n";
        }
        if (traj.schedule_m > 0)
            out << "# schedule " << traj.schedule_m << " " << traj.schedule_f_min << " "
                << traj.schedule_f_max << "\n";
        for (std::size_t i = 0; i < traj.poses.size(); ++i) {
            const Eigen::Vector3d &t = traj.poses[i].translation;
            const Eigen::Vector4d q = quaternion_from_axis_angle(traj.poses[i].axis_angle);
            char line[256];
            std::snprintf(line, sizeof(line), "%zu %.9e %.9e %.9e %.9e %.9e %.9e %.9e\n", i, t.x(),
                          t.y(), t.z(), q[0], q[1], q[2], q[3]);
            out << line;
        }
        if (!out)
            throw input_error("trajectory write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

TrajectoryData read_trajectory(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw input_error("cannot open trajectory file: " + path);

    TrajectoryData traj;
    std::string line;
    long expected_index = 0;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty())
            continue;
        if (line[0] == '#') {
            std::istringstream hdr(line.substr(1));
            std::string key;
            hdr >> key;
            if (key == "focal")
                hdr >> traj.focal;
            else if (key == "schedule")
                hdr >> traj.schedule_m >> traj.schedule_f_min >> traj.schedule_f_max;
            continue;
        }
        std::istringstream ls(line);
        long index = 0;
        double tx, ty, tz, qx, qy, qz, qw;
        if (!(ls >> index >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
            throw input_error(path + ":" + std::to_string(line_number) + ": malformed trajectory line");
        if (index != expected_index)
            throw input_error(path + ":" + std::to_string(line_number) +
                              ": non-monotone frame index " + std::to_string(index));
        ++expected_index;
        const Eigen::Vector4d q(qx, qy, qz, qw);
        if (std::abs(q.norm() - 1.0) > 1e-6)
            throw input_error(path + ":" + std::to_string(line_number) +
                              ": quaternion is not unit length");
        PoseSE3 pose;
        pose.axis_angle = axis_angle_from_quaternion(q);
        pose.translation = {tx, ty, tz};
        traj.poses.push_back(pose);
    }
    if (traj.poses.empty())
        throw input_error(path + ": trajectory contains no poses");
    return traj;
}

namespace {

double parse_double(const std::string &value, const std::string &key, int line_number) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size())
            throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception &) {
        throw input_error("config line " + std::to_string(line_number) + ": bad numeric value for " + key);
    }
}

int parse_int(const std::string &value, const std::string &key, int line_number) {
    const double v = parse_double(value, key, line_number);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
        throw input_error("config line " + std::to_string(line_number) + ": " + key + " must be an integer");
    return i;
}

std::string trim(const std::string &s) {
    const auto begin = s.find_first_not_of(" \t\r");
    const auto end = s.find_last_not_of(" \t\r");
    if (begin == std::string::npos)
        return "";
    return s.substr(begin, end - begin + 1);
}

} // namespace

void apply_config_line(RunConfig &c, const std::string &raw, int line_number) {
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#')
        return;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
        throw input_error("config line " + std::to_string(line_number) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    auto d = [&] { return parse_double(value, key, line_number); };
    auto i = [&] { return parse_int(value, key, line_number); };

    if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_double(value, key, line_number));
    else if (key == "schedule_m") c.schedule_m = static_cast<std::size_t>(i());
    else if (key == "schedule_f_min_scale") c.schedule_f_min_scale = d();
    else if (key == "schedule_f_max_scale") c.schedule_f_max_scale = d();
    else if (key == "lambda_flow") c.lambda_flow = d();
    else if (key == "lambda_consistency") c.lambda_consistency = d();
    else if (key == "lambda_intr") c.lambda_intr = d();
    else if (key == "softmax_temperature") c.softmax_temperature = d();
    else if (key == "fit_step_size") c.fit_step_size = d();
    else if (key == "fit_max_iterations") c.fit_max_iterations = i();
    else if (key == "fit_sigma_stride") c.fit_sigma_stride = i();
    else if (key == "fit_convergence_tol") c.fit_convergence_tol = d();
    else if (key == "refine_grid") c.refine_grid = i();
    else if (key == "refine_track_length") c.refine_track_length = i();
    else if (key == "refine_stride") c.refine_stride = i();
    else if (key == "refine_window") c.refine_window = i();
    else if (key == "refine_overlap") c.refine_overlap = i();
    else if (key == "refine_steps_per_window") c.refine_steps_per_window = i();
    else if (key == "refine_global_steps") c.refine_global_steps = i();
    else if (key == "refine_step_size") c.refine_step_size = d();
    else if (key == "refine_sigma_max") c.refine_sigma_max = d();
    else if (key == "refine_lambda_smooth") c.refine_lambda_smooth = d();
    else if (key == "eval_alignment") c.eval_alignment = value;
    else if (key == "eval_rpe_delta") c.eval_rpe_delta = i();
    else if (key == "synth_path") c.synth_path = value;
    else if (key == "synth_frames") c.synth_frames = i();
    else if (key == "synth_width") c.synth_width = i();
    else if (key == "synth_height") c.synth_height = i();
    else if (key == "synth_focal_scale") c.synth_focal_scale = d();
    else if (key == "synth_plane_depth") c.synth_plane_depth = d();
    else if (key == "synth_boxes") c.synth_boxes = i();
    else if (key == "synth_movers") c.synth_movers = i();
    else if (key == "synth_mover_coverage") c.synth_mover_coverage = d();
    else if (key == "synth_mover_speed") c.synth_mover_speed = d();
    else if (key == "synth_rotation_deg_per_frame") c.synth_rotation_deg_per_frame = d();
    else if (key == "synth_translation_per_frame") c.synth_translation_per_frame = d();
    else if (key == "synth_flow_noise") c.synth_flow_noise = d();
    else if (key == "synth_depth_noise") c.synth_depth_noise = d();
    else if (key == "model_feature_dim") c.model_feature_dim = i();
    else if (key == "model_attention_layers") c.model_attention_layers = i();
    else if (key == "model_attention_heads") c.model_attention_heads = i();
    else if (key == "model_patch_stride") c.model_patch_stride = i();
    else if (key == "model_m") c.model_m = i();
    else if (key == "model_p_drop") c.model_p_drop = d();
    else if (key == "model_weight_decay_pose_tokens") c.model_weight_decay_pose_tokens = d();
    else if (key == "model_max_pairs") c.model_max_pairs = i();
    else if (key == "train_corpus_sequences") c.train_corpus_sequences = i();
    else if (key == "train_stage1_steps") c.train_stage1_steps = i();
    else if (key == "train_stage2_steps") c.train_stage2_steps = i();
    else if (key == "train_stage1_len") c.train_stage1_len = i();
    else if (key == "train_stage2_len") c.train_stage2_len = i();
    else if (key == "train_batch") c.train_batch = i();
    else if (key == "train_step_size") c.train_step_size = d();
    else if (key == "train_step_size_after_drop") c.train_step_size_after_drop = d();
    else if (key == "train_step_drop") c.train_step_drop = i();
    else
        throw input_error("config line " + std::to_string(line_number) + ": unknown key '" + key + "'");
}

RunConfig parse_run_config(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw input_error("cannot open config file: " + path);
    RunConfig config;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line))
        apply_config_line(config, line, ++line_number);
    return config;
}

std::string frame_filename(const std::string &prefix, int index, const std::string &suffix) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%06d%s.acrs", prefix.c_str(), index, suffix.c_str());
    return buf;
}

} // namespace anycam
