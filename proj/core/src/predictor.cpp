#include "anycam/predictor.hpp"

#include "anycam/adam.hpp"
#include "anycam/errors.hpp"
#include "anycam/flow_objective.hpp"
#include "anycam/parallel.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <random>

namespace anycam {

void ModelConfig::validate() const {
    if (feature_dim < 2 || attention_layers < 1 || attention_heads < 1 || patch_stride < 1 ||
        m < 2 || max_pairs < 1 || height < 4 || width < 4)
        throw input_error("model config dimensions must be positive");
    if (feature_dim % attention_heads != 0)
        throw input_error("feature_dim must be divisible by attention_heads");
    if (p_drop < 0.0 || p_drop >= 1.0)
        throw input_error("p_drop must lie in [0, 1)");
    if (weight_decay_pose_tokens < 0.0)
        throw input_error("pose-token weight decay must be nonnegative");
}

TokenState apply_pose_token_dropout(const TokenState &tokens, double p_drop, std::uint64_t seed) {
    if (p_drop < 0.0 || p_drop > 1.0)
        throw input_error("p_drop must lie in [0, 1]");
    TokenState out = tokens;
    if (p_drop == 0.0)
        return out;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Eigen::VectorXd &tok : out.pose_tokens)
        for (Eigen::Index i = 0; i < tok.size(); ++i)
            if (unit(rng) < p_drop)
                tok[i] = 0.0;
    return out;
}

namespace {

struct EncoderDims {
    int gh = 0, gw = 0;
    int features() const { return 3 * gh * gw; }
};

EncoderDims encoder_dims(const ModelConfig &cfg) {
    EncoderDims d;
    d.gh = (cfg.height + cfg.patch_stride - 1) / cfg.patch_stride;
    d.gw = (cfg.width + cfg.patch_stride - 1) / cfg.patch_stride;
    return d;
}

// Patch-pooled features per frame pair: mean flow (scaled by image size) and
// mean log depth, channel-planar.
Eigen::VectorXd pool_pair(const FrameObservations &frame, const ModelConfig &cfg,
                          const EncoderDims &dims) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dims.features());
    const int plane = dims.gh * dims.gw;
    for (int pi = 0; pi < dims.gh; ++pi) {
        for (int pj = 0; pj < dims.gw; ++pj) {
            const int i0 = pi * cfg.patch_stride;
            const int j0 = pj * cfg.patch_stride;
            const int i1 = std::min(cfg.height, i0 + cfg.patch_stride);
            const int j1 = std::min(cfg.width, j0 + cfg.patch_stride);
            double su = 0.0, sv = 0.0, sd = 0.0;
            int count = 0;
            for (int i = i0; i < i1; ++i) {
                for (int j = j0; j < j1; ++j) {
                    su += frame.flow_fwd.u_at(i, j);
                    sv += frame.flow_fwd.v_at(i, j);
                    sd += std::log(frame.depth.at(i, j));
                    ++count;
                }
            }
            const int cell = pi * dims.gw + pj;
            out[cell] = su / (count * cfg.width);
            out[plane + cell] = sv / (count * cfg.height);
            out[2 * plane + cell] = sd / count;
        }
    }
    return out;
}

struct StackCache {
    nn::Linear::Cache enc_cache;
    std::vector<nn::TransformerBlock::Cache> block_caches;
    Eigen::MatrixXd tokens; // post-attention, feature_dim x (pairs + 1)
};

PoseSE3 pose_from_column(const Eigen::MatrixXd &m, Eigen::Index col) {
    PoseSE3 p;
    p.axis_angle = {m(0, col), m(1, col), m(2, col)};
    p.translation = {m(3, col), m(4, col), m(5, col)};
    return p;
}

} // namespace

nn::ParamRegistry PredictorModel::params() {
    nn::ParamRegistry reg;
    encoder_.register_params(reg);
    reg.add(&pos_embed_);
    reg.add(&seq_token0_);
    for (auto &b : blocks_)
        b.register_params(reg);
    for (auto &h : pose_heads_)
        h.register_params(reg);
    for (auto &h : sigma_heads_)
        h.register_params(reg);
    seq_head_.register_params(reg);
    return reg;
}

void PredictorModel::swap_candidates(std::size_t a, std::size_t b) {
    if (a >= pose_heads_.size() || b >= pose_heads_.size())
        throw input_error("swap_candidates: index out of range");
    std::swap(pose_heads_[a], pose_heads_[b]);
    std::swap(sigma_heads_[a], sigma_heads_[b]);
    std::swap(schedule_.candidates[a], schedule_.candidates[b]);
}

PredictorModel::PredictorModel(const ModelConfig &config, const FocalSchedule &schedule,
                               std::uint64_t seed)
    : config_(config), schedule_(schedule) {
    config_.validate();
    if (static_cast<int>(schedule_.candidates.size()) != config_.m)
        throw input_error("schedule size must equal the model's candidate head count");

    const EncoderDims dims = encoder_dims(config_);
    const SigmaGrid proto = SigmaGrid::make(config_.height, config_.width, config_.patch_stride);
    sigma_cells_ = proto.gh * proto.gw;

    const int d = config_.feature_dim;
    std::mt19937_64 rng(seed);

    encoder_ = nn::Linear("encoder", dims.features(), d);
    pos_embed_ = nn::Tensor("pos_embed", d, config_.max_pairs);
    seq_token0_ = nn::Tensor("seq_token0", d, 1);
    blocks_.clear();
    for (int l = 0; l < config_.attention_layers; ++l)
        blocks_.emplace_back("block" + std::to_string(l), d, config_.attention_heads);
    pose_heads_.clear();
    sigma_heads_.clear();
    for (int k = 0; k < config_.m; ++k) {
        pose_heads_.emplace_back("pose_head" + std::to_string(k), d, d, 6);
        sigma_heads_.emplace_back("sigma_head" + std::to_string(k), d, d, sigma_cells_);
    }
    seq_head_ = nn::Mlp("seq_head", d, d, config_.m);

    const double scale = 0.05;
    encoder_.init(rng, scale);
    std::normal_distribution<double> dist(0.0, scale);
    for (Eigen::Index i = 0; i < pos_embed_.value.size(); ++i)
        pos_embed_.value.data()[i] = dist(rng);
    for (Eigen::Index i = 0; i < seq_token0_.value.size(); ++i)
        seq_token0_.value.data()[i] = dist(rng);
    for (auto &b : blocks_)
        b.init(rng, scale);
    for (int k = 0; k < config_.m; ++k) {
        // Zero-initialized output layers predict the identity pose and sigma 1.
        pose_heads_[static_cast<std::size_t>(k)].fc1.init(rng, scale);
        pose_heads_[static_cast<std::size_t>(k)].fc2.init_zero();
        sigma_heads_[static_cast<std::size_t>(k)].fc1.init(rng, scale);
        sigma_heads_[static_cast<std::size_t>(k)].fc2.init_zero();
    }
    seq_head_.init(rng, scale);
}

namespace {

StackCache run_stack(const PredictorModel &model, const nn::Linear &encoder,
                     const nn::Tensor &pos_embed, const nn::Tensor &seq_token0,
                     const std::vector<nn::TransformerBlock> &blocks,
                     const std::vector<FrameObservations> &obs) {
    const ModelConfig &cfg = model.config();
    const EncoderDims dims = encoder_dims(cfg);
    const int pairs = static_cast<int>(obs.size()) - 1;

    Eigen::MatrixXd enc_in(dims.features(), pairs);
    for (int i = 0; i < pairs; ++i)
        enc_in.col(i) = pool_pair(obs[static_cast<std::size_t>(i)], cfg, dims);

    StackCache cache;
    Eigen::MatrixXd enc_out = encoder.forward(enc_in, cache.enc_cache);
    Eigen::MatrixXd tokens(cfg.feature_dim, pairs + 1);
    for (int i = 0; i < pairs; ++i)
        tokens.col(i) = enc_out.col(i) + pos_embed.value.col(i);
    tokens.col(pairs) = seq_token0.value.col(0);

    cache.block_caches.resize(blocks.size());
    for (std::size_t l = 0; l < blocks.size(); ++l)
        tokens = blocks[l].forward(tokens, cache.block_caches[l]);
    cache.tokens = std::move(tokens);
    return cache;
}

void validate_forward_input(const PredictorModel &model, const std::vector<FrameObservations> &obs) {
    validate_observations(obs);
    const ModelConfig &cfg = model.config();
    if (obs.front().depth.height != cfg.height || obs.front().depth.width != cfg.width)
        throw input_error("observation rasters do not match the model's raster dimensions");
    if (static_cast<int>(obs.size()) - 1 > cfg.max_pairs)
        throw input_error("sequence has more pairs than the model's embedding capacity");
}

} // namespace

PredictionResult PredictorModel::forward(const std::vector<FrameObservations> &obs) const {
    validate_forward_input(*this, obs);
    const int pairs = static_cast<int>(obs.size()) - 1;

    StackCache cache = run_stack(*this, encoder_, pos_embed_, seq_token0_, blocks_, obs);
    const Eigen::MatrixXd pose_token_mat = cache.tokens.leftCols(pairs);

    PredictionResult result;
    result.tokens.pose_tokens.reserve(static_cast<std::size_t>(pairs));
    for (int i = 0; i < pairs; ++i)
        result.tokens.pose_tokens.push_back(pose_token_mat.col(i));
    result.tokens.sequence_token = cache.tokens.col(pairs);

    result.bank.resize(static_cast<std::size_t>(config_.m));
    parallel_for_each(static_cast<std::size_t>(config_.m), [&](std::size_t k) {
        nn::Mlp::Cache cp, cs;
        // Heads read the (undropped) pose tokens; evaluation mode has no dropout.
        const Eigen::MatrixXd pose6 = pose_heads_[k].forward(pose_token_mat, cp);
        const Eigen::MatrixXd sigma_raw = sigma_heads_[k].forward(pose_token_mat, cs);

        CandidateEstimate &est = result.bank[k];
        est.focal = schedule_.candidates[k];
        const Pinhole cam{est.focal, config_.width, config_.height};
        SigmaGrid grid = SigmaGrid::make(config_.height, config_.width, config_.patch_stride);
        est.poses.resize(static_cast<std::size_t>(pairs));
        est.sigmas.resize(static_cast<std::size_t>(pairs));
        double flow_loss = 0.0;
        for (int i = 0; i < pairs; ++i) {
            est.poses[static_cast<std::size_t>(i)] = pose_from_column(pose6, i);
            std::copy_n(sigma_raw.col(i).data(), grid.raw.size(), grid.raw.begin());
            est.sigmas[static_cast<std::size_t>(i)] = grid.upsample();
            flow_loss += pair_flow_objective(est.poses[static_cast<std::size_t>(i)], grid,
                                             obs[static_cast<std::size_t>(i)].depth,
                                             obs[static_cast<std::size_t>(i)].flow_fwd, cam, false)
                             .loss;
        }
        est.flow_loss = flow_loss;
    });

    nn::Mlp::Cache cseq;
    const Eigen::MatrixXd logits = seq_head_.forward(result.tokens.sequence_token, cseq);
    std::vector<double> logit_vec(logits.data(), logits.data() + logits.size());
    result.likelihood.probabilities = nn::softmax(logit_vec);
    return result;
}

double PredictorModel::training_loss(const std::vector<FrameObservations> &obs,
                                     const LossWeights &weights, double temperature, double p_drop,
                                     std::uint64_t dropout_seed, bool with_grad) {
    validate_forward_input(*this, obs);
    weights.validate();
    const int pairs = static_cast<int>(obs.size()) - 1;
    const std::vector<FrameObservations> obs_rev = reverse_observations(obs);

    StackCache cache_a = run_stack(*this, encoder_, pos_embed_, seq_token0_, blocks_, obs);
    StackCache cache_b = run_stack(*this, encoder_, pos_embed_, seq_token0_, blocks_, obs_rev);
    const Eigen::MatrixXd tokens_a = cache_a.tokens.leftCols(pairs);
    const Eigen::MatrixXd tokens_b = cache_b.tokens.leftCols(pairs);

    // Dropout masks, one Bernoulli draw per pose-token element and pass.
    Eigen::MatrixXd mask_a = Eigen::MatrixXd::Ones(tokens_a.rows(), tokens_a.cols());
    Eigen::MatrixXd mask_b = mask_a;
    if (p_drop > 0.0) {
        std::mt19937_64 rng(dropout_seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (Eigen::Index c = 0; c < mask_a.cols(); ++c)
            for (Eigen::Index r = 0; r < mask_a.rows(); ++r)
                mask_a(r, c) = unit(rng) < p_drop ? 0.0 : 1.0;
        for (Eigen::Index c = 0; c < mask_b.cols(); ++c)
            for (Eigen::Index r = 0; r < mask_b.rows(); ++r)
                mask_b(r, c) = unit(rng) < p_drop ? 0.0 : 1.0;
    }
    const Eigen::MatrixXd dropped_a = tokens_a.cwiseProduct(mask_a);
    const Eigen::MatrixXd dropped_b = tokens_b.cwiseProduct(mask_b);

    const std::size_t m = static_cast<std::size_t>(config_.m);
    std::vector<double> flow_fwd_loss(m, 0.0), flow_rev_loss(m, 0.0), cons_loss(m, 0.0);
    std::vector<Eigen::MatrixXd> d_dropped_a(m), d_dropped_b(m), d_tokens_a_sigma(m),
        d_tokens_b_sigma(m);

    parallel_for_each(m, [&](std::size_t k) {
        nn::Mlp::Cache cpa, cpb, csa, csb;
        nn::Mlp &pose_head = pose_heads_[k];
        nn::Mlp &sigma_head = sigma_heads_[k];
        const Eigen::MatrixXd pose6_a = pose_head.forward(dropped_a, cpa);
        const Eigen::MatrixXd pose6_b = pose_head.forward(dropped_b, cpb);
        const Eigen::MatrixXd sig_a = sigma_head.forward(tokens_a, csa);
        const Eigen::MatrixXd sig_b = sigma_head.forward(tokens_b, csb);

        const Pinhole cam{schedule_.candidates[k], config_.width, config_.height};
        SigmaGrid grid = SigmaGrid::make(config_.height, config_.width, config_.patch_stride);

        Eigen::MatrixXd d_pose6_a = Eigen::MatrixXd::Zero(6, pairs);
        Eigen::MatrixXd d_pose6_b = Eigen::MatrixXd::Zero(6, pairs);
        Eigen::MatrixXd d_sig_a = Eigen::MatrixXd::Zero(sig_a.rows(), pairs);
        Eigen::MatrixXd d_sig_b = Eigen::MatrixXd::Zero(sig_b.rows(), pairs);

        for (int i = 0; i < pairs; ++i) {
            const PoseSE3 pose_a = pose_from_column(pose6_a, i);
            const PoseSE3 pose_b = pose_from_column(pose6_b, i);

            std::copy_n(sig_a.col(i).data(), grid.raw.size(), grid.raw.begin());
            const PairFlowResult ra = pair_flow_objective(
                pose_a, grid, obs[static_cast<std::size_t>(i)].depth,
                obs[static_cast<std::size_t>(i)].flow_fwd, cam, with_grad);
            flow_fwd_loss[k] += ra.loss;

            std::copy_n(sig_b.col(i).data(), grid.raw.size(), grid.raw.begin());
            const PairFlowResult rb = pair_flow_objective(
                pose_b, grid, obs_rev[static_cast<std::size_t>(i)].depth,
                obs_rev[static_cast<std::size_t>(i)].flow_fwd, cam, with_grad);
            flow_rev_loss[k] += rb.loss;

            // Backward pose of original pair i comes from reversed pair n-2-i.
            const int irev = pairs - 1 - i;
            const PoseSE3 pose_b_for_i = pose_from_column(pose6_b, irev);
            Eigen::Matrix<double, 6, 1> d_cons_f, d_cons_b;
            double cons;
            if (with_grad) {
                cons = consistency_term_grad(pose_a, pose_b_for_i, d_cons_f, d_cons_b);
            } else {
                cons = fwd_bwd_consistency_loss({pose_a}, {pose_b_for_i});
            }
            cons_loss[k] += cons;

            if (!with_grad)
                continue;
            for (int r = 0; r < 6; ++r) {
                d_pose6_a(r, i) += weights.lambda_flow * ra.d_pose[r] +
                                   weights.lambda_consistency * d_cons_f[r];
                d_pose6_b(r, i) += weights.lambda_flow * rb.d_pose[r];
                d_pose6_b(r, irev) += weights.lambda_consistency * d_cons_b[r];
            }
            for (Eigen::Index r = 0; r < d_sig_a.rows(); ++r) {
                d_sig_a(r, i) += weights.lambda_flow * ra.d_sigma_raw[static_cast<std::size_t>(r)];
                d_sig_b(r, i) += weights.lambda_flow * rb.d_sigma_raw[static_cast<std::size_t>(r)];
            }
        }

        if (with_grad) {
            d_dropped_a[k] = pose_head.backward(cpa, d_pose6_a);
            d_dropped_b[k] = pose_head.backward(cpb, d_pose6_b);
            d_tokens_a_sigma[k] = sigma_head.backward(csa, d_sig_a);
            d_tokens_b_sigma[k] = sigma_head.backward(csb, d_sig_b);
        }
    });

    double loss = 0.0;
    for (std::size_t k = 0; k < m; ++k)
        loss += weights.lambda_flow * (flow_fwd_loss[k] + flow_rev_loss[k]) +
                weights.lambda_consistency * cons_loss[k];

    // Intrinsics loss: the target detaches the flow losses; the predicted side
    // stops at the sequence-head input.
    const LikelihoodVector target = losses_to_target_distribution(flow_fwd_loss, temperature);
    nn::Mlp::Cache cseq;
    const Eigen::MatrixXd logits = seq_head_.forward(cache_a.tokens.col(pairs), cseq);
    std::vector<double> logit_vec(logits.data(), logits.data() + logits.size());
    const std::vector<double> predicted = nn::softmax(logit_vec);
    for (std::size_t k = 0; k < m; ++k) {
        const double t = target.probabilities[k];
        if (t > 0.0)
            loss += weights.lambda_intr * t * std::log(t / predicted[k]);
    }

    // Pose-token weight decay on both passes.
    const double wd = config_.weight_decay_pose_tokens;
    loss += 0.5 * wd * (tokens_a.squaredNorm() + tokens_b.squaredNorm());

    if (!with_grad)
        return loss;

    // Sequence-head KL gradient; the returned token gradient is dropped.
    Eigen::MatrixXd d_logits(logits.rows(), 1);
    for (std::size_t k = 0; k < m; ++k)
        d_logits(static_cast<Eigen::Index>(k), 0) =
            weights.lambda_intr * (predicted[k] - target.probabilities[k]);
    (void)seq_head_.backward(cseq, d_logits);

    // Merge candidate contributions in candidate order.
    Eigen::MatrixXd d_tok_a = Eigen::MatrixXd::Zero(tokens_a.rows(), tokens_a.cols());
    Eigen::MatrixXd d_tok_b = Eigen::MatrixXd::Zero(tokens_b.rows(), tokens_b.cols());
    for (std::size_t k = 0; k < m; ++k) {
        d_tok_a += d_dropped_a[k].cwiseProduct(mask_a) + d_tokens_a_sigma[k];
        d_tok_b += d_dropped_b[k].cwiseProduct(mask_b) + d_tokens_b_sigma[k];
    }
    d_tok_a += wd * tokens_a;
    d_tok_b += wd * tokens_b;

    auto backprop_stack = [&](StackCache &cache, const Eigen::MatrixXd &d_pose_tokens) {
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(config_.feature_dim, pairs + 1);
        d.leftCols(pairs) = d_pose_tokens;
        for (std::size_t l = blocks_.size(); l-- > 0;)
            d = blocks_[l].backward(cache.block_caches[l], d);
        for (int i = 0; i < pairs; ++i)
            pos_embed_.grad.col(i) += d.col(i);
        seq_token0_.grad.col(0) += d.col(pairs);
        (void)encoder_.backward(cache.enc_cache, d.leftCols(pairs));
    };
    backprop_stack(cache_a, d_tok_a);
    backprop_stack(cache_b, d_tok_b);
    return loss;
}

void TrainConfig::validate() const {
    if (stage1_steps < 0 || stage2_steps < 0 || stage1_len < 2 || stage2_len < 2 || batch < 1)
        throw input_error("train config counts must be positive");
    if (!(step_size > 0.0) || !(step_size_after_drop > 0.0) || !(temperature > 0.0))
        throw input_error("train config rates must be positive");
}

TrainLog train_predictor(PredictorModel &model,
                         const std::vector<std::vector<FrameObservations>> &corpus,
                         const TrainConfig &config) {
    config.validate();
    if (corpus.empty())
        throw input_error("train_predictor: empty corpus");

    const int total_steps = config.stage1_steps + config.stage2_steps;
    std::mt19937_64 rng(config.seed);

    nn::ParamRegistry reg = model.params();
    AdamOptimizer adam(reg.total_size(), config.step_size);
    std::vector<double> values = reg.gather_values();

    TrainLog log;
    log.losses.reserve(static_cast<std::size_t>(total_steps));
    for (int step = 0; step < total_steps; ++step) {
        const bool stage2 = step >= config.stage1_steps;
        const int len = stage2 ? config.stage2_len : config.stage1_len;
        if (step == config.step_drop)
            adam.set_step(config.step_size_after_drop);

        reg.zero_grad();
        double batch_loss = 0.0;
        for (int b = 0; b < config.batch; ++b) {
            const std::size_t si = rng() % corpus.size();
            const std::vector<FrameObservations> &seq = corpus[si];
            const int n = static_cast<int>(seq.size());
            if (n < len)
                throw input_error("train_predictor: corpus sequence shorter than stage length");
            const int start = n == len ? 0 : static_cast<int>(rng() % static_cast<std::uint64_t>(n - len + 1));

            std::vector<FrameObservations> window(seq.begin() + start, seq.begin() + start + len);
            window.back().flow_fwd = FlowMap();
            window.back().flow_bwd = FlowMap();

            const std::uint64_t drop_seed = rng();
            batch_loss += model.training_loss(window, config.weights, config.temperature,
                                              model.config().p_drop, drop_seed, true);
        }
        batch_loss /= config.batch;
        if (!std::isfinite(batch_loss))
            throw numerical_error("train_predictor: non-finite loss at step " + std::to_string(step));
        log.losses.push_back(batch_loss);

        std::vector<double> grads = reg.gather_grads();
        for (double &g : grads)
            g /= config.batch;
        adam.update(values, grads);
        reg.scatter_values(values);
    }
    return log;
}

void PredictorModel::save_checkpoint(const std::string &path) const {
    nn::ParamRegistry reg = const_cast<PredictorModel *>(this)->params();
    nlohmann::ordered_json manifest;
    manifest["format"] = "anycam-checkpoint";
    manifest["config"] = {{"feature_dim", config_.feature_dim},
                          {"attention_layers", config_.attention_layers},
                          {"attention_heads", config_.attention_heads},
                          {"patch_stride", config_.patch_stride},
                          {"m", config_.m},
                          {"p_drop", config_.p_drop},
                          {"weight_decay_pose_tokens", config_.weight_decay_pose_tokens},
                          {"max_pairs", config_.max_pairs},
                          {"height", config_.height},
                          {"width", config_.width}};
    manifest["schedule"] = {{"m", schedule_.m}, {"f_min", schedule_.f_min}, {"f_max", schedule_.f_max}};
    nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
    for (const nn::Tensor *t : reg.tensors())
        tensors.push_back({{"name", t->name},
                           {"rows", t->value.rows()},
                           {"cols", t->value.cols()}});
    manifest["tensors"] = tensors;
    const std::string json_text = manifest.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw input_error("cannot open checkpoint for writing: " + path);
    out.write("ACKP", 4);
    const std::uint16_t version = 1;
    out.write(reinterpret_cast<const char *>(&version), sizeof(version));
    const std::uint32_t len = static_cast<std::uint32_t>(json_text.size());
    out.write(reinterpret_cast<const char *>(&len), sizeof(len));
    out.write(json_text.data(), static_cast<std::streamsize>(json_text.size()));
    for (const nn::Tensor *t : reg.tensors())
        out.write(reinterpret_cast<const char *>(t->value.data()),
                  static_cast<std::streamsize>(t->value.size() * sizeof(double)));
    if (!out)
        throw input_error("checkpoint write failed: " + path);
}

PredictorModel PredictorModel::load_checkpoint(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw input_error("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "ACKP")
        throw input_error("checkpoint has wrong magic bytes (expected ACKP): " + path);
    std::uint16_t version = 0;
    in.read(reinterpret_cast<char *>(&version), sizeof(version));
    if (version != 1)
        throw input_error("unsupported checkpoint version: " + std::to_string(version));
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char *>(&len), sizeof(len));
    std::string json_text(len, '\0');
    in.read(json_text.data(), static_cast<std::streamsize>(len));
    if (!in)
        throw input_error("truncated checkpoint manifest: " + path);

    const nlohmann::json manifest = nlohmann::json::parse(json_text);
    ModelConfig cfg;
    const auto &c = manifest.at("config");
    cfg.feature_dim = c.at("feature_dim");
    cfg.attention_layers = c.at("attention_layers");
    cfg.attention_heads = c.at("attention_heads");
    cfg.patch_stride = c.at("patch_stride");
    cfg.m = c.at("m");
    cfg.p_drop = c.at("p_drop");
    cfg.weight_decay_pose_tokens = c.at("weight_decay_pose_tokens");
    cfg.max_pairs = c.at("max_pairs");
    cfg.height = c.at("height");
    cfg.width = c.at("width");
    const auto &s = manifest.at("schedule");
    const FocalSchedule schedule =
        build_focal_schedule(s.at("m").get<std::size_t>(), s.at("f_min").get<double>(),
                             s.at("f_max").get<double>());

    PredictorModel model(cfg, schedule, 0);
    nn::ParamRegistry reg = model.params();
    for (nn::Tensor *t : reg.tensors()) {
        in.read(reinterpret_cast<char *>(t->value.data()),
                static_cast<std::streamsize>(t->value.size() * sizeof(double)));
        if (!in)
            throw input_error("truncated checkpoint payload at tensor " + t->name);
    }
    return model;
}

} // namespace anycam
