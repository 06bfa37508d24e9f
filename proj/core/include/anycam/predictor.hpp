#pragma once

#include "anycam/hypotheses.hpp"
#include "anycam/losses.hpp"
#include "anycam/nn.hpp"
#include "anycam/observations.hpp"
#include "anycam/solver.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace anycam {

struct ModelConfig {
    int feature_dim = 64;
    int attention_layers = 2;
    int attention_heads = 4;
    int patch_stride = 8; // encoder pooling and sigma-head grid resolution
    int m = 8;            // candidate head count
    double p_drop = 0.1;
    double weight_decay_pose_tokens = 0.01;
    int max_pairs = 16;   // learned pair-position embedding capacity
    int height = 48;
    int width = 48;

    void validate() const;
};

// One pose token per frame pair plus a single sequence token.
struct TokenState {
    std::vector<Eigen::VectorXd> pose_tokens;
    Eigen::VectorXd sequence_token;
};

// Zeroes pose-token elements independently with probability p_drop; the
// sequence token (and hence the sigma pathway fed by undropped tokens) is
// untouched. Training-time only.
TokenState apply_pose_token_dropout(const TokenState &tokens, double p_drop, std::uint64_t seed);

struct PredictionResult {
    std::vector<CandidateEstimate> bank;
    LikelihoodVector likelihood;
    TokenState tokens;
};

class PredictorModel {
  public:
    PredictorModel(const ModelConfig &config, const FocalSchedule &schedule, std::uint64_t seed);

    const ModelConfig &config() const { return config_; }
    const FocalSchedule &schedule() const { return schedule_; }

    // Registry of pointers into this model's tensors, built per call so the
    // model stays safely copyable.
    nn::ParamRegistry params();

    // Deterministic evaluation-mode pass: encoder, attention, candidate
    // heads, sequence head. No dropout.
    PredictionResult forward(const std::vector<FrameObservations> &obs) const;

    // Full training objective for one sequence:
    //   sum_k lambda_flow (flow fwd_k + flow rev_k) + lambda_consistency cons_k
    //   + lambda_intr KL(target || predicted) + pose-token weight decay,
    // where the reversed-sequence pass supplies the backward poses. The KL
    // target detaches the flow losses and the predicted side stops at the
    // sequence head input, so candidate heads receive no KL gradient.
    // Gradients accumulate into the parameter registry when with_grad is set.
    double training_loss(const std::vector<FrameObservations> &obs, const LossWeights &weights,
                         double temperature, double p_drop, std::uint64_t dropout_seed,
                         bool with_grad);

    void save_checkpoint(const std::string &path) const;
    static PredictorModel load_checkpoint(const std::string &path);

    // Swaps two candidate slots (heads and schedule entry). Candidates share
    // no state, so the prediction bank permutes with them.
    void swap_candidates(std::size_t a, std::size_t b);

  private:
    ModelConfig config_;
    FocalSchedule schedule_;

    nn::Linear encoder_;
    nn::Tensor pos_embed_;  // feature_dim x max_pairs
    nn::Tensor seq_token0_; // feature_dim x 1
    std::vector<nn::TransformerBlock> blocks_;
    std::vector<nn::Mlp> pose_heads_;  // per candidate, feature_dim -> 6
    std::vector<nn::Mlp> sigma_heads_; // per candidate, feature_dim -> sigma grid
    nn::Mlp seq_head_;                 // feature_dim -> m

    int sigma_cells_ = 0;
};

struct TrainConfig {
    int stage1_steps = 5000;
    int stage2_steps = 5000;
    int stage1_len = 2;
    int stage2_len = 8;
    int batch = 4;
    double step_size = 1e-4;
    double step_size_after_drop = 1e-5;
    int step_drop = 8000; // boundary in total steps
    double temperature = kDefaultSoftmaxTemperature;
    LossWeights weights;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainLog {
    std::vector<double> losses; // one entry per optimization step
};

// Two-stage training over a synthetic corpus: short sequences first, then
// longer ones. Deterministic given the seed.
TrainLog train_predictor(PredictorModel &model,
                         const std::vector<std::vector<FrameObservations>> &corpus,
                         const TrainConfig &config);

} // namespace anycam
