#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace anycam::nn {

// Named parameter matrix with its gradient accumulator. Vectors are n x 1.
struct Tensor {
    std::string name;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;

    Tensor() = default;
    Tensor(std::string n, Eigen::Index rows, Eigen::Index cols)
        : name(std::move(n)), value(Eigen::MatrixXd::Zero(rows, cols)),
          grad(Eigen::MatrixXd::Zero(rows, cols)) {}
};

// Flat view over every parameter tensor of a model, in registration order.
class ParamRegistry {
  public:
    void add(Tensor *t) { params_.push_back(t); }
    const std::vector<Tensor *> &tensors() const { return params_; }
    std::size_t total_size() const;
    void zero_grad();
    std::vector<double> gather_values() const;
    void scatter_values(const std::vector<double> &flat);
    std::vector<double> gather_grads() const;

  private:
    std::vector<Tensor *> params_;
};

double gelu(double x);
double gelu_derivative(double x);

// Tokens are columns: X is (features x tokens).
struct Linear {
    Tensor w; // out x in
    Tensor b; // out x 1

    Linear() = default;
    Linear(const std::string &name, int in, int out);
    void init(std::mt19937_64 &rng, double scale);
    void init_zero();
    void register_params(ParamRegistry &reg);

    struct Cache {
        Eigen::MatrixXd x;
    };
    Eigen::MatrixXd forward(const Eigen::MatrixXd &x, Cache &cache) const;
    Eigen::MatrixXd backward(const Cache &cache, const Eigen::MatrixXd &dy);
};

// Per-column normalization with learned gain/bias.
struct LayerNorm {
    Tensor gamma;
    Tensor beta;
    double eps = 1e-5;

    LayerNorm() = default;
    LayerNorm(const std::string &name, int dim);
    void register_params(ParamRegistry &reg);

    struct Cache {
        Eigen::MatrixXd x_hat;
        Eigen::VectorXd inv_std;
    };
    Eigen::MatrixXd forward(const Eigen::MatrixXd &x, Cache &cache) const;
    Eigen::MatrixXd backward(const Cache &cache, const Eigen::MatrixXd &dy);
};

struct Gelu {
    struct Cache {
        Eigen::MatrixXd x;
    };
    Eigen::MatrixXd forward(const Eigen::MatrixXd &x, Cache &cache) const;
    Eigen::MatrixXd backward(const Cache &cache, const Eigen::MatrixXd &dy) const;
};

// Standard multi-head self-attention over the token columns.
struct SelfAttention {
    int heads = 1;
    Linear wq, wk, wv, wo;

    SelfAttention() = default;
    SelfAttention(const std::string &name, int dim, int heads);
    void init(std::mt19937_64 &rng, double scale);
    void register_params(ParamRegistry &reg);

    struct Cache {
        Linear::Cache cq, ck, cv, co;
        Eigen::MatrixXd q, k, v;
        std::vector<Eigen::MatrixXd> attn; // per head, tokens x tokens
    };
    Eigen::MatrixXd forward(const Eigen::MatrixXd &x, Cache &cache) const;
    Eigen::MatrixXd backward(Cache &cache, const Eigen::MatrixXd &dy);
};

// Two-layer MLP with a GELU in between.
struct Mlp {
    Linear fc1, fc2;
    Gelu act;

    Mlp() = default;
    Mlp(const std::string &name, int in, int hidden, int out);
    void init(std::mt19937_64 &rng, double scale);
    void register_params(ParamRegistry &reg);

    struct Cache {
        Linear::Cache c1, c2;
        Gelu::Cache cg;
    };
    Eigen::MatrixXd forward(const Eigen::MatrixXd &x, Cache &cache) const;
    Eigen::MatrixXd backward(Cache &cache, const Eigen::MatrixXd &dy);
};

// Pre-norm transformer block: x += attn(ln1(x)); x += mlp(ln2(x)).
struct TransformerBlock {
    LayerNorm ln1, ln2;
    SelfAttention attn;
    Mlp mlp;

    TransformerBlock() = default;
    TransformerBlock(const std::string &name, int dim, int heads);
    void init(std::mt19937_64 &rng, double scale);
    void register_params(ParamRegistry &reg);

    struct Cache {
        LayerNorm::Cache cl1, cl2;
        SelfAttention::Cache ca;
        Mlp::Cache cm;
    };
    Eigen::MatrixXd forward(const Eigen::MatrixXd &x, Cache &cache) const;
    Eigen::MatrixXd backward(Cache &cache, const Eigen::MatrixXd &dy);
};

std::vector<double> softmax(const std::vector<double> &logits);

} // namespace anycam::nn
