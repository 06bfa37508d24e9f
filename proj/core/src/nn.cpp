#include "anycam/nn.hpp"

#include "anycam/errors.hpp"

#include <algorithm>
#include <cmath>

namespace anycam::nn {

std::size_t ParamRegistry::total_size() const {
    std::size_t n = 0;
    for (const Tensor *t : params_)
        n += static_cast<std::size_t>(t->value.size());
    return n;
}

void ParamRegistry::zero_grad() {
    for (Tensor *t : params_)
        t->grad.setZero();
}

std::vector<double> ParamRegistry::gather_values() const {
    std::vector<double> flat;
    flat.reserve(total_size());
    for (const Tensor *t : params_)
        flat.insert(flat.end(), t->value.data(), t->value.data() + t->value.size());
    return flat;
}

void ParamRegistry::scatter_values(const std::vector<double> &flat) {
    if (flat.size() != total_size())
        throw input_error("ParamRegistry: flat size mismatch");
    std::size_t off = 0;
    for (Tensor *t : params_) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off),
                    static_cast<std::size_t>(t->value.size()), t->value.data());
        off += static_cast<std::size_t>(t->value.size());
    }
}

std::vector<double> ParamRegistry::gather_grads() const {
    std::vector<double> flat;
    flat.reserve(total_size());
    for (const Tensor *t : params_)
        flat.insert(flat.end(), t->grad.data(), t->grad.data() + t->grad.size());
    return flat;
}

namespace {
const double kGeluC = std::sqrt(2.0 / M_PI);
}

double gelu(double x) {
    const double u = kGeluC * (x + 0.044715 * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_derivative(double x) {
    const double u = kGeluC * (x + 0.044715 * x * x * x);
    const double t = std::tanh(u);
    const double du = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

Linear::Linear(const std::string &name, int in, int out)
    : w(name + ".w", out, in), b(name + ".b", out, 1) {}

void Linear::init(std::mt19937_64 &rng, double scale) {
    std::normal_distribution<double> dist(0.0, scale);
    for (Eigen::Index i = 0; i < w.value.size(); ++i)
        w.value.data()[i] = dist(rng);
    b.value.setZero();
}

void Linear::init_zero() {
    w.value.setZero();
    b.value.setZero();
}

void Linear::register_params(ParamRegistry &reg) {
    reg.add(&w);
    reg.add(&b);
}

Eigen::MatrixXd Linear::forward(const Eigen::MatrixXd &x, Cache &cache) const {
    cache.x = x;
    return (w.value * x).colwise() + Eigen::VectorXd(b.value.col(0));
}

Eigen::MatrixXd Linear::backward(const Cache &cache, const Eigen::MatrixXd &dy) {
    w.grad += dy * cache.x.transpose();
    b.grad.col(0) += dy.rowwise().sum();
    return w.value.transpose() * dy;
}

LayerNorm::LayerNorm(const std::string &name, int dim)
    : gamma(name + ".gamma", dim, 1), beta(name + ".beta", dim, 1) {
    gamma.value.setOnes();
}

void LayerNorm::register_params(ParamRegistry &reg) {
    reg.add(&gamma);
    reg.add(&beta);
}

Eigen::MatrixXd LayerNorm::forward(const Eigen::MatrixXd &x, Cache &cache) const {
    const Eigen::Index d = x.rows(), n = x.cols();
    cache.x_hat.resize(d, n);
    cache.inv_std.resize(n);
    Eigen::MatrixXd y(d, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        const double mean = x.col(c).mean();
        const Eigen::VectorXd centered = x.col(c).array() - mean;
        const double var = centered.squaredNorm() / static_cast<double>(d);
        const double inv_std = 1.0 / std::sqrt(var + eps);
        cache.inv_std[c] = inv_std;
        cache.x_hat.col(c) = centered * inv_std;
        y.col(c) = cache.x_hat.col(c).cwiseProduct(gamma.value.col(0)) + beta.value.col(0);
    }
    return y;
}

Eigen::MatrixXd LayerNorm::backward(const Cache &cache, const Eigen::MatrixXd &dy) {
    const Eigen::Index d = dy.rows(), n = dy.cols();
    Eigen::MatrixXd dx(d, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        const Eigen::VectorXd dxhat = dy.col(c).cwiseProduct(gamma.value.col(0));
        gamma.grad.col(0) += dy.col(c).cwiseProduct(cache.x_hat.col(c));
        beta.grad.col(0) += dy.col(c);
        const double mean_dxhat = dxhat.mean();
        const double mean_dxhat_xhat = dxhat.cwiseProduct(cache.x_hat.col(c)).mean();
        dx.col(c) = cache.inv_std[c] *
                    (dxhat.array() - mean_dxhat - cache.x_hat.col(c).array() * mean_dxhat_xhat);
    }
    return dx;
}

Eigen::MatrixXd Gelu::forward(const Eigen::MatrixXd &x, Cache &cache) const {
    cache.x = x;
    return x.unaryExpr([](double v) { return gelu(v); });
}

Eigen::MatrixXd Gelu::backward(const Cache &cache, const Eigen::MatrixXd &dy) const {
    return dy.cwiseProduct(cache.x.unaryExpr([](double v) { return gelu_derivative(v); }));
}

SelfAttention::SelfAttention(const std::string &name, int dim, int heads_)
    : heads(heads_), wq(name + ".q", dim, dim), wk(name + ".k", dim, dim),
      wv(name + ".v", dim, dim), wo(name + ".o", dim, dim) {
    if (dim % heads_ != 0)
        throw input_error("attention dim must be divisible by head count");
}

void SelfAttention::init(std::mt19937_64 &rng, double scale) {
    wq.init(rng, scale);
    wk.init(rng, scale);
    wv.init(rng, scale);
    wo.init(rng, scale);
}

void SelfAttention::register_params(ParamRegistry &reg) {
    wq.register_params(reg);
    wk.register_params(reg);
    wv.register_params(reg);
    wo.register_params(reg);
}

Eigen::MatrixXd SelfAttention::forward(const Eigen::MatrixXd &x, Cache &cache) const {
    const Eigen::Index d = x.rows(), n = x.cols();
    const Eigen::Index dh = d / heads;
    cache.q = wq.forward(x, cache.cq);
    cache.k = wk.forward(x, cache.ck);
    cache.v = wv.forward(x, cache.cv);
    cache.attn.assign(static_cast<std::size_t>(heads), Eigen::MatrixXd());

    Eigen::MatrixXd concat(d, n);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int h = 0; h < heads; ++h) {
        const auto qh = cache.q.middleRows(h * dh, dh);
        const auto kh = cache.k.middleRows(h * dh, dh);
        const auto vh = cache.v.middleRows(h * dh, dh);
        Eigen::MatrixXd scores = (qh.transpose() * kh) * inv_sqrt; // n x n, row = query
        for (Eigen::Index r = 0; r < n; ++r) {
            const double top = scores.row(r).maxCoeff();
            Eigen::ArrayXd e = (scores.row(r).array() - top).exp();
            scores.row(r) = (e / e.sum()).matrix();
        }
        cache.attn[static_cast<std::size_t>(h)] = scores;
        concat.middleRows(h * dh, dh) = vh * scores.transpose();
    }
    return wo.forward(concat, cache.co);
}

Eigen::MatrixXd SelfAttention::backward(Cache &cache, const Eigen::MatrixXd &dy) {
    const Eigen::Index d = dy.rows(), n = dy.cols();
    const Eigen::Index dh = d / heads;
    const Eigen::MatrixXd d_concat = wo.backward(cache.co, dy);

    Eigen::MatrixXd dq(d, n), dk(d, n), dv(d, n);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int h = 0; h < heads; ++h) {
        const auto qh = cache.q.middleRows(h * dh, dh);
        const auto kh = cache.k.middleRows(h * dh, dh);
        const auto vh = cache.v.middleRows(h * dh, dh);
        const Eigen::MatrixXd &attn = cache.attn[static_cast<std::size_t>(h)];
        const auto d_out = d_concat.middleRows(h * dh, dh);

        const Eigen::MatrixXd d_attn_t = vh.transpose() * d_out; // n x n (keys x queries)
        dv.middleRows(h * dh, dh) = d_out * attn;                // vh grad

        // Softmax backward per query row.
        Eigen::MatrixXd d_scores(n, n);
        for (Eigen::Index r = 0; r < n; ++r) {
            const Eigen::RowVectorXd a = attn.row(r);
            const Eigen::RowVectorXd g = d_attn_t.col(r).transpose();
            const double dot = (a.cwiseProduct(g)).sum();
            d_scores.row(r) = a.cwiseProduct(g - Eigen::RowVectorXd::Constant(n, dot));
        }
        d_scores *= inv_sqrt;
        dq.middleRows(h * dh, dh) = kh * d_scores.transpose();
        dk.middleRows(h * dh, dh) = qh * d_scores;
    }
    Eigen::MatrixXd dx = wq.backward(cache.cq, dq);
    dx += wk.backward(cache.ck, dk);
    dx += wv.backward(cache.cv, dv);
    return dx;
}

Mlp::Mlp(const std::string &name, int in, int hidden, int out)
    : fc1(name + ".fc1", in, hidden), fc2(name + ".fc2", hidden, out) {}

void Mlp::init(std::mt19937_64 &rng, double scale) {
    fc1.init(rng, scale);
    fc2.init(rng, scale);
}

void Mlp::register_params(ParamRegistry &reg) {
    fc1.register_params(reg);
    fc2.register_params(reg);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd &x, Cache &cache) const {
    return fc2.forward(act.forward(fc1.forward(x, cache.c1), cache.cg), cache.c2);
}

Eigen::MatrixXd Mlp::backward(Cache &cache, const Eigen::MatrixXd &dy) {
    return fc1.backward(cache.c1, act.backward(cache.cg, fc2.backward(cache.c2, dy)));
}

TransformerBlock::TransformerBlock(const std::string &name, int dim, int heads)
    : ln1(name + ".ln1", dim), ln2(name + ".ln2", dim), attn(name + ".attn", dim, heads),
      mlp(name + ".mlp", dim, 2 * dim, dim) {}

void TransformerBlock::init(std::mt19937_64 &rng, double scale) {
    attn.init(rng, scale);
    mlp.init(rng, scale);
}

void TransformerBlock::register_params(ParamRegistry &reg) {
    ln1.register_params(reg);
    attn.register_params(reg);
    ln2.register_params(reg);
    mlp.register_params(reg);
}

Eigen::MatrixXd TransformerBlock::forward(const Eigen::MatrixXd &x, Cache &cache) const {
    Eigen::MatrixXd h = x + attn.forward(ln1.forward(x, cache.cl1), cache.ca);
    return h + mlp.forward(ln2.forward(h, cache.cl2), cache.cm);
}

Eigen::MatrixXd TransformerBlock::backward(Cache &cache, const Eigen::MatrixXd &dy) {
    Eigen::MatrixXd dh = dy + ln2.backward(cache.cl2, mlp.backward(cache.cm, dy));
    return dh + ln1.backward(cache.cl1, attn.backward(cache.ca, dh));
}

std::vector<double> softmax(const std::vector<double> &logits) {
    std::vector<double> out(logits.size());
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - top);
        sum += out[i];
    }
    for (double &v : out)
        v /= sum;
    return out;
}

} // namespace anycam::nn
