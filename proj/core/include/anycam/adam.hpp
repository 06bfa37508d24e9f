#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace anycam {

// First-order adaptive-moment gradient descent over a flat parameter vector.
class AdamOptimizer {
  public:
    explicit AdamOptimizer(std::size_t n, double step = 1e-3, double beta1 = 0.9,
                           double beta2 = 0.999, double eps = 1e-8)
        : step_(step), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

    void set_step(double step) { step_ = step; }
    double step_size() const { return step_; }

    void update(std::vector<double> &params, const std::vector<double> &grad) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
            params[i] -= step_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
        }
    }

  private:
    double step_;
    double beta1_;
    double beta2_;
    double eps_;
    long t_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
};

} // namespace anycam
