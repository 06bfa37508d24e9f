#include "anycam/hypotheses.hpp"

#include "anycam/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace anycam {

std::size_t FocalSchedule::nearest_index(double focal) const {
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const double d = std::abs(candidates[i] - focal);
        if (d < best_dist) {
            best_dist = d;
            best = i;
        }
    }
    return best;
}

void LikelihoodVector::validate() const {
    if (probabilities.empty())
        throw input_error("likelihood vector is empty");
    double sum = 0.0;
    for (double p : probabilities) {
        if (!(p >= 0.0) || !std::isfinite(p))
            throw input_error("likelihood vector entries must be nonnegative and finite");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6)
        throw input_error("likelihood vector must sum to 1 within 1e-6");
}

FocalSchedule build_focal_schedule(std::size_t m, double f_min, double f_max) {
    if (m < 2)
        throw input_error("focal schedule needs at least 2 candidates");
    if (!(f_min > 0.0) || !(f_min < f_max))
        throw input_error("focal schedule requires 0 < f_min < f_max");

    FocalSchedule s;
    s.m = m;
    s.f_min = f_min;
    s.f_max = f_max;
    s.candidates.resize(m);
    const double log_min = std::log(f_min);
    const double log_max = std::log(f_max);
    for (std::size_t i = 0; i < m; ++i) {
        const double delta = static_cast<double>(i) / static_cast<double>(m - 1);
        const double f_exp = std::exp(delta * log_min + (1.0 - delta) * log_max);
        const double f_lin = delta * f_min + (1.0 - delta) * f_max;
        s.candidates[i] = 0.75 * f_exp + 0.25 * f_lin;
    }
    // The formula gives the endpoints exactly in real arithmetic; pin them so
    // they are exact in floating point too.
    s.candidates.front() = f_max;
    s.candidates.back() = f_min;
    return s;
}

std::size_t select_best_candidate(const LikelihoodVector &p) {
    p.validate();
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.probabilities.size(); ++i)
        if (p.probabilities[i] > p.probabilities[best])
            best = i;
    return best;
}

LikelihoodVector losses_to_target_distribution(const std::vector<double> &losses,
                                               double temperature) {
    if (losses.empty())
        throw input_error("losses_to_target_distribution: empty loss vector");
    if (!(temperature > 0.0))
        throw input_error("losses_to_target_distribution: temperature must be positive");
    for (double l : losses)
        if (!std::isfinite(l))
            throw input_error("losses_to_target_distribution: losses must be finite");

    // softmax(-T * l), stabilized by subtracting the max logit.
    std::vector<double> logits(losses.size());
    for (std::size_t i = 0; i < losses.size(); ++i)
        logits[i] = -temperature * losses[i];
    const double top = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    LikelihoodVector out;
    out.probabilities.resize(losses.size());
    for (std::size_t i = 0; i < losses.size(); ++i) {
        out.probabilities[i] = std::exp(logits[i] - top);
        denom += out.probabilities[i];
    }
    for (double &p : out.probabilities)
        p /= denom;
    return out;
}

} // namespace anycam
