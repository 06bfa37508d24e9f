#pragma once

#include <cstddef>
#include <vector>

namespace anycam {

// Descending bank of candidate focal lengths, candidates[0] = f_max and
// candidates[m-1] = f_min.
struct FocalSchedule {
    std::size_t m = 0;
    double f_min = 0.0; // pixels
    double f_max = 0.0; // pixels
    std::vector<double> candidates;

    // Nearest candidate index for a focal value.
    std::size_t nearest_index(double focal) const;
};

// Nonnegative scores over the candidate bank, summing to 1.
struct LikelihoodVector {
    std::vector<double> probabilities;

    void validate() const; // throws input_error when not a distribution
};

// Blended linear/exponential spacing between f_max and f_min:
//   delta_i = i/(m-1)
//   f_i = 0.75 * exp(delta_i ln f_min + (1-delta_i) ln f_max)
//       + 0.25 * (delta_i f_min + (1-delta_i) f_max)
// Endpoints are pinned to f_max and f_min exactly.
FocalSchedule build_focal_schedule(std::size_t m, double f_min, double f_max);

// Argmax index; ties break toward the lower index (larger focal).
std::size_t select_best_candidate(const LikelihoodVector &p);

// softmax(-temperature * losses). Shift-invariant in the losses.
LikelihoodVector losses_to_target_distribution(const std::vector<double> &losses,
                                               double temperature);

inline constexpr double kDefaultSoftmaxTemperature = 100.0;

} // namespace anycam
