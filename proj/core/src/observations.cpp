#include "anycam/observations.hpp"

#include "anycam/errors.hpp"

namespace anycam {

void validate_observations(const std::vector<FrameObservations> &obs) {
    if (obs.size() < 2)
        throw input_error("sequence must contain at least 2 frames");
    const int h = obs.front().depth.height;
    const int w = obs.front().depth.width;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        obs[i].depth.validate();
        if (obs[i].depth.height != h || obs[i].depth.width != w)
            throw input_error("frame " + std::to_string(i) + ": depth dimensions differ across frames");
        const bool last = i + 1 == obs.size();
        if (last) {
            if (obs[i].has_flow())
                throw input_error("final frame must not carry flow rasters");
            continue;
        }
        if (!obs[i].has_flow())
            throw input_error("frame " + std::to_string(i) + ": missing flow rasters");
        obs[i].flow_fwd.validate();
        obs[i].flow_bwd.validate();
        if (obs[i].flow_fwd.height != h || obs[i].flow_fwd.width != w ||
            obs[i].flow_bwd.height != h || obs[i].flow_bwd.width != w)
            throw input_error("frame " + std::to_string(i) + ": flow dimensions differ from depth");
    }
}

std::vector<FrameObservations> reverse_observations(const std::vector<FrameObservations> &obs) {
    validate_observations(obs);
    const std::size_t n = obs.size();
    std::vector<FrameObservations> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i].depth = obs[n - 1 - i].depth;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        // Pair i of the reversed sequence covers original pair n-2-i.
        out[i].flow_fwd = obs[n - 2 - i].flow_bwd;
        out[i].flow_bwd = obs[n - 2 - i].flow_fwd;
    }
    return out;
}

} // namespace anycam
