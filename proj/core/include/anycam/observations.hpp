#pragma once

#include "anycam/geometry.hpp"

#include <vector>

namespace anycam {

// Per-frame inputs. flow_fwd is the flow i -> i+1 and flow_bwd the flow
// i+1 -> i; both are empty (height 0) on the final frame of a sequence.
struct FrameObservations {
    DepthMap depth;
    FlowMap flow_fwd;
    FlowMap flow_bwd;

    bool has_flow() const { return flow_fwd.height > 0; }
};

// Throws input_error unless: >= 2 frames, consistent dimensions, valid
// depths, flows present on every frame but the last.
void validate_observations(const std::vector<FrameObservations> &obs);

// Reversal swaps frame order and exchanges forward/backward flow, so the
// pair j of the result observes the original pair n-2-j in reverse.
std::vector<FrameObservations> reverse_observations(const std::vector<FrameObservations> &obs);

} // namespace anycam
