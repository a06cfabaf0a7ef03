#pragma once

#include <functional>
#include <vector>

#include "uscnn/network.hpp"

namespace uscnn {

struct InferenceConfig {
    /// Pyramid levels (k+1 levels, coarsest downsampled by 2^k).
    /// 0 selects the largest k+1 that keeps the coarsest side >= 32 px.
    int num_scales = 0;
    int iterations_per_scale = 4;
    int median_radius = 2;
};

/// Scale count the auto rule picks for the given extents.
int auto_num_scales(int height, int width);

/// Produces the flow update between a reference frame and the currently
/// warped target frame.
using FlowPredictor = std::function<FlowField(const Image& frame1, const Image& warped2)>;

/// Invoked after every update with the loop state at the current level:
/// the accumulated flow and the target frame freshly warped by it.
using IterationObserver = std::function<void(int level, int iteration, const FlowField& flow_total,
                                             const Image& frame1_level, const Image& frame2_level,
                                             const Image& warped2)>;

/// Coarse-to-fine iterative residual estimation: at each level, repeat
/// { dF = predict(frame1, warped2); dF = median(dF); F += dF;
///   warped2 = warp(frame2, F) }, then upsample F (values doubled) and
/// re-warp at the next finer level. Frames are edge-padded to a multiple
/// of 16 * 2^(scales-1) and the flow cropped back afterwards.
FlowField estimate_flow(const FlowPredictor& predictor, const Image& frame1, const Image& frame2,
                        const InferenceConfig& cfg, const IterationObserver& observer = nullptr);

FlowField estimate_flow(const EncoderDecoderNet& net, const Image& frame1, const Image& frame2,
                        const InferenceConfig& cfg);

struct IterationRecord {
    int level;             // 0 = finest
    int iteration;         // 0-based within the level
    double mean_photometric;  // photometric loss / pixel count at that level
};

/// Runs the same loop as estimate_flow, recording the per-pixel mean
/// photometric loss of (frame1_level, warped2) after every update.
/// When flow_out is non-null it receives the estimate (identical to
/// what estimate_flow returns).
std::vector<IterationRecord> iteration_trace(const EncoderDecoderNet& net, const Image& frame1,
                                             const Image& frame2, const InferenceConfig& cfg,
                                             FlowField* flow_out = nullptr);

}  // namespace uscnn
