#pragma once

#include <cstddef>

#include "uscnn/image_ops.hpp"

namespace uscnn {

/// Endpoint and angular error aggregates bucketed by ground-truth magnitude
/// (< 5 px vs >= 5 px). Angular error follows the homogeneous 3-vector
/// convention: the angle between (u, v, 1) and (u', v', 1), in degrees.
/// Pixels with non-finite ground truth are excluded from every mean.
struct FlowMetrics {
    double aee_lt5 = 0.0;
    double aee_ge5 = 0.0;
    double aee_tot = 0.0;
    double aae_lt5 = 0.0;
    double aae_ge5 = 0.0;
    double aae_tot = 0.0;
    std::size_t count_lt5 = 0;
    std::size_t count_ge5 = 0;
};

FlowMetrics compute_metrics(const FlowField& estimate, const FlowField& truth);

}  // namespace uscnn
