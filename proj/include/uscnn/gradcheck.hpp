#pragma once

#include <cstdint>

#include "uscnn/network.hpp"

namespace uscnn {

/// Tolerances for the two finite-difference suites. Pinned here so the CLI,
/// the tests, and the acceptance suite agree on the pass thresholds.
inline constexpr double kLossGradTolerance = 1e-5;
inline constexpr double kEndToEndTolerance = 1e-3;

/// Checks the analytic per-pixel flow gradient of the Charbonnier
/// flow-constraint loss against 64-bit central finite differences
/// (step 1e-4) on `instances` random extent x extent problems.
/// Returns the max relative error. `inject_error` offsets the analytic
/// gradient and exists only to exercise the failure path.
double loss_gradient_max_rel_error(std::uint32_t seed, int instances = 100, int extent = 16,
                                   double charbonnier_epsilon = 1e-3, double inject_error = 0.0);

/// Builds a reduced 3-layer network on 8x8 frames and checks every
/// parameter gradient of the composed loss (flow-constraint loss over the
/// network output) against central finite differences with step 1e-2.
/// Returns the max relative error over all parameters.
double end_to_end_max_rel_error(std::uint32_t seed, double inject_error = 0.0);

/// The reduced network used by the end-to-end check: stride-2 encoder
/// layer, one bottleneck layer, one upsampled linear output layer.
EncoderDecoderNet make_reduced_network(std::uint32_t seed);

}  // namespace uscnn
