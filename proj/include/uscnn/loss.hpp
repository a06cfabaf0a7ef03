#pragma once

#include "uscnn/image_ops.hpp"

namespace uscnn {

struct LossConfig {
    double epsilon = 1e-3;  // Charbonnier constant inside the square root
};

/// Charbonnier-penalized optical-flow-constraint objective:
/// sum over pixels of sqrt((u*Ix + v*Iy + It)^2 + epsilon).
double ofc_loss(const FlowField& flow, const Tensor& ix, const Tensor& iy, const Tensor& it,
                const LossConfig& cfg);

/// Per-pixel gradient of ofc_loss with respect to the flow:
/// dE/du = Ix * r / sqrt(r^2 + eps), dE/dv = Iy * r / sqrt(r^2 + eps),
/// where r = u*Ix + v*Iy + It.
FlowField ofc_loss_grad(const FlowField& flow, const Tensor& ix, const Tensor& iy, const Tensor& it,
                        const LossConfig& cfg);

/// Non-linearized objective, sum over pixels of |warped2 - frame1|^2.
/// Used for monitoring and acceptance checks only.
double photometric_loss(const Image& frame1, const Image& warped2);

}  // namespace uscnn
