#include "uscnn/loss.hpp"

#include <cmath>

namespace uscnn {

namespace {

void validate(const FlowField& flow, const Tensor& ix, const Tensor& iy, const Tensor& it,
              const LossConfig& cfg, const char* op) {
    if (!(cfg.epsilon > 0.0)) {
        throw ShapeError(std::string(op) + ": charbonnier epsilon must be > 0");
    }
    if (!flow.u.same_shape(ix) || !ix.same_shape(iy) || !iy.same_shape(it)) {
        throw ShapeError(std::string(op) + ": extent mismatch, flow " + shape_string(flow.u.shape) +
                         ", Ix " + shape_string(ix.shape) + ", Iy " + shape_string(iy.shape) +
                         ", It " + shape_string(it.shape));
    }
}

}  // namespace

double ofc_loss(const FlowField& flow, const Tensor& ix, const Tensor& iy, const Tensor& it,
                const LossConfig& cfg) {
    validate(flow, ix, iy, it, cfg, "ofc_loss");
    double sum = 0.0;
    for (std::size_t i = 0; i < ix.data.size(); ++i) {
        const double r = double(flow.u.data[i]) * ix.data[i] + double(flow.v.data[i]) * iy.data[i] +
                         double(it.data[i]);
        sum += std::sqrt(r * r + cfg.epsilon);
    }
    return sum;
}

FlowField ofc_loss_grad(const FlowField& flow, const Tensor& ix, const Tensor& iy, const Tensor& it,
                        const LossConfig& cfg) {
    validate(flow, ix, iy, it, cfg, "ofc_loss_grad");
    FlowField grad(flow.height(), flow.width());
    for (std::size_t i = 0; i < ix.data.size(); ++i) {
        const double r = double(flow.u.data[i]) * ix.data[i] + double(flow.v.data[i]) * iy.data[i] +
                         double(it.data[i]);
        const double scale = r / std::sqrt(r * r + cfg.epsilon);
        grad.u.data[i] = static_cast<float>(ix.data[i] * scale);
        grad.v.data[i] = static_cast<float>(iy.data[i] * scale);
    }
    return grad;
}

double photometric_loss(const Image& frame1, const Image& warped2) {
    if (frame1.height() != warped2.height() || frame1.width() != warped2.width()) {
        throw ShapeError("photometric_loss: extent mismatch");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < frame1.pixels.data.size(); ++i) {
        const double d = double(warped2.pixels.data[i]) - frame1.pixels.data[i];
        sum += d * d;
    }
    return sum;
}

}  // namespace uscnn
