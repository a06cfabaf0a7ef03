#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "uscnn/errors.hpp"

namespace uscnn {

/// Dense row-major tensor of 32-bit floats.
///
/// Feature maps are indexed (channel, row, col); filter banks
/// (out-channel, in-channel, kernel-row, kernel-col). The flat data
/// length always equals the product of the extents, and every extent
/// is at least 1.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> shape_);
    Tensor(std::vector<int> shape_, std::vector<float> data_);

    static Tensor zeros(std::vector<int> shape_) { return Tensor(std::move(shape_)); }

    std::size_t size() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int extent(int axis) const {
        assert(axis >= 0 && axis < rank());
        return shape[static_cast<std::size_t>(axis)];
    }
    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;

    float& at(int i) {
        assert(rank() == 1 && i >= 0 && i < shape[0]);
        return data[static_cast<std::size_t>(i)];
    }
    float at(int i) const { return const_cast<Tensor*>(this)->at(i); }

    float& at(int y, int x) {
        assert(rank() == 2 && y >= 0 && y < shape[0] && x >= 0 && x < shape[1]);
        return data[static_cast<std::size_t>(y) * shape[1] + x];
    }
    float at(int y, int x) const { return const_cast<Tensor*>(this)->at(y, x); }

    float& at(int c, int y, int x) {
        assert(rank() == 3 && c >= 0 && c < shape[0] && y >= 0 && y < shape[1] && x >= 0 && x < shape[2]);
        return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    float at(int c, int y, int x) const { return const_cast<Tensor*>(this)->at(c, y, x); }

    float& at(int o, int i, int y, int x) {
        assert(rank() == 4 && o >= 0 && o < shape[0] && i >= 0 && i < shape[1] &&
               y >= 0 && y < shape[2] && x >= 0 && x < shape[3]);
        return data[((static_cast<std::size_t>(o) * shape[1] + i) * shape[2] + y) * shape[3] + x];
    }
    float at(int o, int i, int y, int x) const { return const_cast<Tensor*>(this)->at(o, i, y, x); }
};

Tensor zeros_like(const Tensor& t);
std::string shape_string(const std::vector<int>& shape);

/// Slope of the leaky rectifier applied after hidden convolutions.
inline constexpr float kLeakySlope = 0.1f;

/// One convolutional layer: cross-correlation weights, per-channel bias,
/// stride in {1, 2}, symmetric zero padding fixed to (K-1)/2, and an
/// optional leaky-rectifier activation.
struct ConvLayer {
    Tensor weights;  // Cout x Cin x K x K
    Tensor bias;     // Cout
    int stride = 1;
    int padding = 0;
    bool has_activation = true;

    ConvLayer() = default;
    ConvLayer(int out_channels, int in_channels, int kernel, int stride_, bool has_activation_);

    int out_channels() const { return weights.extent(0); }
    int in_channels() const { return weights.extent(1); }
    int kernel() const { return weights.extent(2); }
};

/// Per-parameter ADAM accumulator. Moments are zero at step_count == 0.
struct AdamState {
    Tensor first_moment;
    Tensor second_moment;
    std::uint64_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double learning_rate = 1e-4;
    double epsilon = 1e-8;

    AdamState() = default;
    explicit AdamState(std::vector<int> param_shape);

    void set_hyperparams(double lr, double b1, double b2, double eps);
};

/// Cross-correlates `input` (Cin x H x W) with the layer's filter bank.
/// Output extent is floor((H + 2*padding - K) / stride) + 1 per axis.
/// When `preactivation` is non-null it receives the values before the
/// activation (needed by the exact backward pass).
Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer, Tensor* preactivation = nullptr);

struct ConvGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

/// Exact gradients of a scalar loss through conv2d_forward. The overload
/// without `preactivation` recomputes it internally.
ConvGrads conv2d_backward(const Tensor& input, const ConvLayer& layer, const Tensor& grad_output);
ConvGrads conv2d_backward(const Tensor& input, const ConvLayer& layer, const Tensor& grad_output,
                          const Tensor& preactivation);

/// Nearest-neighbour upsampling by integer factor: output(c, i, j) ==
/// input(c, i / factor, j / factor).
Tensor upsample_repeat(const Tensor& input, int factor);

/// Adjoint of upsample_repeat: each input-position gradient is the sum of
/// the factor^2 output gradients it was copied to.
Tensor upsample_repeat_backward(const Tensor& grad_output, int factor);

/// Standard ADAM update with bias correction; increments step_count.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state);

}  // namespace uscnn
