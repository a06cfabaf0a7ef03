#include "uscnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "uscnn/parallel.hpp"

namespace uscnn {

namespace {

std::size_t checked_product(const std::vector<int>& shape) {
    if (shape.empty()) {
        throw ShapeError("tensor shape must have at least one extent");
    }
    std::size_t n = 1;
    for (int e : shape) {
        if (e < 1) {
            throw ShapeError("tensor extents must be >= 1, got " + shape_string(shape));
        }
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

inline float leaky(float z) { return z > 0.0f ? z : kLeakySlope * z; }
inline float leaky_deriv(float z) { return z > 0.0f ? 1.0f : kLeakySlope; }

struct ConvDims {
    int cin, h, w;
    int cout, k, hout, wout;
};

ConvDims conv_dims(const Tensor& input, const ConvLayer& layer) {
    if (input.rank() != 3) {
        throw ShapeError("conv2d input must be rank 3 (C x H x W), got " + shape_string(input.shape));
    }
    ConvDims d;
    d.cin = input.extent(0);
    d.h = input.extent(1);
    d.w = input.extent(2);
    d.cout = layer.out_channels();
    d.k = layer.kernel();
    if (d.cin != layer.in_channels()) {
        throw ShapeError("conv2d channel mismatch: input has " + std::to_string(d.cin) +
                         " channels, layer expects " + std::to_string(layer.in_channels()));
    }
    if (d.h < d.k || d.w < d.k) {
        throw ShapeError("conv2d input " + std::to_string(d.h) + "x" + std::to_string(d.w) +
                         " smaller than kernel " + std::to_string(d.k));
    }
    d.hout = (d.h + 2 * layer.padding - d.k) / layer.stride + 1;
    d.wout = (d.w + 2 * layer.padding - d.k) / layer.stride + 1;
    return d;
}

// Output rows touched by kernel row ky: oy with 0 <= oy*stride + ky - pad < h.
inline void out_range(int kpos, int pad, int stride, int in_extent, int out_extent, int* lo, int* hi) {
    int first = pad - kpos;  // smallest index with oy*stride >= first
    *lo = first <= 0 ? 0 : (first + stride - 1) / stride;
    int last = (in_extent - 1 + pad - kpos) / stride;
    *hi = std::min(out_extent - 1, last);
}

}  // namespace

Tensor::Tensor(std::vector<int> shape_) : shape(std::move(shape_)), data(checked_product(shape), 0.0f) {}

Tensor::Tensor(std::vector<int> shape_, std::vector<float> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
    if (data.size() != checked_product(shape)) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_string(shape));
    }
}

bool Tensor::all_finite() const {
    for (float v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

std::string shape_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

ConvLayer::ConvLayer(int out_channels, int in_channels, int kernel, int stride_, bool has_activation_)
    : weights({out_channels, in_channels, kernel, kernel}),
      bias({out_channels}),
      stride(stride_),
      padding((kernel - 1) / 2),
      has_activation(has_activation_) {
    if (kernel % 2 == 0) {
        throw ShapeError("conv kernel extent must be odd, got " + std::to_string(kernel));
    }
    if (stride != 1 && stride != 2) {
        throw ShapeError("conv stride must be 1 or 2, got " + std::to_string(stride));
    }
}

AdamState::AdamState(std::vector<int> param_shape)
    : first_moment(param_shape), second_moment(std::move(param_shape)) {}

void AdamState::set_hyperparams(double lr, double b1, double b2, double eps) {
    if (!(b1 > 0.0 && b1 < 1.0) || !(b2 > 0.0 && b2 < 1.0)) {
        throw ShapeError("adam betas must lie in (0, 1)");
    }
    if (!(eps > 0.0)) {
        throw ShapeError("adam epsilon must be > 0");
    }
    learning_rate = lr;
    beta1 = b1;
    beta2 = b2;
    epsilon = eps;
}

Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer, Tensor* preactivation) {
    const ConvDims d = conv_dims(input, layer);
    const int stride = layer.stride, pad = layer.padding;
    Tensor out({d.cout, d.hout, d.wout});
    if (preactivation) {
        *preactivation = Tensor({d.cout, d.hout, d.wout});
    }

    const float* in = input.data.data();
    const float* wts = layer.weights.data.data();
    const std::size_t plane = static_cast<std::size_t>(d.hout) * d.wout;

    parallel_for(d.cout, [&](int oc) {
        float* o = out.data.data() + static_cast<std::size_t>(oc) * plane;
        std::fill(o, o + plane, layer.bias.at(oc));
        for (int ic = 0; ic < d.cin; ++ic) {
            const float* in_plane = in + static_cast<std::size_t>(ic) * d.h * d.w;
            const float* w_plane = wts + ((static_cast<std::size_t>(oc) * d.cin + ic) * d.k) * d.k;
            for (int ky = 0; ky < d.k; ++ky) {
                int oy_lo, oy_hi;
                out_range(ky, pad, stride, d.h, d.hout, &oy_lo, &oy_hi);
                for (int kx = 0; kx < d.k; ++kx) {
                    const float w = w_plane[ky * d.k + kx];
                    if (w == 0.0f) continue;
                    int ox_lo, ox_hi;
                    out_range(kx, pad, stride, d.w, d.wout, &ox_lo, &ox_hi);
                    const int shift = kx - pad;
                    for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                        const int iy = oy * stride + ky - pad;
                        const float* in_row = in_plane + static_cast<std::size_t>(iy) * d.w;
                        float* out_row = o + static_cast<std::size_t>(oy) * d.wout;
                        if (stride == 1) {
                            for (int ox = ox_lo; ox <= ox_hi; ++ox) out_row[ox] += w * in_row[ox + shift];
                        } else {
                            for (int ox = ox_lo; ox <= ox_hi; ++ox) out_row[ox] += w * in_row[2 * ox + shift];
                        }
                    }
                }
            }
        }
        if (preactivation) {
            std::copy(o, o + plane, preactivation->data.data() + static_cast<std::size_t>(oc) * plane);
        }
        if (layer.has_activation) {
            for (std::size_t i = 0; i < plane; ++i) o[i] = leaky(o[i]);
        }
    });
    return out;
}

ConvGrads conv2d_backward(const Tensor& input, const ConvLayer& layer, const Tensor& grad_output) {
    Tensor preact;
    conv2d_forward(input, layer, &preact);
    return conv2d_backward(input, layer, grad_output, preact);
}

ConvGrads conv2d_backward(const Tensor& input, const ConvLayer& layer, const Tensor& grad_output,
                          const Tensor& preactivation) {
    const ConvDims d = conv_dims(input, layer);
    const int stride = layer.stride, pad = layer.padding;
    if (grad_output.shape != std::vector<int>{d.cout, d.hout, d.wout}) {
        throw ShapeError("conv2d_backward grad_output shape " + shape_string(grad_output.shape) +
                         " does not match forward output " +
                         shape_string({d.cout, d.hout, d.wout}));
    }
    if (!preactivation.same_shape(grad_output)) {
        throw ShapeError("conv2d_backward preactivation shape mismatch");
    }

    // Chain through the activation once so the three loops below only see
    // the gradient at the pre-activation values.
    Tensor g = grad_output;
    if (layer.has_activation) {
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            g.data[i] *= leaky_deriv(preactivation.data[i]);
        }
    }

    ConvGrads grads{Tensor(input.shape), Tensor(layer.weights.shape), Tensor(layer.bias.shape)};
    const float* in = input.data.data();
    const float* gp = g.data.data();
    const float* wts = layer.weights.data.data();
    const std::size_t out_plane = static_cast<std::size_t>(d.hout) * d.wout;

    parallel_for(d.cout, [&](int oc) {
        const float* g_plane = gp + static_cast<std::size_t>(oc) * out_plane;
        double bias_acc = 0.0;
        for (std::size_t i = 0; i < out_plane; ++i) bias_acc += g_plane[i];
        grads.bias.at(oc) = static_cast<float>(bias_acc);

        for (int ic = 0; ic < d.cin; ++ic) {
            const float* in_plane = in + static_cast<std::size_t>(ic) * d.h * d.w;
            for (int ky = 0; ky < d.k; ++ky) {
                int oy_lo, oy_hi;
                out_range(ky, pad, stride, d.h, d.hout, &oy_lo, &oy_hi);
                for (int kx = 0; kx < d.k; ++kx) {
                    int ox_lo, ox_hi;
                    out_range(kx, pad, stride, d.w, d.wout, &ox_lo, &ox_hi);
                    const int shift = kx - pad;
                    double acc = 0.0;
                    for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                        const int iy = oy * stride + ky - pad;
                        const float* in_row = in_plane + static_cast<std::size_t>(iy) * d.w;
                        const float* g_row = g_plane + static_cast<std::size_t>(oy) * d.wout;
                        double row_acc = 0.0;
                        if (stride == 1) {
                            for (int ox = ox_lo; ox <= ox_hi; ++ox) row_acc += double(g_row[ox]) * in_row[ox + shift];
                        } else {
                            for (int ox = ox_lo; ox <= ox_hi; ++ox) row_acc += double(g_row[ox]) * in_row[2 * ox + shift];
                        }
                        acc += row_acc;
                    }
                    grads.weights.at(oc, ic, ky, kx) = static_cast<float>(acc);
                }
            }
        }
    });

    // grad_input: parallel over input channels, so writes stay disjoint.
    parallel_for(d.cin, [&](int ic) {
        float* gi_plane = grads.input.data.data() + static_cast<std::size_t>(ic) * d.h * d.w;
        for (int oc = 0; oc < d.cout; ++oc) {
            const float* g_plane = gp + static_cast<std::size_t>(oc) * out_plane;
            const float* w_plane = wts + ((static_cast<std::size_t>(oc) * d.cin + ic) * d.k) * d.k;
            for (int ky = 0; ky < d.k; ++ky) {
                int oy_lo, oy_hi;
                out_range(ky, pad, stride, d.h, d.hout, &oy_lo, &oy_hi);
                for (int kx = 0; kx < d.k; ++kx) {
                    const float w = w_plane[ky * d.k + kx];
                    if (w == 0.0f) continue;
                    int ox_lo, ox_hi;
                    out_range(kx, pad, stride, d.w, d.wout, &ox_lo, &ox_hi);
                    const int shift = kx - pad;
                    for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                        const int iy = oy * stride + ky - pad;
                        float* gi_row = gi_plane + static_cast<std::size_t>(iy) * d.w;
                        const float* g_row = g_plane + static_cast<std::size_t>(oy) * d.wout;
                        if (stride == 1) {
                            for (int ox = ox_lo; ox <= ox_hi; ++ox) gi_row[ox + shift] += w * g_row[ox];
                        } else {
                            for (int ox = ox_lo; ox <= ox_hi; ++ox) gi_row[2 * ox + shift] += w * g_row[ox];
                        }
                    }
                }
            }
        }
    });

    return grads;
}

Tensor upsample_repeat(const Tensor& input, int factor) {
    if (input.rank() != 3) {
        throw ShapeError("upsample_repeat input must be rank 3, got " + shape_string(input.shape));
    }
    if (factor < 1) {
        throw ShapeError("upsample factor must be >= 1, got " + std::to_string(factor));
    }
    const int c = input.extent(0), h = input.extent(1), w = input.extent(2);
    Tensor out({c, h * factor, w * factor});
    for (int ch = 0; ch < c; ++ch) {
        for (int oy = 0; oy < h * factor; ++oy) {
            const float* in_row = &input.at(ch, oy / factor, 0);
            float* out_row = &out.at(ch, oy, 0);
            for (int ox = 0; ox < w * factor; ++ox) {
                out_row[ox] = in_row[ox / factor];
            }
        }
    }
    return out;
}

Tensor upsample_repeat_backward(const Tensor& grad_output, int factor) {
    if (grad_output.rank() != 3) {
        throw ShapeError("upsample_repeat_backward grad must be rank 3, got " +
                         shape_string(grad_output.shape));
    }
    if (factor < 1) {
        throw ShapeError("upsample factor must be >= 1, got " + std::to_string(factor));
    }
    const int c = grad_output.extent(0), gh = grad_output.extent(1), gw = grad_output.extent(2);
    if (gh % factor != 0 || gw % factor != 0) {
        throw ShapeError("upsample_repeat_backward extents " + shape_string(grad_output.shape) +
                         " not divisible by factor " + std::to_string(factor));
    }
    Tensor out({c, gh / factor, gw / factor});
    for (int ch = 0; ch < c; ++ch) {
        for (int gy = 0; gy < gh; ++gy) {
            const float* g_row = &grad_output.at(ch, gy, 0);
            float* out_row = &out.at(ch, gy / factor, 0);
            for (int gx = 0; gx < gw; ++gx) {
                out_row[gx / factor] += g_row[gx];
            }
        }
    }
    return out;
}

void adam_step(Tensor& param, const Tensor& grad, AdamState& state) {
    if (!param.same_shape(grad) || !param.same_shape(state.first_moment) ||
        !param.same_shape(state.second_moment)) {
        throw ShapeError("adam_step shape mismatch: param " + shape_string(param.shape) +
                         ", grad " + shape_string(grad.shape));
    }
    state.step_count += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
    for (std::size_t i = 0; i < param.data.size(); ++i) {
        const double g = grad.data[i];
        const double m = b1 * state.first_moment.data[i] + (1.0 - b1) * g;
        const double v = b2 * state.second_moment.data[i] + (1.0 - b2) * g * g;
        state.first_moment.data[i] = static_cast<float>(m);
        state.second_moment.data[i] = static_cast<float>(v);
        const double m_hat = m / bc1;
        const double v_hat = v / bc2;
        param.data[i] -= static_cast<float>(state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon));
    }
}

}  // namespace uscnn
