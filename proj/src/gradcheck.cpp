#include "uscnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "uscnn/loss.hpp"
#include "uscnn/random.hpp"

namespace uscnn {

namespace {

double rel_error(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Charbonnier flow-constraint term restated in 64-bit; the oracle side of
// the finite-difference comparison.
double charbonnier_term(double u, double v, double ix, double iy, double it, double eps) {
    const double r = u * ix + v * iy + it;
    return std::sqrt(r * r + eps);
}

Image smooth_random_image(int h, int w, RandomSource& rand) {
    Image noise(h, w);
    for (float& p : noise.pixels.data) {
        p = static_cast<float>(rand.uniform());
    }
    // Two box-blur passes smooth the noise enough to give well-scaled
    // derivatives without flattening them.
    Image out = noise;
    for (int pass = 0; pass < 2; ++pass) {
        Image next(h, w);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                float acc = 0.0f;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        acc += out.at(std::clamp(y + dy, 0, h - 1), std::clamp(x + dx, 0, w - 1));
                    }
                }
                next.at(y, x) = acc / 9.0f;
            }
        }
        out = next;
    }
    return out;
}

}  // namespace

double loss_gradient_max_rel_error(std::uint32_t seed, int instances, int extent,
                                   double charbonnier_epsilon, double inject_error) {
    const double step = 1e-4;
    RandomSource rand(seed);
    double max_rel = 0.0;
    for (int inst = 0; inst < instances; ++inst) {
        const int n = extent;
        FlowField flow(n, n);
        Tensor ix({n, n}), iy({n, n}), it({n, n});
        for (int i = 0; i < n * n; ++i) {
            flow.u.data[i] = static_cast<float>(rand.uniform(-2.0, 2.0));
            flow.v.data[i] = static_cast<float>(rand.uniform(-2.0, 2.0));
            ix.data[i] = static_cast<float>(rand.uniform(-1.0, 1.0));
            iy.data[i] = static_cast<float>(rand.uniform(-1.0, 1.0));
            it.data[i] = static_cast<float>(rand.uniform(-0.5, 0.5));
        }
        const LossConfig cfg{charbonnier_epsilon};
        const FlowField grad = ofc_loss_grad(flow, ix, iy, it, cfg);

        // The loss is a sum of per-pixel terms, so the central difference of
        // the total with respect to u(p) reduces to the difference of term p.
        for (int i = 0; i < n * n; ++i) {
            const double u = flow.u.data[i], v = flow.v.data[i];
            const double gx = ix.data[i], gy = iy.data[i], gt = it.data[i];
            const double fd_u = (charbonnier_term(u + step, v, gx, gy, gt, charbonnier_epsilon) -
                                 charbonnier_term(u - step, v, gx, gy, gt, charbonnier_epsilon)) /
                                (2.0 * step);
            const double fd_v = (charbonnier_term(u, v + step, gx, gy, gt, charbonnier_epsilon) -
                                 charbonnier_term(u, v - step, gx, gy, gt, charbonnier_epsilon)) /
                                (2.0 * step);
            max_rel = std::max(max_rel, rel_error(grad.u.data[i] + inject_error, fd_u, 1e-6));
            max_rel = std::max(max_rel, rel_error(grad.v.data[i] + inject_error, fd_v, 1e-6));
        }
    }
    return max_rel;
}

EncoderDecoderNet make_reduced_network(std::uint32_t seed) {
    RandomSource rand(seed);
    EncoderDecoderNet net;
    const struct {
        int kernel, in, out, stride;
        bool act, upsample;
    } table[3] = {
        {3, 2, 8, 2, true, false},
        {3, 8, 8, 1, true, false},
        {3, 8, 2, 1, false, true},
    };
    for (int i = 0; i < 3; ++i) {
        ConvLayer layer(table[i].out, table[i].in, table[i].kernel, table[i].stride, table[i].act);
        const double fan_in = static_cast<double>(layer.in_channels()) * layer.kernel() * layer.kernel();
        const double gain = layer.has_activation ? 2.0 / (1.0 + double(kLeakySlope) * kLeakySlope) : 1.0;
        const double stddev = std::sqrt(gain / fan_in);
        for (float& w : layer.weights.data) {
            w = static_cast<float>(rand.normal() * stddev);
        }
        if (table[i].upsample) net.upsample_before.push_back(i);
        net.adam_weights.emplace_back(layer.weights.shape);
        net.adam_biases.emplace_back(layer.bias.shape);
        net.layers.push_back(std::move(layer));
    }
    validate_network(net);
    return net;
}

double end_to_end_max_rel_error(std::uint32_t seed, double inject_error) {
    const double step = 1e-2;
    RandomSource rand(seed);
    EncoderDecoderNet net = make_reduced_network(seed ^ 0x9e3779b9u);

    const int n = 8;
    const Image frame1 = smooth_random_image(n, n, rand);
    const Image frame2 = smooth_random_image(n, n, rand);
    const Derivatives d = spatiotemporal_derivatives(frame1, frame2);
    const LossConfig cfg{1e-3};

    auto composed_loss = [&]() {
        return ofc_loss(forward(net, frame1, frame2), d.ix, d.iy, d.it, cfg);
    };

    ForwardCache cache;
    const FlowField flow = forward(net, frame1, frame2, &cache);
    const FlowField grad_flow = ofc_loss_grad(flow, d.ix, d.iy, d.it, cfg);
    const ParamGrads grads = backward(net, cache, grad_flow);

    double max_rel = 0.0;
    auto check_tensor = [&](Tensor& param, const Tensor& analytic) {
        for (std::size_t i = 0; i < param.data.size(); ++i) {
            const float saved = param.data[i];
            param.data[i] = static_cast<float>(double(saved) + step);
            const double plus = composed_loss();
            const double actual_plus = param.data[i];
            param.data[i] = static_cast<float>(double(saved) - step);
            const double minus = composed_loss();
            const double actual_minus = param.data[i];
            param.data[i] = saved;
            // Divide by the realized float32 step, not the nominal one.
            const double fd = (plus - minus) / (actual_plus - actual_minus);
            max_rel = std::max(max_rel, rel_error(double(analytic.data[i]) + inject_error, fd, 1e-4));
        }
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        check_tensor(net.layers[l].weights, grads.weights[l]);
        check_tensor(net.layers[l].bias, grads.biases[l]);
    }
    return max_rel;
}

}  // namespace uscnn
