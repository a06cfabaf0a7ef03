#include "uscnn/network.hpp"

#include <algorithm>
#include <cmath>

#include "uscnn/random.hpp"

namespace uscnn {

namespace {

void fill_fan_in_scaled(ConvLayer& layer, RandomSource& rand) {
    const double fan_in = static_cast<double>(layer.in_channels()) * layer.kernel() * layer.kernel();
    // Rectifier gain for hidden layers, unit gain for the linear output.
    const double gain = layer.has_activation ? 2.0 / (1.0 + double(kLeakySlope) * kLeakySlope) : 1.0;
    const double stddev = std::sqrt(gain / fan_in);
    for (float& w : layer.weights.data) {
        w = static_cast<float>(rand.normal() * stddev);
    }
}

}  // namespace

bool EncoderDecoderNet::upsampled_before(int layer_index) const {
    return std::find(upsample_before.begin(), upsample_before.end(), layer_index) !=
           upsample_before.end();
}

int EncoderDecoderNet::required_divisor() const {
    int scale = 1, max_scale = 1;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (upsampled_before(static_cast<int>(i))) scale /= 2;
        if (layers[i].stride == 2) scale *= 2;
        max_scale = std::max(max_scale, scale);
    }
    return max_scale;
}

std::size_t EncoderDecoderNet::parameter_count() const {
    std::size_t n = 0;
    for (const ConvLayer& l : layers) {
        n += l.weights.size() + l.bias.size();
    }
    return n;
}

EncoderDecoderNet init_network(std::uint32_t seed) {
    struct Spec {
        int kernel, in, out, stride;
        bool act;
        bool upsample_before;
    };
    static constexpr Spec kTable[12] = {
        {7, 2, 16, 2, true, false},     // L1
        {5, 16, 32, 2, true, false},    // L2
        {3, 32, 64, 2, true, false},    // L3
        {3, 64, 128, 2, true, false},   // L4
        {3, 128, 128, 1, true, false},  // L5
        {3, 128, 128, 1, true, false},  // L6
        {3, 128, 64, 1, true, true},    // L7
        {3, 64, 32, 1, true, true},     // L8
        {3, 32, 16, 1, true, true},     // L9
        {3, 16, 16, 1, true, true},     // L10
        {3, 16, 16, 1, true, false},    // L11
        {3, 16, 2, 1, false, false},    // L12
    };

    EncoderDecoderNet net;
    RandomSource rand(seed);
    for (int i = 0; i < 12; ++i) {
        const Spec& s = kTable[i];
        ConvLayer layer(s.out, s.in, s.kernel, s.stride, s.act);
        fill_fan_in_scaled(layer, rand);
        if (s.upsample_before) net.upsample_before.push_back(i);
        net.adam_weights.emplace_back(layer.weights.shape);
        net.adam_biases.emplace_back(layer.bias.shape);
        net.layers.push_back(std::move(layer));
    }
    validate_network(net);
    return net;
}

void validate_network(const EncoderDecoderNet& net) {
    if (net.layers.empty()) {
        throw ShapeError("network has no layers");
    }
    if (net.adam_weights.size() != net.layers.size() || net.adam_biases.size() != net.layers.size()) {
        throw ShapeError("network optimizer state count does not match layer count");
    }
    int scale = 1;
    int channels = net.layers.front().in_channels();
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const ConvLayer& l = net.layers[i];
        if (l.in_channels() != channels) {
            throw ShapeError("layer " + std::to_string(i) + " expects " +
                             std::to_string(l.in_channels()) + " input channels, previous layer yields " +
                             std::to_string(channels));
        }
        if (l.kernel() % 2 == 0 || (l.stride != 1 && l.stride != 2) || l.padding != (l.kernel() - 1) / 2) {
            throw ShapeError("layer " + std::to_string(i) + " violates kernel/stride/padding constraints");
        }
        if (net.upsampled_before(static_cast<int>(i))) {
            if (scale % 2 != 0) {
                throw ShapeError("upsample before layer " + std::to_string(i) +
                                 " would overshoot the input resolution");
            }
            scale /= 2;
        }
        if (l.stride == 2) scale *= 2;
        if (!net.adam_weights[i].first_moment.same_shape(l.weights) ||
            !net.adam_biases[i].first_moment.same_shape(l.bias)) {
            throw ShapeError("optimizer state shape mismatch at layer " + std::to_string(i));
        }
        channels = l.out_channels();
    }
    if (scale != 1) {
        throw ShapeError("network does not restore input resolution (net scale " +
                         std::to_string(scale) + ":1)");
    }
}

void configure_optimizer(EncoderDecoderNet& net, double learning_rate, double beta1, double beta2,
                         double epsilon) {
    for (AdamState& s : net.adam_weights) s.set_hyperparams(learning_rate, beta1, beta2, epsilon);
    for (AdamState& s : net.adam_biases) s.set_hyperparams(learning_rate, beta1, beta2, epsilon);
}

FlowField forward(const EncoderDecoderNet& net, const Image& frame1, const Image& frame2,
                  ForwardCache* cache) {
    const int h = frame1.height(), w = frame1.width();
    if (frame2.height() != h || frame2.width() != w) {
        throw ShapeError("forward: frame extents differ, " + std::to_string(h) + "x" +
                         std::to_string(w) + " vs " + std::to_string(frame2.height()) + "x" +
                         std::to_string(frame2.width()));
    }
    const int div = net.required_divisor();
    if (h % div != 0 || w % div != 0) {
        const int ph = (h + div - 1) / div * div;
        const int pw = (w + div - 1) / div * div;
        throw ShapeError("forward: extents " + std::to_string(h) + "x" + std::to_string(w) +
                         " not divisible by " + std::to_string(div) + "; pad to " +
                         std::to_string(ph) + "x" + std::to_string(pw));
    }
    if (net.layers.front().in_channels() != 2) {
        throw ShapeError("forward: first layer must take 2 stacked frames");
    }

    Tensor x({2, h, w});
    std::copy(frame1.pixels.data.begin(), frame1.pixels.data.end(), x.data.begin());
    std::copy(frame2.pixels.data.begin(), frame2.pixels.data.end(),
              x.data.begin() + static_cast<std::ptrdiff_t>(h) * w);

    if (cache) {
        cache->inputs.assign(net.layers.size(), Tensor());
        cache->preacts.assign(net.layers.size(), Tensor());
        cache->valid = false;
    }
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (net.upsampled_before(static_cast<int>(i))) {
            x = upsample_repeat(x, 2);
        }
        Tensor preact;
        Tensor y = conv2d_forward(x, net.layers[i], cache ? &preact : nullptr);
        if (cache) {
            cache->inputs[i] = std::move(x);
            cache->preacts[i] = std::move(preact);
        }
        x = std::move(y);
    }
    if (cache) cache->valid = true;

    const int oc = x.extent(0), oh = x.extent(1), ow = x.extent(2);
    if (oc != 2 || oh != h || ow != w) {
        throw ShapeError("forward: network output " + shape_string(x.shape) +
                         " is not a 2-channel field of the input extents");
    }
    FlowField flow(h, w);
    std::copy(x.data.begin(), x.data.begin() + static_cast<std::ptrdiff_t>(h) * w, flow.u.data.begin());
    std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(h) * w, x.data.end(), flow.v.data.begin());
    return flow;
}

ParamGrads make_zero_grads(const EncoderDecoderNet& net) {
    ParamGrads g;
    g.weights.reserve(net.layers.size());
    g.biases.reserve(net.layers.size());
    for (const ConvLayer& l : net.layers) {
        g.weights.push_back(zeros_like(l.weights));
        g.biases.push_back(zeros_like(l.bias));
    }
    return g;
}

void accumulate(ParamGrads& into, const ParamGrads& from) {
    for (std::size_t i = 0; i < into.weights.size(); ++i) {
        for (std::size_t j = 0; j < into.weights[i].data.size(); ++j) {
            into.weights[i].data[j] += from.weights[i].data[j];
        }
        for (std::size_t j = 0; j < into.biases[i].data.size(); ++j) {
            into.biases[i].data[j] += from.biases[i].data[j];
        }
    }
}

void scale(ParamGrads& grads, float factor) {
    for (Tensor& t : grads.weights) {
        for (float& v : t.data) v *= factor;
    }
    for (Tensor& t : grads.biases) {
        for (float& v : t.data) v *= factor;
    }
}

ParamGrads backward(const EncoderDecoderNet& net, const ForwardCache& cache,
                    const FlowField& grad_flow) {
    if (!cache.valid || cache.inputs.size() != net.layers.size()) {
        throw StateError("backward called without a matching forward cache");
    }
    const int h = grad_flow.height(), w = grad_flow.width();
    Tensor g({2, h, w});
    std::copy(grad_flow.u.data.begin(), grad_flow.u.data.end(), g.data.begin());
    std::copy(grad_flow.v.data.begin(), grad_flow.v.data.end(),
              g.data.begin() + static_cast<std::ptrdiff_t>(h) * w);

    ParamGrads grads;
    grads.weights.resize(net.layers.size());
    grads.biases.resize(net.layers.size());
    for (int i = static_cast<int>(net.layers.size()) - 1; i >= 0; --i) {
        ConvGrads cg = conv2d_backward(cache.inputs[i], net.layers[i], g, cache.preacts[i]);
        grads.weights[i] = std::move(cg.weights);
        grads.biases[i] = std::move(cg.bias);
        g = std::move(cg.input);
        if (net.upsampled_before(i)) {
            g = upsample_repeat_backward(g, 2);
        }
    }
    return grads;
}

}  // namespace uscnn
