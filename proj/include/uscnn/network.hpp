#pragma once

#include <cstdint>
#include <vector>

#include "uscnn/image_ops.hpp"
#include "uscnn/tensor.hpp"

namespace uscnn {

/// Fully-convolutional encoder-decoder mapping a stacked grayscale frame
/// pair (2 x H x W) to a dense 2-channel flow field of the same extents.
///
/// The encoder halves the resolution at each stride-2 layer; the decoder
/// restores it with 2x row/column-repeat upsampling applied before the
/// layers listed in upsample_before.
struct EncoderDecoderNet {
    std::vector<ConvLayer> layers;
    std::vector<int> upsample_before;      // layer indices preceded by a 2x upsample
    std::vector<AdamState> adam_weights;   // one per layer
    std::vector<AdamState> adam_biases;

    bool upsampled_before(int layer_index) const;
    /// Smallest divisor the input extents must satisfy (2^max downsample depth).
    int required_divisor() const;
    std::size_t parameter_count() const;
};

/// Builds the 12-layer network: 4 stride-2 encoder layers down to a
/// 128-channel bottleneck, then 4 upsample stages back to full resolution,
/// final 2-channel linear layer. Weights are fan-in-scaled Gaussian,
/// biases zero; deterministic under the seed across platforms.
EncoderDecoderNet init_network(std::uint32_t seed);

/// Structural checks shared by init and checkpoint load: layer chain is
/// shape-consistent, spatial scale returns to 1:1, optimizer state matches
/// parameter shapes.
void validate_network(const EncoderDecoderNet& net);

/// Applies optimizer hyperparameters to every parameter's ADAM state.
void configure_optimizer(EncoderDecoderNet& net, double learning_rate, double beta1, double beta2,
                         double epsilon);

/// Activations recorded by forward() for the exact backward pass.
struct ForwardCache {
    std::vector<Tensor> inputs;    // input seen by each conv layer (post-upsample)
    std::vector<Tensor> preacts;   // pre-activation output of each conv layer
    bool valid = false;
};

/// Runs the network on a frame pair. Extents must be divisible by
/// required_divisor(); the error message reports the padding needed.
/// Channel 0 of the output is u, channel 1 is v.
FlowField forward(const EncoderDecoderNet& net, const Image& frame1, const Image& frame2,
                  ForwardCache* cache = nullptr);

struct ParamGrads {
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;
};

ParamGrads make_zero_grads(const EncoderDecoderNet& net);
void accumulate(ParamGrads& into, const ParamGrads& from);
void scale(ParamGrads& grads, float factor);

/// Exact gradients of the scalar loss with respect to every parameter,
/// given the per-pixel loss gradient at the flow output.
ParamGrads backward(const EncoderDecoderNet& net, const ForwardCache& cache,
                    const FlowField& grad_flow);

}  // namespace uscnn
