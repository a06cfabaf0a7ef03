#pragma once

#include "uscnn/tensor.hpp"

namespace uscnn {

/// Grayscale frame with intensities in [0, 1], stored as a 1 x H x W tensor.
struct Image {
    Tensor pixels;

    Image() = default;
    Image(int height, int width) : pixels({1, height, width}) {}
    explicit Image(Tensor t);

    int height() const { return pixels.extent(1); }
    int width() const { return pixels.extent(2); }
    float& at(int y, int x) { return pixels.at(0, y, x); }
    float at(int y, int x) const { return pixels.at(0, y, x); }
};

/// Per-pixel displacement in pixel units: u horizontal, v vertical,
/// each an H x W tensor.
struct FlowField {
    Tensor u;
    Tensor v;

    FlowField() = default;
    FlowField(int height, int width) : u({height, width}), v({height, width}) {}
    FlowField(Tensor u_, Tensor v_);

    int height() const { return u.extent(0); }
    int width() const { return u.extent(1); }
};

struct Derivatives {
    Tensor ix;
    Tensor iy;
    Tensor it;
};

/// Horn-Schunck cube estimates: each derivative is the average of the four
/// forward differences over the 2x2x2 neighbourhood spanning both frames.
/// Boundary pixels use edge-replicated neighbours.
Derivatives spatiotemporal_derivatives(const Image& frame1, const Image& frame2);

/// Samples `image` bilinearly at (x + u, y + v); coordinates outside the
/// image are clamped to the border.
Image bilinear_warp(const Image& image, const FlowField& flow);

/// 5-tap binomial low-pass (1/16 * [1 4 6 4 1], separable, edge-clamped)
/// followed by factor-2 decimation. Output extents are ceil(H/2), ceil(W/2).
Image pyramid_downsample(const Image& image);

/// Replaces u and v independently by the median over the (2*radius+1)^2
/// window, edge-clamped.
FlowField median_filter_flow(const FlowField& flow, int radius);

/// Doubles the spatial extents by row/column repetition and doubles the
/// u, v values so displacements stay in pixel units of the finer grid.
FlowField upsample_flow(const FlowField& flow);

}  // namespace uscnn
