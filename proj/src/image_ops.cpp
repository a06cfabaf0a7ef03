#include "uscnn/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace uscnn {

namespace {

void require_same_extents(int h1, int w1, int h2, int w2, const char* op) {
    if (h1 != h2 || w1 != w2) {
        throw ShapeError(std::string(op) + ": extent mismatch, " + std::to_string(h1) + "x" +
                         std::to_string(w1) + " vs " + std::to_string(h2) + "x" + std::to_string(w2));
    }
}

void check_finite(const Tensor& t, const char* op) {
    if (!t.all_finite()) {
        throw NumericError(std::string(op) + " produced non-finite values");
    }
}

}  // namespace

Image::Image(Tensor t) : pixels(std::move(t)) {
    if (pixels.rank() != 3 || pixels.extent(0) != 1) {
        throw ShapeError("image tensor must be 1 x H x W, got " + shape_string(pixels.shape));
    }
}

FlowField::FlowField(Tensor u_, Tensor v_) : u(std::move(u_)), v(std::move(v_)) {
    if (u.rank() != 2 || !u.same_shape(v)) {
        throw ShapeError("flow components must be matching H x W tensors, got " +
                         shape_string(u.shape) + " and " + shape_string(v.shape));
    }
}

Derivatives spatiotemporal_derivatives(const Image& frame1, const Image& frame2) {
    const int h = frame1.height(), w = frame1.width();
    require_same_extents(h, w, frame2.height(), frame2.width(), "spatiotemporal_derivatives");

    Derivatives d{Tensor({h, w}), Tensor({h, w}), Tensor({h, w})};
    for (int y = 0; y < h; ++y) {
        const int y1 = std::min(y + 1, h - 1);
        for (int x = 0; x < w; ++x) {
            const int x1 = std::min(x + 1, w - 1);
            const float a00 = frame1.at(y, x), a01 = frame1.at(y, x1);
            const float a10 = frame1.at(y1, x), a11 = frame1.at(y1, x1);
            const float b00 = frame2.at(y, x), b01 = frame2.at(y, x1);
            const float b10 = frame2.at(y1, x), b11 = frame2.at(y1, x1);
            d.ix.at(y, x) = 0.25f * ((a01 - a00) + (a11 - a10) + (b01 - b00) + (b11 - b10));
            d.iy.at(y, x) = 0.25f * ((a10 - a00) + (a11 - a01) + (b10 - b00) + (b11 - b01));
            d.it.at(y, x) = 0.25f * ((b00 - a00) + (b10 - a10) + (b01 - a01) + (b11 - a11));
        }
    }
    check_finite(d.ix, "spatiotemporal_derivatives");
    check_finite(d.iy, "spatiotemporal_derivatives");
    check_finite(d.it, "spatiotemporal_derivatives");
    return d;
}

Image bilinear_warp(const Image& image, const FlowField& flow) {
    const int h = image.height(), w = image.width();
    require_same_extents(h, w, flow.height(), flow.width(), "bilinear_warp");

    Image out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float sx = static_cast<float>(x) + flow.u.at(y, x);
            float sy = static_cast<float>(y) + flow.v.at(y, x);
            sx = std::clamp(sx, 0.0f, static_cast<float>(w - 1));
            sy = std::clamp(sy, 0.0f, static_cast<float>(h - 1));
            const int x0 = static_cast<int>(sx);
            const int y0 = static_cast<int>(sy);
            const int x1 = std::min(x0 + 1, w - 1);
            const int y1 = std::min(y0 + 1, h - 1);
            const float fx = sx - static_cast<float>(x0);
            const float fy = sy - static_cast<float>(y0);
            const float top = image.at(y0, x0) + fx * (image.at(y0, x1) - image.at(y0, x0));
            const float bot = image.at(y1, x0) + fx * (image.at(y1, x1) - image.at(y1, x0));
            out.at(y, x) = top + fy * (bot - top);
        }
    }
    check_finite(out.pixels, "bilinear_warp");
    return out;
}

Image pyramid_downsample(const Image& image) {
    const int h = image.height(), w = image.width();
    if (h < 2 || w < 2) {
        throw ShapeError("pyramid_downsample needs extents >= 2, got " + std::to_string(h) + "x" +
                         std::to_string(w));
    }
    static constexpr float kTap[5] = {1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16, 1.0f / 16};
    const int ho = (h + 1) / 2, wo = (w + 1) / 2;

    // Horizontal pass, evaluated only at the columns that survive decimation.
    std::vector<float> tmp(static_cast<std::size_t>(h) * wo);
    for (int y = 0; y < h; ++y) {
        for (int xo = 0; xo < wo; ++xo) {
            float acc = 0.0f;
            for (int k = 0; k < 5; ++k) {
                const int xs = std::clamp(2 * xo + k - 2, 0, w - 1);
                acc += kTap[k] * image.at(y, xs);
            }
            tmp[static_cast<std::size_t>(y) * wo + xo] = acc;
        }
    }
    Image out(ho, wo);
    for (int yo = 0; yo < ho; ++yo) {
        for (int xo = 0; xo < wo; ++xo) {
            float acc = 0.0f;
            for (int k = 0; k < 5; ++k) {
                const int ys = std::clamp(2 * yo + k - 2, 0, h - 1);
                acc += kTap[k] * tmp[static_cast<std::size_t>(ys) * wo + xo];
            }
            out.at(yo, xo) = acc;
        }
    }
    check_finite(out.pixels, "pyramid_downsample");
    return out;
}

namespace {

Tensor median_filter_plane(const Tensor& plane, int radius) {
    const int h = plane.extent(0), w = plane.extent(1);
    const int side = 2 * radius + 1;
    Tensor out({h, w});
    std::vector<float> window(static_cast<std::size_t>(side) * side);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::size_t n = 0;
            for (int dy = -radius; dy <= radius; ++dy) {
                const int ys = std::clamp(y + dy, 0, h - 1);
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int xs = std::clamp(x + dx, 0, w - 1);
                    window[n++] = plane.at(ys, xs);
                }
            }
            auto mid = window.begin() + static_cast<std::ptrdiff_t>(n / 2);
            std::nth_element(window.begin(), mid, window.begin() + static_cast<std::ptrdiff_t>(n));
            out.at(y, x) = *mid;
        }
    }
    return out;
}

}  // namespace

FlowField median_filter_flow(const FlowField& flow, int radius) {
    if (radius < 1) {
        throw ShapeError("median filter radius must be >= 1, got " + std::to_string(radius));
    }
    FlowField out(flow.height(), flow.width());
    out.u = median_filter_plane(flow.u, radius);
    out.v = median_filter_plane(flow.v, radius);
    check_finite(out.u, "median_filter_flow");
    check_finite(out.v, "median_filter_flow");
    return out;
}

FlowField upsample_flow(const FlowField& flow) {
    const int h = flow.height(), w = flow.width();
    FlowField out(2 * h, 2 * w);
    for (int y = 0; y < 2 * h; ++y) {
        for (int x = 0; x < 2 * w; ++x) {
            out.u.at(y, x) = 2.0f * flow.u.at(y / 2, x / 2);
            out.v.at(y, x) = 2.0f * flow.v.at(y / 2, x / 2);
        }
    }
    check_finite(out.u, "upsample_flow");
    check_finite(out.v, "upsample_flow");
    return out;
}

}  // namespace uscnn
