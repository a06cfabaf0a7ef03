#pragma once

#include <algorithm>
#include <cmath>

#include "uscnn/image_ops.hpp"
#include "uscnn/random.hpp"
#include "uscnn/tensor.hpp"

namespace testutil {

inline uscnn::Tensor random_tensor(std::vector<int> shape, uscnn::RandomSource& rand,
                                   double lo = -1.0, double hi = 1.0) {
    uscnn::Tensor t(std::move(shape));
    for (float& v : t.data) {
        v = static_cast<float>(rand.uniform(lo, hi));
    }
    return t;
}

inline uscnn::Image random_image(int h, int w, uscnn::RandomSource& rand) {
    uscnn::Image img(h, w);
    for (float& v : img.pixels.data) {
        v = static_cast<float>(rand.uniform());
    }
    return img;
}

// Repeated 3x3 box blur; sigma grows with passes. Intentionally unrelated to
// the library's binomial pyramid filter.
inline uscnn::Image blur(const uscnn::Image& src, int passes) {
    const int h = src.height(), w = src.width();
    uscnn::Image out = src;
    for (int pass = 0; pass < passes; ++pass) {
        uscnn::Image next(h, w);
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

inline uscnn::Image smooth_random_image(int h, int w, uscnn::RandomSource& rand, int passes = 2) {
    return blur(random_image(h, w, rand), passes);
}

inline uscnn::FlowField constant_flow(int h, int w, float u, float v) {
    uscnn::FlowField f(h, w);
    std::fill(f.u.data.begin(), f.u.data.end(), u);
    std::fill(f.v.data.begin(), f.v.data.end(), v);
    return f;
}

// Samples `master` bilinearly at (x + off_x, y + off_y) on an h x w grid.
// Used to synthesize exactly-shifted frame pairs from a larger scene.
inline uscnn::Image sample_shifted(const uscnn::Image& master, int h, int w, double off_y,
                                   double off_x) {
    uscnn::Image out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double sx = x + off_x;
            double sy = y + off_y;
            sx = std::clamp(sx, 0.0, double(master.width() - 1));
            sy = std::clamp(sy, 0.0, double(master.height() - 1));
            const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
            const int x1 = std::min(x0 + 1, master.width() - 1);
            const int y1 = std::min(y0 + 1, master.height() - 1);
            const double fx = sx - x0, fy = sy - y0;
            const double top = master.at(y0, x0) + fx * (master.at(y0, x1) - master.at(y0, x0));
            const double bot = master.at(y1, x0) + fx * (master.at(y1, x1) - master.at(y1, x0));
            out.at(y, x) = static_cast<float>(top + fy * (bot - top));
        }
    }
    return out;
}

// Frame pair of a smooth scene undergoing a global shift (flow_u, flow_v):
// content at (x, y) in frame1 appears at (x + flow_u, y + flow_v) in frame2.
// Both frames are genuine windows into the same master texture, so the true
// flow is exactly constant with no border artifacts.
struct ShiftedPair {
    uscnn::Image frame1;
    uscnn::Image frame2;
    double flow_u;
    double flow_v;
};

inline ShiftedPair make_shifted_pair(int h, int w, double flow_u, double flow_v,
                                     uscnn::RandomSource& rand, int blur_passes = 3) {
    const int margin = 8;
    const uscnn::Image master = smooth_random_image(h + 2 * margin, w + 2 * margin, rand, blur_passes);
    ShiftedPair p;
    p.frame1 = sample_shifted(master, h, w, margin, margin);
    p.frame2 = sample_shifted(master, h, w, margin - flow_v, margin - flow_u);
    p.flow_u = flow_u;
    p.flow_v = flow_v;
    return p;
}

inline double max_abs_diff(const uscnn::Tensor& a, const uscnn::Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        m = std::max(m, std::abs(double(a.data[i]) - b.data[i]));
    }
    return m;
}

inline double rel_error(double a, double b, double floor = 1e-12) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace testutil
