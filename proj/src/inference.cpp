#include "uscnn/inference.hpp"

#include <algorithm>
#include <cmath>

#include "uscnn/loss.hpp"

namespace uscnn {

namespace {

Image pad_replicate(const Image& img, int target_h, int target_w) {
    const int h = img.height(), w = img.width();
    if (h == target_h && w == target_w) return img;
    Image out(target_h, target_w);
    for (int y = 0; y < target_h; ++y) {
        const int ys = std::min(y, h - 1);
        for (int x = 0; x < target_w; ++x) {
            out.at(y, x) = img.at(ys, std::min(x, w - 1));
        }
    }
    return out;
}

FlowField crop_flow(const FlowField& flow, int h, int w) {
    if (flow.height() == h && flow.width() == w) return flow;
    FlowField out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            out.u.at(y, x) = flow.u.at(y, x);
            out.v.at(y, x) = flow.v.at(y, x);
        }
    }
    return out;
}

void add_flow(FlowField& total, const FlowField& delta) {
    for (std::size_t i = 0; i < total.u.data.size(); ++i) {
        total.u.data[i] += delta.u.data[i];
        total.v.data[i] += delta.v.data[i];
    }
}

int resolve_scales(const InferenceConfig& cfg, int h, int w) {
    if (cfg.num_scales < 0 || cfg.iterations_per_scale < 1 || cfg.median_radius < 1) {
        throw ShapeError("inference config requires num_scales >= 1 (or 0 for auto), "
                         "iterations_per_scale >= 1, median_radius >= 1");
    }
    return cfg.num_scales == 0 ? auto_num_scales(h, w) : cfg.num_scales;
}

}  // namespace

int auto_num_scales(int height, int width) {
    int k = 0;
    int side = std::min(height, width);
    while (side / 2 >= 32) {
        side /= 2;
        ++k;
    }
    return k + 1;
}

FlowField estimate_flow(const FlowPredictor& predictor, const Image& frame1, const Image& frame2,
                        const InferenceConfig& cfg, const IterationObserver& observer) {
    const int h = frame1.height(), w = frame1.width();
    if (frame2.height() != h || frame2.width() != w) {
        throw ShapeError("estimate_flow: frame extents differ, " + std::to_string(h) + "x" +
                         std::to_string(w) + " vs " + std::to_string(frame2.height()) + "x" +
                         std::to_string(frame2.width()));
    }
    const int scales = resolve_scales(cfg, h, w);

    // Pad so every level stays divisible by 16.
    const int unit = 16 << (scales - 1);
    const int ph = (h + unit - 1) / unit * unit;
    const int pw = (w + unit - 1) / unit * unit;

    std::vector<Image> pyr1(static_cast<std::size_t>(scales));
    std::vector<Image> pyr2(static_cast<std::size_t>(scales));
    pyr1[0] = pad_replicate(frame1, ph, pw);
    pyr2[0] = pad_replicate(frame2, ph, pw);
    for (int level = 1; level < scales; ++level) {
        pyr1[level] = pyramid_downsample(pyr1[level - 1]);
        pyr2[level] = pyramid_downsample(pyr2[level - 1]);
    }

    const int coarsest = scales - 1;
    FlowField total(pyr1[coarsest].height(), pyr1[coarsest].width());
    Image warped2 = pyr2[coarsest];
    for (int level = coarsest; level >= 0; --level) {
        for (int iter = 0; iter < cfg.iterations_per_scale; ++iter) {
            FlowField delta = predictor(pyr1[level], warped2);
            delta = median_filter_flow(delta, cfg.median_radius);
            add_flow(total, delta);
            warped2 = bilinear_warp(pyr2[level], total);
            if (observer) {
                observer(level, iter, total, pyr1[level], pyr2[level], warped2);
            }
        }
        if (level > 0) {
            total = upsample_flow(total);
            warped2 = bilinear_warp(pyr2[level - 1], total);
        }
    }
    return crop_flow(total, h, w);
}

FlowField estimate_flow(const EncoderDecoderNet& net, const Image& frame1, const Image& frame2,
                        const InferenceConfig& cfg) {
    FlowPredictor predictor = [&net](const Image& f1, const Image& warped2) {
        return forward(net, f1, warped2);
    };
    return estimate_flow(predictor, frame1, frame2, cfg);
}

std::vector<IterationRecord> iteration_trace(const EncoderDecoderNet& net, const Image& frame1,
                                             const Image& frame2, const InferenceConfig& cfg,
                                             FlowField* flow_out) {
    std::vector<IterationRecord> records;
    IterationObserver observer = [&records](int level, int iteration, const FlowField&,
                                            const Image& frame1_level, const Image&,
                                            const Image& warped2) {
        const double pixels = static_cast<double>(frame1_level.height()) * frame1_level.width();
        records.push_back({level, iteration, photometric_loss(frame1_level, warped2) / pixels});
    };
    FlowPredictor predictor = [&net](const Image& f1, const Image& warped2) {
        return forward(net, f1, warped2);
    };
    FlowField flow = estimate_flow(predictor, frame1, frame2, cfg, observer);
    if (flow_out) *flow_out = std::move(flow);
    return records;
}

}  // namespace uscnn
