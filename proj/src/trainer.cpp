#include "uscnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>

#include "uscnn/flow_io.hpp"
#include "uscnn/loss.hpp"

namespace uscnn {

namespace fs = std::filesystem;

void validate_config(const TrainConfig& cfg) {
    if (cfg.crop_height % 16 != 0 || cfg.crop_width % 16 != 0 || cfg.crop_height < 16 ||
        cfg.crop_width < 16) {
        throw ShapeError("crop extents must be positive multiples of 16, got " +
                         std::to_string(cfg.crop_height) + "x" + std::to_string(cfg.crop_width));
    }
    if (cfg.batch_size < 1) throw ShapeError("batch size must be >= 1");
    if (cfg.epochs < 1) throw ShapeError("epoch count must be >= 1");
    if (!(cfg.charbonnier_epsilon > 0.0)) throw ShapeError("charbonnier epsilon must be > 0");
    if (!(cfg.learning_rate >= 0.0)) throw ShapeError("learning rate must be >= 0");
}

namespace {

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".pgm" || ext == ".png";
}

void collect_sequence(const fs::path& dir, FramePairDataset& out) {
    std::vector<fs::path> frames;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        if (has_image_extension(entry.path())) {
            frames.push_back(entry.path());
        } else {
            std::fprintf(stderr, "warning: skipping non-image file %s\n",
                         entry.path().string().c_str());
            out.skipped_files += 1;
        }
    }
    std::sort(frames.begin(), frames.end());
    for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
        out.pairs.push_back({frames[i], frames[i + 1]});
    }
}

}  // namespace

FramePairDataset ingest_pairs(const fs::path& root) {
    if (!fs::exists(root) || !fs::is_directory(root)) {
        throw DatasetError("dataset root is not a directory: " + root.string());
    }
    FramePairDataset ds;
    ds.root = root;
    collect_sequence(root, ds);
    std::vector<fs::path> subdirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) subdirs.push_back(entry.path());
    }
    std::sort(subdirs.begin(), subdirs.end());
    for (const fs::path& sub : subdirs) {
        collect_sequence(sub, ds);
    }
    if (ds.pairs.empty()) {
        throw DatasetError("no frame pairs found under " + root.string());
    }
    return ds;
}

namespace {

// Explicit bounded draw and Fisher-Yates keep the schedule identical across
// standard libraries for a fixed seed.
std::uint32_t draw_below(std::mt19937& rng, std::uint32_t bound) {
    return bound <= 1 ? 0 : rng() % bound;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937& rng) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[draw_below(rng, static_cast<std::uint32_t>(i))]);
    }
    return order;
}

Image crop(const Image& img, int y0, int x0, int ch, int cw) {
    Image out(ch, cw);
    for (int y = 0; y < ch; ++y) {
        for (int x = 0; x < cw; ++x) {
            out.at(y, x) = img.at(y0 + y, x0 + x);
        }
    }
    return out;
}

// Largest multiple of 16 that fits both the frame and the requested crop.
int effective_crop(int frame_extent, int requested) {
    const int fit = std::min(frame_extent, requested) / 16 * 16;
    if (fit < 16) {
        throw ShapeError("frame extent " + std::to_string(frame_extent) +
                         " too small for a 16-pixel crop");
    }
    return fit;
}

double accumulate_pair(EncoderDecoderNet& net, const Image& f1, const Image& f2,
                       const TrainConfig& cfg, ParamGrads& into) {
    const Derivatives d = spatiotemporal_derivatives(f1, f2);
    ForwardCache cache;
    const FlowField flow = forward(net, f1, f2, &cache);
    const LossConfig loss_cfg{cfg.charbonnier_epsilon};
    const double pixels = static_cast<double>(f1.height()) * f1.width();
    const double loss = ofc_loss(flow, d.ix, d.iy, d.it, loss_cfg) / pixels;
    if (!std::isfinite(loss)) {
        throw NumericError("non-finite training loss on a " + std::to_string(f1.height()) + "x" +
                           std::to_string(f1.width()) + " pair");
    }
    FlowField grad = ofc_loss_grad(flow, d.ix, d.iy, d.it, loss_cfg);
    const float inv_pixels = static_cast<float>(1.0 / pixels);
    for (float& g : grad.u.data) g *= inv_pixels;
    for (float& g : grad.v.data) g *= inv_pixels;
    accumulate(into, backward(net, cache, grad));
    return loss;
}

void apply_adam(EncoderDecoderNet& net, const ParamGrads& grads) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        adam_step(net.layers[i].weights, grads.weights[i], net.adam_weights[i]);
        adam_step(net.layers[i].bias, grads.biases[i], net.adam_biases[i]);
    }
    for (const ConvLayer& l : net.layers) {
        if (!l.weights.all_finite() || !l.bias.all_finite()) {
            throw NumericError("non-finite network parameters after optimizer step");
        }
    }
}

}  // namespace

double train_step(EncoderDecoderNet& net, const Image& frame1, const Image& frame2,
                  const TrainConfig& cfg) {
    configure_optimizer(net, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon_adam);
    ParamGrads grads = make_zero_grads(net);
    const double loss = accumulate_pair(net, frame1, frame2, cfg, grads);
    apply_adam(net, grads);
    return loss;
}

double train_batch(EncoderDecoderNet& net, const std::vector<const Image*>& frames1,
                   const std::vector<const Image*>& frames2, const TrainConfig& cfg) {
    if (frames1.empty() || frames1.size() != frames2.size()) {
        throw ShapeError("train_batch needs matching non-empty frame lists");
    }
    configure_optimizer(net, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon_adam);
    ParamGrads grads = make_zero_grads(net);
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < frames1.size(); ++i) {
        loss_sum += accumulate_pair(net, *frames1[i], *frames2[i], cfg, grads);
    }
    const float inv_batch = 1.0f / static_cast<float>(frames1.size());
    scale(grads, inv_batch);
    apply_adam(net, grads);
    return loss_sum / static_cast<double>(frames1.size());
}

void train(EncoderDecoderNet& net, const FramePairDataset& data, const TrainConfig& cfg,
           const StepSink& on_step) {
    validate_config(cfg);
    if (data.pairs.empty()) {
        throw DatasetError("training dataset is empty");
    }
    std::mt19937 rng(cfg.seed);
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::vector<std::size_t> order = shuffled_indices(data.pairs.size(), rng);
        std::vector<Image> batch1, batch2;
        auto flush = [&] {
            if (batch1.empty()) return;
            std::vector<const Image*> p1, p2;
            for (std::size_t i = 0; i < batch1.size(); ++i) {
                p1.push_back(&batch1[i]);
                p2.push_back(&batch2[i]);
            }
            const double loss = train_batch(net, p1, p2, cfg);
            if (on_step) on_step(step, loss);
            ++step;
            batch1.clear();
            batch2.clear();
        };
        for (std::size_t idx : order) {
            const FramePair& pair = data.pairs[idx];
            Image f1, f2;
            try {
                f1 = read_image(pair.first);
                f2 = read_image(pair.second);
            } catch (const IoError& e) {
                std::fprintf(stderr, "warning: skipping pair (%s, %s): %s\n",
                             pair.first.string().c_str(), pair.second.string().c_str(), e.what());
                continue;
            }
            if (f1.height() != f2.height() || f1.width() != f2.width()) {
                std::fprintf(stderr, "warning: skipping pair with mismatched extents (%s, %s)\n",
                             pair.first.string().c_str(), pair.second.string().c_str());
                continue;
            }
            const int ch = effective_crop(f1.height(), cfg.crop_height);
            const int cw = effective_crop(f1.width(), cfg.crop_width);
            const int y0 = static_cast<int>(draw_below(rng, static_cast<std::uint32_t>(f1.height() - ch + 1)));
            const int x0 = static_cast<int>(draw_below(rng, static_cast<std::uint32_t>(f1.width() - cw + 1)));
            batch1.push_back(crop(f1, y0, x0, ch, cw));
            batch2.push_back(crop(f2, y0, x0, ch, cw));
            if (static_cast<int>(batch1.size()) == cfg.batch_size) flush();
        }
        flush();
    }
}

// ---------------------------------------------------------------------------
// Checkpoint format (all values little-endian):
//   "USCN" | u32 version | u32 layer_count
//   per layer: u32 out_ch, in_ch, kernel, stride, padding, has_activation
//   u32 upsample_count | u32 indices...
//   per layer: weights f32-array | bias f32-array
//              | adam(weights): u64 step, f64 beta1, beta2, lr, eps,
//                               m f32-array, v f32-array
//              | adam(bias): same
//   f32-array = u32 element count | f32 values
// ---------------------------------------------------------------------------

namespace {

class Writer {
public:
    explicit Writer(const fs::path& path) : out_(path, std::ios::binary), path_(path) {
        if (!out_) throw IoError("cannot open checkpoint for writing: " + path.string());
    }
    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void u32(std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
        bytes(b, 4);
    }
    void u64(std::uint64_t v) {
        u32(static_cast<std::uint32_t>(v));
        u32(static_cast<std::uint32_t>(v >> 32));
    }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void f32_array(const Tensor& t) {
        u32(static_cast<std::uint32_t>(t.size()));
        for (float v : t.data) f32(v);
    }
    void finish() {
        out_.flush();
        if (!out_) throw IoError("checkpoint write failed: " + path_.string());
    }

private:
    std::ofstream out_;
    fs::path path_;
};

class Reader {
public:
    explicit Reader(const fs::path& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw CheckpointError("cannot open checkpoint: " + path.string());
    }
    void bytes(void* p, std::size_t n, const char* what) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw CheckpointError("truncated checkpoint " + path_.string() + ": expected " +
                                  std::to_string(n) + " bytes for " + what + ", found " +
                                  std::to_string(in_.gcount()));
        }
    }
    std::uint32_t u32(const char* what) {
        unsigned char b[4];
        bytes(b, 4, what);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }
    std::uint64_t u64(const char* what) {
        const std::uint64_t lo = u32(what);
        const std::uint64_t hi = u32(what);
        return lo | (hi << 32);
    }
    float f32(const char* what) {
        const std::uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64(const char* what) {
        const std::uint64_t bits = u64(what);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    void f32_array_into(Tensor& t, const char* what) {
        const std::uint32_t count = u32(what);
        if (count != t.size()) {
            throw CheckpointError("checkpoint " + path_.string() + ": " + what + " holds " +
                                  std::to_string(count) + " values, expected " +
                                  std::to_string(t.size()));
        }
        for (float& v : t.data) v = f32(what);
    }
    bool at_eof() {
        return in_.peek() == std::char_traits<char>::eof();
    }

private:
    std::ifstream in_;
    fs::path path_;
};

void write_adam(Writer& w, const AdamState& s) {
    w.u64(s.step_count);
    w.f64(s.beta1);
    w.f64(s.beta2);
    w.f64(s.learning_rate);
    w.f64(s.epsilon);
    w.f32_array(s.first_moment);
    w.f32_array(s.second_moment);
}

void read_adam(Reader& r, AdamState& s, const char* what) {
    s.step_count = r.u64(what);
    s.beta1 = r.f64(what);
    s.beta2 = r.f64(what);
    s.learning_rate = r.f64(what);
    s.epsilon = r.f64(what);
    r.f32_array_into(s.first_moment, what);
    r.f32_array_into(s.second_moment, what);
}

}  // namespace

void save_checkpoint(const EncoderDecoderNet& net, const fs::path& path) {
    Writer w(path);
    w.bytes("USCN", 4);
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(net.layers.size()));
    for (const ConvLayer& l : net.layers) {
        w.u32(static_cast<std::uint32_t>(l.out_channels()));
        w.u32(static_cast<std::uint32_t>(l.in_channels()));
        w.u32(static_cast<std::uint32_t>(l.kernel()));
        w.u32(static_cast<std::uint32_t>(l.stride));
        w.u32(static_cast<std::uint32_t>(l.padding));
        w.u32(l.has_activation ? 1 : 0);
    }
    w.u32(static_cast<std::uint32_t>(net.upsample_before.size()));
    for (int idx : net.upsample_before) {
        w.u32(static_cast<std::uint32_t>(idx));
    }
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        w.f32_array(net.layers[i].weights);
        w.f32_array(net.layers[i].bias);
        write_adam(w, net.adam_weights[i]);
        write_adam(w, net.adam_biases[i]);
    }
    w.finish();
}

EncoderDecoderNet load_checkpoint(const fs::path& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4, "magic");
    if (std::memcmp(magic, "USCN", 4) != 0) {
        throw CheckpointError("bad checkpoint magic in " + path.string() +
                              ": expected \"USCN\"");
    }
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint version in " + path.string() + ": expected " +
                              std::to_string(kCheckpointVersion) + ", found " +
                              std::to_string(version));
    }
    const std::uint32_t layer_count = r.u32("layer count");
    if (layer_count == 0 || layer_count > 1024) {
        throw CheckpointError("implausible layer count " + std::to_string(layer_count) + " in " +
                              path.string());
    }
    EncoderDecoderNet net;
    for (std::uint32_t i = 0; i < layer_count; ++i) {
        const int out_ch = static_cast<int>(r.u32("layer table"));
        const int in_ch = static_cast<int>(r.u32("layer table"));
        const int kernel = static_cast<int>(r.u32("layer table"));
        const int stride = static_cast<int>(r.u32("layer table"));
        const int padding = static_cast<int>(r.u32("layer table"));
        const bool act = r.u32("layer table") != 0;
        ConvLayer layer(out_ch, in_ch, kernel, stride, act);
        if (layer.padding != padding) {
            throw CheckpointError("layer " + std::to_string(i) + " padding " +
                                  std::to_string(padding) + " does not match kernel " +
                                  std::to_string(kernel));
        }
        net.adam_weights.emplace_back(layer.weights.shape);
        net.adam_biases.emplace_back(layer.bias.shape);
        net.layers.push_back(std::move(layer));
    }
    const std::uint32_t ups_count = r.u32("upsample count");
    for (std::uint32_t i = 0; i < ups_count; ++i) {
        net.upsample_before.push_back(static_cast<int>(r.u32("upsample index")));
    }
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        r.f32_array_into(net.layers[i].weights, "layer weights");
        r.f32_array_into(net.layers[i].bias, "layer bias");
        read_adam(r, net.adam_weights[i], "weight optimizer state");
        read_adam(r, net.adam_biases[i], "bias optimizer state");
    }
    if (!r.at_eof()) {
        throw CheckpointError("trailing data after checkpoint payload in " + path.string());
    }
    validate_network(net);
    return net;
}

}  // namespace uscnn
