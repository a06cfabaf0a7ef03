#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "uscnn/network.hpp"

namespace uscnn {

struct TrainConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon_adam = 1e-8;
    int batch_size = 8;           // gradients averaged over the batch
    int epochs = 1;
    double charbonnier_epsilon = 1e-3;
    int crop_height = 128;        // divisible by 16
    int crop_width = 96;
    std::uint32_t seed = 0;
};

void validate_config(const TrainConfig& cfg);

struct FramePair {
    std::filesystem::path first;
    std::filesystem::path second;
};

/// Consecutive-frame pairs enumerated from a directory tree: the root's own
/// image files form one sequence, and each subdirectory another. Frames are
/// paired in lexicographic order; non-image entries are skipped with a
/// warning on stderr.
struct FramePairDataset {
    std::filesystem::path root;
    std::vector<FramePair> pairs;
    int skipped_files = 0;
};

FramePairDataset ingest_pairs(const std::filesystem::path& root);

/// One unsupervised step on a single pair: Horn-Schunck derivatives from the
/// raw pair, forward, Charbonnier flow-constraint gradient, backprop, ADAM on
/// every parameter. Returns the loss divided by the pixel count. Throws
/// NumericError instead of propagating non-finite values.
double train_step(EncoderDecoderNet& net, const Image& frame1, const Image& frame2,
                  const TrainConfig& cfg);

/// Gradient-averaged step over several pairs; one ADAM update. Returns the
/// mean pixel-normalized loss.
double train_batch(EncoderDecoderNet& net, const std::vector<const Image*>& frames1,
                   const std::vector<const Image*>& frames2, const TrainConfig& cfg);

using StepSink = std::function<void(long step, double loss)>;

/// Full training loop: epochs x shuffled pairs under cfg.seed, random crops,
/// batches of cfg.batch_size. Emits (optimizer step, batch loss) per step.
void train(EncoderDecoderNet& net, const FramePairDataset& data, const TrainConfig& cfg,
           const StepSink& on_step = nullptr);

/// Versioned binary checkpoint: magic "USCN", format version, layer table,
/// then parameter and ADAM tensors as length-prefixed arrays of 32-bit
/// little-endian IEEE-754 values. Round trips are bit-exact.
void save_checkpoint(const EncoderDecoderNet& net, const std::filesystem::path& path);
EncoderDecoderNet load_checkpoint(const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace uscnn
