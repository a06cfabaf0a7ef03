#pragma once

#include <filesystem>
#include <vector>

#include "uscnn/image_ops.hpp"

namespace uscnn {

/// Middlebury .flo: float tag 202021.25, 32-bit LE width and height, then
/// row-major interleaved (u, v) 32-bit LE floats. Round trips are bit-exact,
/// including NaN payloads used by some datasets for invalid pixels.
FlowField read_flo(const std::filesystem::path& path);
void write_flo(const FlowField& flow, const std::filesystem::path& path);

/// Loads an 8-bit binary PGM (P5) or a PNG. Intensities are scaled to
/// [0, 1]; color inputs are converted by luma weighting (0.299, 0.587, 0.114).
Image read_image(const std::filesystem::path& path);

/// Interleaved 8-bit RGB rows, top to bottom.
struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<unsigned char> pixels;  // height * width * 3
};

/// Flow color wheel: hue encodes direction, saturation encodes magnitude
/// normalized by max_magnitude (pass 0 to use the field's 99th-percentile
/// magnitude). Zero flow maps to white; non-finite flow to black.
RgbImage flow_to_color(const FlowField& flow, double max_magnitude = 0.0);

void write_ppm(const RgbImage& image, const std::filesystem::path& path);
void write_png(const RgbImage& image, const std::filesystem::path& path);

}  // namespace uscnn
