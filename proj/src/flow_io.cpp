#include "uscnn/flow_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

#include <png.h>

namespace uscnn {

namespace fs = std::filesystem;

namespace {

constexpr float kFloMagic = 202021.25f;

std::uint32_t le_u32(const unsigned char* b) {
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_le_u32(std::uint32_t v, unsigned char* b) {
    b[0] = static_cast<unsigned char>(v);
    b[1] = static_cast<unsigned char>(v >> 8);
    b[2] = static_cast<unsigned char>(v >> 16);
    b[3] = static_cast<unsigned char>(v >> 24);
}

float le_f32(const unsigned char* b) {
    const std::uint32_t bits = le_u32(b);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

void put_le_f32(float v, unsigned char* b) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_le_u32(bits, b);
}

std::vector<unsigned char> read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open file: " + path.string());
    const std::streamsize size = in.tellg();
    in.seekg(0);
    std::vector<unsigned char> bytes(static_cast<std::size_t>(size));
    if (size > 0) in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) throw IoError("read failed: " + path.string());
    return bytes;
}

}  // namespace

FlowField read_flo(const fs::path& path) {
    const std::vector<unsigned char> bytes = read_all(path);
    if (bytes.size() < 12) {
        throw IoError("flo file too short for header: " + path.string());
    }
    const float magic = le_f32(bytes.data());
    if (magic != kFloMagic) {
        throw IoError("bad flo magic in " + path.string() + " (expected 202021.25)");
    }
    const std::uint32_t w = le_u32(bytes.data() + 4);
    const std::uint32_t h = le_u32(bytes.data() + 8);
    if (w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20)) {
        throw IoError("implausible flo extents " + std::to_string(w) + "x" + std::to_string(h) +
                      " in " + path.string());
    }
    const std::size_t expected = 12 + static_cast<std::size_t>(w) * h * 8;
    if (bytes.size() != expected) {
        throw IoError("flo payload mismatch in " + path.string() + ": expected " +
                      std::to_string(expected) + " bytes, found " + std::to_string(bytes.size()));
    }
    FlowField flow(static_cast<int>(h), static_cast<int>(w));
    const unsigned char* p = bytes.data() + 12;
    for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
        flow.u.data[i] = le_f32(p);
        flow.v.data[i] = le_f32(p + 4);
        p += 8;
    }
    return flow;
}

void write_flo(const FlowField& flow, const fs::path& path) {
    const std::size_t count = flow.u.data.size();
    std::vector<unsigned char> bytes(12 + count * 8);
    put_le_f32(kFloMagic, bytes.data());
    put_le_u32(static_cast<std::uint32_t>(flow.width()), bytes.data() + 4);
    put_le_u32(static_cast<std::uint32_t>(flow.height()), bytes.data() + 8);
    unsigned char* p = bytes.data() + 12;
    for (std::size_t i = 0; i < count; ++i) {
        put_le_f32(flow.u.data[i], p);
        put_le_f32(flow.v.data[i], p + 4);
        p += 8;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open file for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

// --------------------------------------------------------------------------
// Image loading
// --------------------------------------------------------------------------

namespace {

Image read_pgm(const std::vector<unsigned char>& bytes, const fs::path& path) {
    std::size_t pos = 2;  // past "P5"
    auto next_token = [&]() -> long {
        // Skip whitespace and '#' comments.
        while (pos < bytes.size()) {
            if (std::isspace(bytes[pos])) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
        if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
            throw IoError("malformed PGM header: " + path.string());
        }
        long value = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            value = value * 10 + (bytes[pos] - '0');
            if (value > (1L << 30)) throw IoError("malformed PGM header: " + path.string());
            ++pos;
        }
        return value;
    };
    const long w = next_token();
    const long h = next_token();
    const long maxval = next_token();
    if (w < 1 || h < 1) throw IoError("invalid PGM extents in " + path.string());
    if (maxval < 1 || maxval > 255) {
        throw IoError("unsupported PGM maxval " + std::to_string(maxval) + " in " + path.string() +
                      " (only 8-bit supported)");
    }
    ++pos;  // the single whitespace byte after maxval
    const std::size_t expected = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (bytes.size() - pos < expected) {
        throw IoError("truncated PGM payload in " + path.string());
    }
    Image img(static_cast<int>(h), static_cast<int>(w));
    const float scale = 1.0f / static_cast<float>(maxval);
    for (std::size_t i = 0; i < expected; ++i) {
        img.pixels.data[i] = scale * static_cast<float>(bytes[pos + i]);
    }
    return img;
}

struct PngReadCtx {
    const unsigned char* data;
    std::size_t size;
    std::size_t pos;
};

void png_mem_read(png_structp png, png_bytep out, png_size_t n) {
    auto* ctx = static_cast<PngReadCtx*>(png_get_io_ptr(png));
    if (ctx->pos + n > ctx->size) {
        png_error(png, "unexpected end of PNG stream");
    }
    std::memcpy(out, ctx->data + ctx->pos, n);
    ctx->pos += n;
}

Image read_png_image(const std::vector<unsigned char>& bytes, const fs::path& path) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng init failed");
    }
    std::vector<unsigned char> rgb;
    png_uint_32 w = 0, h = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("malformed PNG file: " + path.string());
    }
    PngReadCtx ctx{bytes.data(), bytes.size(), 0};
    png_set_read_fn(png, &ctx, png_mem_read);
    png_read_info(png, info);
    w = png_get_image_width(png, info);
    h = png_get_image_height(png, info);

    // Normalize every variant to 8-bit RGB, then weight to luma ourselves.
    png_set_expand(png);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    png_set_strip_alpha(png);
    const png_byte color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
    }
    png_read_update_info(png, info);
    if (png_get_rowbytes(png, info) != static_cast<png_size_t>(w) * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("unsupported PNG layout in " + path.string());
    }
    rgb.resize(static_cast<std::size_t>(w) * h * 3);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) {
        rows[y] = rgb.data() + static_cast<std::size_t>(y) * w * 3;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(static_cast<int>(h), static_cast<int>(w));
    for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
        const double luma = 0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2];
        img.pixels.data[i] = static_cast<float>(luma / 255.0);
    }
    return img;
}

constexpr unsigned char kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

}  // namespace

Image read_image(const fs::path& path) {
    const std::vector<unsigned char> bytes = read_all(path);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') {
        return read_pgm(bytes, path);
    }
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0) {
        return read_png_image(bytes, path);
    }
    throw IoError("unsupported image format: " + path.string() + " (expected binary PGM or PNG)");
}

// --------------------------------------------------------------------------
// Flow visualization
// --------------------------------------------------------------------------

namespace {

void hsv_to_rgb(double hue, double sat, unsigned char* out) {
    // hue in [0, 1), value fixed at 1.
    const double h6 = hue * 6.0;
    const int sector = std::min(5, static_cast<int>(h6));
    const double f = h6 - sector;
    const double p = 1.0 - sat;
    const double q = 1.0 - sat * f;
    const double t = 1.0 - sat * (1.0 - f);
    double r, g, b;
    switch (sector) {
        case 0: r = 1; g = t; b = p; break;
        case 1: r = q; g = 1; b = p; break;
        case 2: r = p; g = 1; b = t; break;
        case 3: r = p; g = q; b = 1; break;
        case 4: r = t; g = p; b = 1; break;
        default: r = 1; g = p; b = q; break;
    }
    out[0] = static_cast<unsigned char>(std::lround(255.0 * r));
    out[1] = static_cast<unsigned char>(std::lround(255.0 * g));
    out[2] = static_cast<unsigned char>(std::lround(255.0 * b));
}

double percentile99(std::vector<double>& values) {
    if (values.empty()) return 0.0;
    const std::size_t idx = static_cast<std::size_t>(0.99 * static_cast<double>(values.size() - 1));
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(idx), values.end());
    return values[idx];
}

}  // namespace

RgbImage flow_to_color(const FlowField& flow, double max_magnitude) {
    const int h = flow.height(), w = flow.width();
    RgbImage out;
    out.height = h;
    out.width = w;
    out.pixels.assign(static_cast<std::size_t>(h) * w * 3, 0);

    double norm = max_magnitude;
    if (norm <= 0.0) {
        std::vector<double> mags;
        mags.reserve(flow.u.data.size());
        for (std::size_t i = 0; i < flow.u.data.size(); ++i) {
            const double u = flow.u.data[i], v = flow.v.data[i];
            if (std::isfinite(u) && std::isfinite(v)) {
                mags.push_back(std::hypot(u, v));
            }
        }
        norm = percentile99(mags);
    }
    norm = std::max(norm, 1e-9);

    for (std::size_t i = 0; i < flow.u.data.size(); ++i) {
        const double u = flow.u.data[i], v = flow.v.data[i];
        unsigned char* px = out.pixels.data() + 3 * i;
        if (!std::isfinite(u) || !std::isfinite(v)) {
            px[0] = px[1] = px[2] = 0;  // invalid flow drawn black
            continue;
        }
        const double mag = std::hypot(u, v);
        double hue = std::atan2(v, u) / (2.0 * 3.14159265358979323846);
        if (hue < 0.0) hue += 1.0;
        if (hue >= 1.0) hue = 0.0;
        const double sat = std::min(1.0, mag / norm);
        hsv_to_rgb(hue, sat, px);
    }
    return out;
}

void write_ppm(const RgbImage& image, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open file for writing: " + path.string());
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()),
              static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

void write_png(const RgbImage& image, const fs::path& path) {
    FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp) throw IoError("cannot open file for writing: " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("PNG encode failed: " + path.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
    for (int y = 0; y < image.height; ++y) {
        rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(
            image.pixels.data() + static_cast<std::size_t>(y) * image.width * 3);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace uscnn
