#pragma once

#include <filesystem>
#include <stdexcept>
#include <vector>

namespace lenstrace {

class ImageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Interleaved (HWC) image of doubles.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

    double& at(int r, int c, int ch) { return data[(static_cast<std::size_t>(r) * width + c) * channels + ch]; }
    double at(int r, int c, int ch) const { return data[(static_cast<std::size_t>(r) * width + c) * channels + ch]; }
    std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
    bool same_shape(const Image& o) const { return height == o.height && width == o.width && channels == o.channels; }
    bool operator==(const Image&) const = default;
};

/// Reads 8- or 16-bit PNG into [0, 1]; palette and gray images are expanded,
/// alpha is dropped.
Image read_png(const std::filesystem::path& path);
/// Writes 1- or 3-channel images, clamped to [0, 1], with bit_depth 8 or 16.
void write_png(const Image& image, const std::filesystem::path& path, int bit_depth = 8);

/// Planar float32 dump: "LTFP", version u32 = 1, channels, height, width (u32),
/// then each channel plane row-major, all little-endian.
void write_float_planar(const Image& image, const std::filesystem::path& path);
Image read_float_planar(const std::filesystem::path& path);

/// Separable resize with a triangle filter widened when shrinking.
Image resize(const Image& image, int height, int width);
/// Scales to cover height x width, then takes the centered crop.
Image resize_cover(const Image& image, int height, int width);
Image crop(const Image& image, int top, int left, int height, int width);

}  // namespace lenstrace
