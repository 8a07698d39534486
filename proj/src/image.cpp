#include "lenstrace/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace lenstrace {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
    auto* text = static_cast<std::string*>(png_get_error_ptr(png));
    if (text) *text = msg;
    png_longjmp(png, 1);
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw ImageError("cannot open '" + path.string() + "'");
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw ImageError("'" + path.string() + "' is not a PNG file");
    }
    std::string message;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageError("libpng initialisation failed");
    }
    Image image;
    std::vector<png_byte> buffer;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageError("failed to decode '" + path.string() + "': " + message);
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);  // host order (little-endian)
    png_read_update_info(png, info);
    depth = png_get_bit_depth(png, info);
    const int channels = png_get_channels(png, info);
    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const std::size_t stride = png_get_rowbytes(png, info);
    buffer.resize(stride * height);
    rows.resize(height);
    for (int r = 0; r < height; ++r) rows[r] = buffer.data() + stride * r;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    image = Image(height, width, channels);
    if (depth == 16) {
        for (std::size_t i = 0; i < image.data.size(); ++i) {
            std::uint16_t v;
            std::memcpy(&v, buffer.data() + 2 * i, 2);
            image.data[i] = v / 65535.0;
        }
    } else {
        for (int r = 0; r < height; ++r)
            for (int i = 0; i < width * channels; ++i)
                image.data[static_cast<std::size_t>(r) * width * channels + i] = rows[r][i] / 255.0;
    }
    return image;
}

void write_png(const Image& image, const std::filesystem::path& path, int bit_depth) {
    if (image.channels != 1 && image.channels != 3) throw ImageError("PNG output needs 1 or 3 channels");
    if (bit_depth != 8 && bit_depth != 16) throw ImageError("PNG bit depth must be 8 or 16");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw ImageError("cannot write '" + path.string() + "'");
    std::string message;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw ImageError("libpng initialisation failed");
    }
    const int bytes = bit_depth / 8;
    const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels * bytes;
    std::vector<png_byte> buffer(stride * image.height);
    const double scale = bit_depth == 16 ? 65535.0 : 255.0;
    for (std::size_t i = 0; i < image.data.size(); ++i) {
        auto q = static_cast<std::uint32_t>(std::lround(std::clamp(image.data[i], 0.0, 1.0) * scale));
        if (bytes == 2) {
            buffer[2 * i] = static_cast<png_byte>(q >> 8);  // PNG is big-endian
            buffer[2 * i + 1] = static_cast<png_byte>(q & 0xff);
        } else {
            buffer[i] = static_cast<png_byte>(q);
        }
    }
    std::vector<png_bytep> rows(image.height);
    for (int r = 0; r < image.height; ++r) rows[r] = buffer.data() + stride * r;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageError("failed to encode '" + path.string() + "': " + message);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, image.width, image.height, bit_depth,
                 image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_float_planar(const Image& image, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ImageError("cannot write '" + path.string() + "'");
    auto put = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    out.write("LTFP", 4);
    put(1);
    put(static_cast<std::uint32_t>(image.channels));
    put(static_cast<std::uint32_t>(image.height));
    put(static_cast<std::uint32_t>(image.width));
    std::vector<float> plane(image.pixels());
    for (int ch = 0; ch < image.channels; ++ch) {
        for (std::size_t p = 0; p < image.pixels(); ++p) plane[p] = static_cast<float>(image.data[p * image.channels + ch]);
        out.write(reinterpret_cast<const char*>(plane.data()), static_cast<std::streamsize>(plane.size() * 4));
    }
    if (!out) throw ImageError("failed writing '" + path.string() + "'");
}

Image read_float_planar(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageError("cannot open '" + path.string() + "'");
    char magic[4];
    std::uint32_t header[4];
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in || std::memcmp(magic, "LTFP", 4) != 0 || header[0] != 1) {
        throw ImageError("'" + path.string() + "' is not a float planar dump");
    }
    Image image(static_cast<int>(header[2]), static_cast<int>(header[3]), static_cast<int>(header[1]));
    std::vector<float> plane(image.pixels());
    for (int ch = 0; ch < image.channels; ++ch) {
        in.read(reinterpret_cast<char*>(plane.data()), static_cast<std::streamsize>(plane.size() * 4));
        if (!in) throw ImageError("'" + path.string() + "' is truncated");
        for (std::size_t p = 0; p < image.pixels(); ++p) image.data[p * image.channels + ch] = plane[p];
    }
    return image;
}

namespace {

struct Taps {
    std::vector<int> first;
    std::vector<std::vector<double>> weights;
};

Taps resample_taps(int in, int out) {
    Taps t;
    const double scale = static_cast<double>(in) / out;
    const double support = std::max(1.0, scale);
    t.first.resize(out);
    t.weights.resize(out);
    for (int o = 0; o < out; ++o) {
        double center = (o + 0.5) * scale;
        int lo = static_cast<int>(std::floor(center - support));
        int hi = static_cast<int>(std::ceil(center + support));
        std::vector<double> w;
        double sum = 0.0;
        for (int i = lo; i <= hi; ++i) {
            double d = std::abs((i + 0.5 - center) / support);
            double v = std::max(0.0, 1.0 - d);
            w.push_back(v);
            sum += v;
        }
        for (double& v : w) v /= sum;
        t.first[o] = lo;
        t.weights[o] = std::move(w);
    }
    return t;
}

}  // namespace

Image resize(const Image& image, int height, int width) {
    if (height <= 0 || width <= 0) throw ImageError("resize target must be positive");
    const int ch = image.channels;
    Taps tx = resample_taps(image.width, width), ty = resample_taps(image.height, height);
    Image tmp(image.height, width, ch);
    for (int r = 0; r < image.height; ++r)
        for (int c = 0; c < width; ++c)
            for (std::size_t k = 0; k < tx.weights[c].size(); ++k) {
                int sc = std::clamp(tx.first[c] + static_cast<int>(k), 0, image.width - 1);
                for (int z = 0; z < ch; ++z) tmp.at(r, c, z) += tx.weights[c][k] * image.at(r, sc, z);
            }
    Image out(height, width, ch);
    for (int r = 0; r < height; ++r)
        for (std::size_t k = 0; k < ty.weights[r].size(); ++k) {
            int sr = std::clamp(ty.first[r] + static_cast<int>(k), 0, image.height - 1);
            double w = ty.weights[r][k];
            for (int c = 0; c < width; ++c)
                for (int z = 0; z < ch; ++z) out.at(r, c, z) += w * tmp.at(sr, c, z);
        }
    return out;
}

Image crop(const Image& image, int top, int left, int height, int width) {
    if (top < 0 || left < 0 || top + height > image.height || left + width > image.width) {
        throw ImageError("crop window outside the image");
    }
    Image out(height, width, image.channels);
    for (int r = 0; r < height; ++r)
        std::copy_n(&image.data[(static_cast<std::size_t>(top + r) * image.width + left) * image.channels],
                    static_cast<std::size_t>(width) * image.channels,
                    &out.data[static_cast<std::size_t>(r) * width * image.channels]);
    return out;
}

Image resize_cover(const Image& image, int height, int width) {
    if (image.height == height && image.width == width) return image;
    double scale = std::max(static_cast<double>(height) / image.height, static_cast<double>(width) / image.width);
    int h = std::max(height, static_cast<int>(std::ceil(image.height * scale - 1e-9)));
    int w = std::max(width, static_cast<int>(std::ceil(image.width * scale - 1e-9)));
    Image scaled = resize(image, h, w);
    return crop(scaled, (h - height) / 2, (w - width) / 2, height, width);
}

}  // namespace lenstrace
