#include "lenstrace/psf_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace lenstrace {

static_assert(std::endian::native == std::endian::little, "cache I/O assumes a little-endian host");

namespace {

class Writer {
public:
    template <class T>
    void put(T v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        bytes.insert(bytes.end(), p, p + sizeof(T));
    }
    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    Reader(const std::vector<std::uint8_t>& b, std::size_t end) : bytes_(b), end_(end) {}
    template <class T>
    T get() {
        if (pos_ + sizeof(T) > end_) throw CacheError("PSF cache is truncated");
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::size_t position() const { return pos_; }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    while (n > 0) {
        uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        crc = crc32(crc, data, chunk);
        data += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> serialize_psf_grid(const PsfGrid& grid) {
    if (grid.cells.size() != static_cast<std::size_t>(grid.rows) * grid.cols) {
        throw CacheError("grid cell count does not match its dimensions");
    }
    Writer w;
    for (char c : {'P', 'S', 'F', 'G'}) w.put(static_cast<std::uint8_t>(c));
    w.put(kPsfCacheVersion);
    w.put(grid.rows);
    w.put(grid.cols);
    w.put(grid.channels);
    w.put(grid.patch_size);
    w.put(grid.max_kernel);
    for (const PsfCell& cell : grid.cells) {
        if (cell.height <= 0 || cell.width <= 0 || cell.height > 65535 || cell.width > 65535) {
            throw CacheError("kernel size does not fit the cache format");
        }
        if (cell.kernels.size() != grid.channels || cell.illumination.size() != grid.channels) {
            throw CacheError("cell channel count does not match the grid");
        }
        w.put(static_cast<std::uint16_t>(cell.height));
        w.put(static_cast<std::uint16_t>(cell.width));
        for (float v : cell.illumination) w.put(v);
        for (const auto& k : cell.kernels) {
            if (k.size() != static_cast<std::size_t>(cell.height) * cell.width) {
                throw CacheError("kernel data does not match its size");
            }
            for (float v : k) w.put(v);
        }
    }
    w.put(crc_of(w.bytes.data(), w.bytes.size()));
    return std::move(w.bytes);
}

PsfGrid deserialize_psf_grid(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 32 || std::memcmp(bytes.data(), "PSFG", 4) != 0) throw CacheError("not a PSF cache file");
    const std::size_t body = bytes.size() - 4;
    std::uint32_t stored;
    std::memcpy(&stored, bytes.data() + body, 4);
    Reader r(bytes, body);
    r.get<std::uint32_t>();  // magic
    std::uint32_t version = r.get<std::uint32_t>();
    if (version != kPsfCacheVersion) {
        throw CacheError("PSF cache version " + std::to_string(version) + " is not supported (expected " +
                         std::to_string(kPsfCacheVersion) + ")");
    }
    if (crc_of(bytes.data(), body) != stored) throw CacheError("PSF cache checksum mismatch");
    PsfGrid grid;
    grid.rows = r.get<std::uint32_t>();
    grid.cols = r.get<std::uint32_t>();
    grid.channels = r.get<std::uint32_t>();
    grid.patch_size = r.get<std::uint32_t>();
    grid.max_kernel = r.get<std::uint32_t>();
    const std::size_t n = static_cast<std::size_t>(grid.rows) * grid.cols;
    if (grid.channels == 0 || grid.channels > 16 || n > (body / 8)) throw CacheError("PSF cache header is corrupt");
    grid.cells.resize(n);
    for (PsfCell& cell : grid.cells) {
        cell.height = r.get<std::uint16_t>();
        cell.width = r.get<std::uint16_t>();
        cell.illumination.resize(grid.channels);
        for (float& v : cell.illumination) v = r.get<float>();
        cell.kernels.resize(grid.channels);
        for (auto& k : cell.kernels) {
            k.resize(static_cast<std::size_t>(cell.height) * cell.width);
            for (float& v : k) v = r.get<float>();
        }
    }
    if (r.position() != body) throw CacheError("PSF cache has trailing data");
    return grid;
}

void save_psf_grid(const PsfGrid& grid, const std::filesystem::path& path) {
    auto bytes = serialize_psf_grid(grid);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CacheError("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CacheError("failed writing '" + path.string() + "'");
}

PsfGrid load_psf_grid(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CacheError("cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_psf_grid(bytes);
}

VerifyReport verify_psf_grid(const PsfGrid& cached, const OpticalSystem& system, const PsfGridSpec& spec,
                             double tolerance) {
    if (cached.rows != static_cast<std::uint32_t>(spec.rows) || cached.cols != static_cast<std::uint32_t>(spec.cols)) {
        throw CacheError("cache grid size does not match the requested grid");
    }
    VerifyReport report;
    const std::size_t n = cached.cells.size();
    const std::size_t count = std::max<std::size_t>(1, n / 100);
    const std::size_t stride = n / count;
    for (std::size_t i = 0; i < count; ++i) report.cells.push_back(i * stride + stride / 2);
    std::vector<PsfCell> fresh = compute_psf_cells(system, spec, report.cells);
    bool shapes_match = true;
    for (std::size_t i = 0; i < fresh.size(); ++i) {
        const PsfCell& a = cached.cells[report.cells[i]];
        const PsfCell& b = fresh[i];
        if (a.height != b.height || a.width != b.width || a.kernels.size() != b.kernels.size()) {
            shapes_match = false;
            continue;
        }
        for (std::size_t c = 0; c < a.kernels.size(); ++c) {
            for (std::size_t j = 0; j < a.kernels[c].size(); ++j) {
                report.max_difference = std::max(report.max_difference,
                                                 std::abs(static_cast<double>(a.kernels[c][j]) - b.kernels[c][j]));
            }
            report.max_difference = std::max(
                report.max_difference, std::abs(static_cast<double>(a.illumination[c]) - b.illumination[c]));
        }
    }
    report.passed = shapes_match && report.max_difference <= tolerance;
    return report;
}

}  // namespace lenstrace
