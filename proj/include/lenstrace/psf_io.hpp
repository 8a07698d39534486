#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "lenstrace/psf.hpp"

namespace lenstrace {

inline constexpr std::uint32_t kPsfCacheVersion = 1;

class CacheError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Little-endian layout: "PSFG", version, rows, cols, channels, patch size,
/// max kernel (u32 each); per cell: height, width (u16), illumination
/// (f32 x channels), kernels (f32, row-major, channel after channel); then a
/// CRC-32 of everything before it.
std::vector<std::uint8_t> serialize_psf_grid(const PsfGrid& grid);
PsfGrid deserialize_psf_grid(const std::vector<std::uint8_t>& bytes);

void save_psf_grid(const PsfGrid& grid, const std::filesystem::path& path);
PsfGrid load_psf_grid(const std::filesystem::path& path);

struct VerifyReport {
    std::vector<std::size_t> cells;  // row-major indices that were recomputed
    double max_difference = 0.0;
    bool passed = false;
};

/// Recomputes about 1% of the cells (at least one) and compares every kernel
/// entry and illumination weight against the cache.
VerifyReport verify_psf_grid(const PsfGrid& cached, const OpticalSystem& system, const PsfGridSpec& spec,
                             double tolerance = 1e-6);

}  // namespace lenstrace
