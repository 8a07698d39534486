#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lenstrace/image.hpp"
#include "lenstrace/isp.hpp"
#include "lenstrace/psf.hpp"

namespace lenstrace {

/// Next value of the splitmix64 sequence whose state is `state`.
std::uint64_t splitmix64(std::uint64_t& state);
/// Seed of corpus image `index` under a dataset seed.
std::uint64_t image_seed(std::uint64_t dataset_seed, std::size_t index);

/// Two channels holding normalized sensor coordinates: x = 2c/(W-1) - 1,
/// y = 2r/(H-1) - 1, so the corner pixels sit at +-1.
Image fov_map(int height, int width);
/// 16-bit RGB PNG with q = 32768 + round(32767 v) in the first two channels;
/// -1, 0 and 1 are exact.
void write_fov_png(const Image& map, const std::filesystem::path& path);
Image read_fov_png(const std::filesystem::path& path);

struct DatasetManifest {
    std::vector<std::filesystem::path> images;  // corpus, in order
    std::filesystem::path prescription;
    std::filesystem::path psf_cache;
    std::filesystem::path output;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> seeds;  // explicit per-image seeds; derived from `seed` when empty
    int crop = 256;                    // training crop recorded for the trainer
    int bit_depth = 8;
    bool verify_cache = false;
    std::optional<double> object_distance_mm;
    PsfGridSpec grid;
    SimulationConfig simulation;
    int threads = 0;
};

/// Reads a JSON manifest. Relative paths resolve against the manifest's directory;
/// "corpus" is a directory (PNG files, sorted by name) or a list of files.
DatasetManifest load_manifest(const std::filesystem::path& path);

struct DatasetEntry {
    std::size_t index = 0;
    std::filesystem::path source;
    std::uint64_t seed = 0;
    SimulationParams params;
    std::string name;  // NNNN
};

struct DatasetReport {
    std::vector<DatasetEntry> entries;
    bool cache_built = false;
    std::filesystem::path manifest_out;
};

/// Loads the cached PsfGrid when it matches the system and spec (optionally
/// verifying it), otherwise computes and stores it.
PsfGrid ensure_psf_cache(const OpticalSystem& system, const PsfGridSpec& spec, const std::filesystem::path& path,
                         bool verify, bool* built = nullptr);

/// Writes out/{gt,input,fov}/NNNN.png and out/manifest.json.
DatasetReport generate_dataset(const DatasetManifest& manifest);

}  // namespace lenstrace
