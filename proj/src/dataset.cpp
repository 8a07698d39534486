#include "lenstrace/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "lenstrace/config.hpp"
#include "lenstrace/parallel.hpp"
#include "lenstrace/psf_io.hpp"

namespace lenstrace {

using nlohmann::json;

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t image_seed(std::uint64_t dataset_seed, std::size_t index) {
    std::uint64_t state = dataset_seed ^ (0xD1B54A32D192ED03ULL * (static_cast<std::uint64_t>(index) + 1));
    return splitmix64(state);
}

Image fov_map(int height, int width) {
    if (height < 2 || width < 2) throw std::invalid_argument("FOV map needs at least 2x2 pixels");
    Image map(height, width, 2);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
            map.at(r, c, 0) = 2.0 * c / (width - 1) - 1.0;
            map.at(r, c, 1) = 2.0 * r / (height - 1) - 1.0;
        }
    return map;
}

void write_fov_png(const Image& map, const std::filesystem::path& path) {
    if (map.channels != 2) throw std::invalid_argument("FOV map must have two channels");
    // Encoded on the 16-bit scale: value / 65535 is what write_png quantizes.
    Image rgb(map.height, map.width, 3);
    for (std::size_t p = 0; p < map.pixels(); ++p)
        for (int ch = 0; ch < 2; ++ch) {
            double v = std::clamp(map.data[2 * p + ch], -1.0, 1.0);
            rgb.data[3 * p + ch] = (32768.0 + std::round(32767.0 * v)) / 65535.0;
        }
    write_png(rgb, path, 16);
}

Image read_fov_png(const std::filesystem::path& path) {
    Image rgb = read_png(path);
    if (rgb.channels != 3) throw std::invalid_argument("'" + path.string() + "' is not an FOV map");
    Image map(rgb.height, rgb.width, 2);
    for (std::size_t p = 0; p < map.pixels(); ++p)
        for (int ch = 0; ch < 2; ++ch) {
            double q = std::round(rgb.data[3 * p + ch] * 65535.0);
            map.data[2 * p + ch] = (q - 32768.0) / 32767.0;
        }
    return map;
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::vector<std::filesystem::path> list_corpus(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        std::string ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (e.is_regular_file() && ext == ".png") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open manifest '" + path.string() + "'");
    const json doc = json::parse(in);
    static const std::set<std::string> allowed = {"corpus",    "prescription", "psf_cache",  "output",
                                                  "seed",      "seeds",        "crop",       "bit_depth",
                                                  "verify_cache", "object_distance_mm", "grid", "simulation",
                                                  "threads",   "preset"};
    for (const auto& [key, value] : doc.items())
        if (!allowed.count(key)) throw std::invalid_argument("unknown manifest key '" + key + "'");
    for (const char* key : {"corpus", "prescription", "psf_cache", "output"})
        if (!doc.contains(key)) throw std::invalid_argument(std::string("manifest is missing '") + key + "'");

    const std::filesystem::path base = path.parent_path();
    DatasetManifest m;
    const json& corpus = doc["corpus"];
    if (corpus.is_string()) {
        std::filesystem::path dir = resolve(base, corpus.get<std::string>());
        if (!std::filesystem::is_directory(dir)) throw std::invalid_argument("corpus '" + dir.string() + "' is not a directory");
        m.images = list_corpus(dir);
    } else if (corpus.is_array()) {
        for (const auto& p : corpus) m.images.push_back(resolve(base, p.get<std::string>()));
    } else {
        throw std::invalid_argument("corpus must be a directory or a list of files");
    }
    m.prescription = resolve(base, doc["prescription"].get<std::string>());
    m.psf_cache = resolve(base, doc["psf_cache"].get<std::string>());
    m.output = resolve(base, doc["output"].get<std::string>());
    if (doc.contains("preset")) {
        Preset p = preset(doc["preset"].get<std::string>());
        m.grid = apply_preset(p, m.grid);
        m.object_distance_mm = p.object_distance_mm;
        m.crop = p.training_crop;
    }
    if (doc.contains("seed")) m.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("seeds")) m.seeds = doc["seeds"].get<std::vector<std::uint64_t>>();
    if (doc.contains("crop")) m.crop = doc["crop"].get<int>();
    if (doc.contains("bit_depth")) m.bit_depth = doc["bit_depth"].get<int>();
    if (doc.contains("verify_cache")) m.verify_cache = doc["verify_cache"].get<bool>();
    if (doc.contains("object_distance_mm")) m.object_distance_mm = doc["object_distance_mm"].get<double>();
    if (doc.contains("grid")) m.grid = grid_spec_from_json(doc["grid"], m.grid);
    if (doc.contains("simulation")) m.simulation = simulation_from_json(doc["simulation"], m.simulation);
    if (doc.contains("threads")) m.threads = doc["threads"].get<int>();
    return m;
}

PsfGrid ensure_psf_cache(const OpticalSystem& system, const PsfGridSpec& spec, const std::filesystem::path& path,
                         bool verify, bool* built) {
    if (built) *built = false;
    if (std::filesystem::exists(path)) {
        PsfGrid grid = load_psf_grid(path);
        const bool matches = grid.rows == static_cast<std::uint32_t>(spec.rows) &&
                             grid.cols == static_cast<std::uint32_t>(spec.cols) &&
                             grid.patch_size * grid.rows == static_cast<std::uint32_t>(system.sensor.height) &&
                             grid.patch_size * grid.cols == static_cast<std::uint32_t>(system.sensor.width);
        if (!matches) {
            throw CacheError("PSF cache '" + path.string() + "' does not match the sensor and grid; remove it to rebuild");
        }
        if (verify) {
            VerifyReport report = verify_psf_grid(grid, system, spec);
            if (!report.passed) {
                throw CacheError("PSF cache '" + path.string() + "' failed verification (max difference " +
                                 std::to_string(report.max_difference) + ")");
            }
        }
        return grid;
    }
    PsfGrid grid = compute_psf_grid(system, spec);
    save_psf_grid(grid, path);
    if (built) *built = true;
    return grid;
}

namespace {

std::string entry_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04zu", index);
    return buf;
}

Image quantize(const Image& img, int bit_depth) {
    const double scale = bit_depth == 16 ? 65535.0 : 255.0;
    Image out = img;
    for (double& v : out.data) v = std::round(std::clamp(v, 0.0, 1.0) * scale) / scale;
    return out;
}

Image to_rgb(const Image& img) {
    if (img.channels == 3) return img;
    if (img.channels != 1) throw std::invalid_argument("corpus images must be gray or RGB");
    Image rgb(img.height, img.width, 3);
    for (std::size_t p = 0; p < img.pixels(); ++p) rgb.data[3 * p] = rgb.data[3 * p + 1] = rgb.data[3 * p + 2] = img.data[p];
    return rgb;
}

}  // namespace

DatasetReport generate_dataset(const DatasetManifest& m) {
    if (m.images.empty()) throw std::invalid_argument("corpus is empty");
    if (!m.seeds.empty() && m.seeds.size() != m.images.size()) {
        throw std::invalid_argument("manifest lists " + std::to_string(m.seeds.size()) + " seeds for " +
                                    std::to_string(m.images.size()) + " images");
    }
    if (m.bit_depth != 8 && m.bit_depth != 16) throw std::invalid_argument("bit_depth must be 8 or 16");
    OpticalSystem system = load_prescription(m.prescription);
    if (m.object_distance_mm) system.lens.object_distance = *m.object_distance_mm;
    const int H = system.sensor.height, W = system.sensor.width;
    if (m.crop <= 0 || m.crop > H || m.crop > W) {
        throw std::invalid_argument("sensor resolution is below the training crop size");
    }

    DatasetReport report;
    PsfGridSpec spec = m.grid;
    spec.threads = m.threads;
    const PsfGrid grid = ensure_psf_cache(system, spec, m.psf_cache, m.verify_cache, &report.cache_built);

    for (const char* sub : {"gt", "input", "fov"}) std::filesystem::create_directories(m.output / sub);
    const Image fov = fov_map(H, W);

    report.entries.resize(m.images.size());
    // One image per worker; convolution inside runs single-threaded then.
    SimulationConfig sim = m.simulation;
    const int workers = std::min<int>(resolve_threads(m.threads), static_cast<int>(m.images.size()));
    sim.threads = workers > 1 ? 1 : m.threads;
    parallel_for(m.images.size(), workers, [&](std::size_t i) {
        DatasetEntry& e = report.entries[i];
        e.index = i;
        e.source = m.images[i];
        e.seed = m.seeds.empty() ? image_seed(m.seed, i) : m.seeds[i];
        e.name = entry_name(i);
        Image original = to_rgb(read_png(m.images[i]));
        if (original.height < m.crop || original.width < m.crop) {
            throw std::invalid_argument("'" + m.images[i].string() + "' is smaller than the training crop");
        }
        Image gt = quantize(resize_cover(original, H, W), m.bit_depth);
        SimulationResult sim_result = simulate_image(gt, grid, system.sensor, sim, e.seed);
        e.params = sim_result.params;
        write_png(gt, m.output / "gt" / (e.name + ".png"), m.bit_depth);
        write_png(sim_result.output, m.output / "input" / (e.name + ".png"), m.bit_depth);
        write_fov_png(fov, m.output / "fov" / (e.name + ".png"));
    });

    json entries = json::array();
    for (const DatasetEntry& e : report.entries) {
        entries.push_back({{"name", e.name},
                           {"source", e.source.string()},
                           {"seed", e.seed},
                           {"color_temperature", e.params.color_temperature},
                           {"shot", e.params.noise.shot},
                           {"read", e.params.noise.read},
                           {"gt", "gt/" + e.name + ".png"},
                           {"input", "input/" + e.name + ".png"},
                           {"fov", "fov/" + e.name + ".png"}});
    }
    json out = {{"sensor", {{"height", H}, {"width", W}, {"pitch_um", system.sensor.pitch_um}}},
                {"crop", m.crop},
                {"bit_depth", m.bit_depth},
                {"fov_encoding", "png16 rgb, v = (q - 32768) / 32767, channels x, y"},
                {"seed", m.seed},
                {"grid", to_json(m.grid)},
                {"simulation", to_json(m.simulation)},
                {"psf_cache", m.psf_cache.string()},
                {"entries", entries}};
    report.manifest_out = m.output / "manifest.json";
    std::ofstream(report.manifest_out) << out.dump(2) << "\n";
    return report;
}

}  // namespace lenstrace
