#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <json.hpp>

#include "lenstrace/image.hpp"
#include "lenstrace/psf.hpp"

namespace testsupport {

inline std::string triplet_path() { return std::string(LENSTRACE_DATA_DIR) + "/cooke_triplet.json"; }

inline nlohmann::json small_sensor_json() {
    return {
        {"pitch_um", 10.0},
        {"resolution", {24, 32}},
        {"bayer", "RGGB"},
        {"wavelengths_nm", {450.0, 550.0, 650.0}},
        {"spectral_response", {{"r", {0.0, 0.1, 1.0}}, {"g", {0.1, 1.0, 0.1}}, {"b", {1.0, 0.1, 0.0}}}},
        {"wb", {{"5000", {2.0, 1.0, 1.5}}}},
        {"ccm", {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}},
    };
}

// Glass plate (n = 1.5, 2 mm) with 10 mm of air on either side.
inline nlohmann::json flat_window_json() {
    return {
        {"surfaces",
         {{{"curvature", 0.0}, {"coeffs", nlohmann::json::object()}, {"semi_diameter", 5.0}, {"thickness", 2.0},
           {"material", "glass"}, {"is_stop", true}},
          {{"curvature", 0.0}, {"coeffs", nlohmann::json::object()}, {"semi_diameter", 5.0}, {"thickness", 10.0},
           {"material", "air"}, {"is_stop", false}}}},
        {"materials", {{"glass", {{"table", {{300.0, 1.5}, {900.0, 1.5}}}}}}},
        {"object_distance_mm", 10.0},
        {"exit_pupil_z_mm", 12.0},
        {"image_plane_z_mm", 20.0},
        {"full_fov_deg", 20.0},
        {"sensor", small_sensor_json()},
    };
}

// Reduced field grid on the triplet: 3x4 cells, coarse sampling.
inline lenstrace::PsfGridSpec small_grid_spec() {
    lenstrace::PsfGridSpec spec;
    spec.rows = 3;
    spec.cols = 4;
    spec.wavelengths_nm = {450, 550, 650};
    spec.pupil_samples = 24;
    spec.oversample = 4;
    return spec;
}

/// Every cell holds the same kernel (all channels) and weight.
inline lenstrace::PsfGrid uniform_grid(int rows, int cols, int patch, int size, const std::vector<float>& kernel,
                                       float weight = 1.0f) {
    lenstrace::PsfGrid g;
    g.rows = rows;
    g.cols = cols;
    g.patch_size = patch;
    g.max_kernel = size;
    lenstrace::PsfCell cell;
    cell.height = cell.width = size;
    cell.kernels.assign(3, kernel);
    cell.illumination.assign(3, weight);
    g.cells.assign(static_cast<std::size_t>(rows) * cols, cell);
    return g;
}

inline lenstrace::PsfGrid delta_grid(int rows, int cols, int patch) {
    return uniform_grid(rows, cols, patch, 1, {1.0f});
}

inline lenstrace::Image random_image(int h, int w, int c, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    lenstrace::Image img(h, w, c);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    for (double& v : img.data) v = u(rng);
    return img;
}

/// Smooth colour image with a few low-frequency components, values in [0.1, 0.9].
inline lenstrace::Image smooth_image(int h, int w, double phase = 0.0) {
    lenstrace::Image img(h, w, 3);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int ch = 0; ch < 3; ++ch) {
                double x = static_cast<double>(c) / w, y = static_cast<double>(r) / h;
                img.at(r, c, ch) = 0.5 + 0.2 * std::sin(2.0 * M_PI * (x + 0.3 * ch + phase)) +
                                   0.2 * std::cos(2.0 * M_PI * (0.7 * y - 0.2 * ch + phase));
            }
    return img;
}

class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("lenstrace_test_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace testsupport
