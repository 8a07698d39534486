#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lenstrace/image.hpp"
#include "lenstrace/lens_model.hpp"
#include "lenstrace/psf.hpp"

namespace lenstrace {

inline constexpr double kGammaEpsilon = 1e-8;

/// sRGB transfer curve. Decoding rejects values outside [0, 1] and raises
/// inputs below eps to eps; encoding clamps to [eps, 1].
double srgb_to_linear(double v);
double linear_to_srgb(double v);
Image gamma_decompress(const Image& srgb);
Image gamma_compress(const Image& linear);

/// sRGB image to camera-RGB energy: linearize, apply the inverse CCM, divide by
/// the white balance gains of `color_temperature`. Negative results are clamped.
Image energy_transform(const Image& srgb, const SensorSpec& sensor, int color_temperature);
/// Camera RGB to sRGB: multiply by the gains, apply the CCM, clamp to [0, 1], gamma.
Image inverse_energy_transform(const Image& energy, const SensorSpec& sensor, int color_temperature);

/// Spatially varying convolution: pixel (r, c) takes the kernel and illumination
/// weight of cell (r * rows / H, c * cols / W). Borders replicate the edge pixel.
Image partitioned_convolve(const Image& energy, const PsfGrid& grid, int threads = 0);

struct RawImage {
    int height = 0;
    int width = 0;
    BayerPattern pattern = BayerPattern::RGGB;
    std::vector<double> data;

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * width + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }
};

RawImage mosaic(const Image& energy, BayerPattern pattern);

struct NoiseParams {
    double shot = 0.0;  // variance per unit signal
    double read = 0.0;  // signal-independent variance
};

/// x + N(0, read + shot * x), clipped to [0, 1].
RawImage add_noise(const RawImage& raw, const NoiseParams& noise, std::uint64_t seed);

enum class DemosaicMethod { Malvar, Bilinear };
DemosaicMethod parse_demosaic(const std::string& name);
std::string to_string(DemosaicMethod m);

/// 5x5 gradient-corrected (Malvar-He-Cutler) or bilinear interpolation with
/// reflect-101 borders; results are clamped at zero.
Image demosaic(const RawImage& raw, DemosaicMethod method = DemosaicMethod::Malvar);

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct SimulationConfig {
    std::vector<int> color_temperatures;  // empty: every white balance entry of the sensor
    Range shot{1e-4, 1e-2};               // sampled log-uniformly when lo > 0
    Range read{1e-6, 1e-4};
    DemosaicMethod demosaic = DemosaicMethod::Malvar;
    bool mosaic = true;
    int threads = 0;
};

struct SimulationParams {
    int color_temperature = 0;
    NoiseParams noise;
    std::uint64_t noise_seed = 0;
};

/// Draws color temperature and noise levels from `seed`.
SimulationParams sample_simulation(const SimulationConfig& config, const SensorSpec& sensor, std::uint64_t seed);

struct SimulationResult {
    Image output;  // sRGB
    SimulationParams params;
};

/// Full degradation chain for an sRGB image at sensor resolution.
SimulationResult simulate_image(const Image& srgb, const PsfGrid& grid, const SensorSpec& sensor,
                                const SimulationConfig& config, std::uint64_t seed);
/// Same chain with explicit parameters.
Image simulate_image(const Image& srgb, const PsfGrid& grid, const SensorSpec& sensor, const SimulationConfig& config,
                     const SimulationParams& params);

}  // namespace lenstrace
