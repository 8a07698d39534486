#include "lenstrace/isp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "lenstrace/parallel.hpp"

namespace lenstrace {

double srgb_to_linear(double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error("sRGB value outside [0, 1]");
    v = std::max(v, kGammaEpsilon);
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double v) {
    v = std::clamp(v, kGammaEpsilon, 1.0);
    return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

Image gamma_decompress(const Image& srgb) {
    Image out = srgb;
    for (double& v : out.data) v = srgb_to_linear(v);
    return out;
}

Image gamma_compress(const Image& linear) {
    Image out = linear;
    for (double& v : out.data) v = linear_to_srgb(v);
    return out;
}

namespace {

const std::array<double, 3>& gains_for(const SensorSpec& sensor, int color_temperature) {
    auto it = sensor.white_balance.find(color_temperature);
    if (it == sensor.white_balance.end()) {
        throw std::invalid_argument("no white balance entry for " + std::to_string(color_temperature) + " K");
    }
    return it->second;
}

void require_rgb(const Image& image) {
    if (image.channels != 3) throw std::invalid_argument("expected a 3-channel image");
}

}  // namespace

Image energy_transform(const Image& srgb, const SensorSpec& sensor, int color_temperature) {
    require_rgb(srgb);
    const auto& wb = gains_for(sensor, color_temperature);
    const auto inv = invert3x3(sensor.ccm);
    Image out(srgb.height, srgb.width, 3);
    for (std::size_t p = 0; p < srgb.pixels(); ++p) {
        double lin[3];
        for (int c = 0; c < 3; ++c) lin[c] = srgb_to_linear(srgb.data[3 * p + c]);
        for (int c = 0; c < 3; ++c) {
            double cam = inv[c][0] * lin[0] + inv[c][1] * lin[1] + inv[c][2] * lin[2];
            out.data[3 * p + c] = std::max(0.0, cam / wb[c]);
        }
    }
    return out;
}

Image inverse_energy_transform(const Image& energy, const SensorSpec& sensor, int color_temperature) {
    require_rgb(energy);
    const auto& wb = gains_for(sensor, color_temperature);
    const auto& m = sensor.ccm;
    Image out(energy.height, energy.width, 3);
    for (std::size_t p = 0; p < energy.pixels(); ++p) {
        double cam[3];
        for (int c = 0; c < 3; ++c) cam[c] = energy.data[3 * p + c] * wb[c];
        for (int c = 0; c < 3; ++c) {
            double lin = m[c][0] * cam[0] + m[c][1] * cam[1] + m[c][2] * cam[2];
            out.data[3 * p + c] = linear_to_srgb(std::clamp(lin, 0.0, 1.0));
        }
    }
    return out;
}

Image partitioned_convolve(const Image& energy, const PsfGrid& grid, int threads) {
    if (grid.rows == 0 || grid.cols == 0 || grid.cells.size() != static_cast<std::size_t>(grid.rows) * grid.cols) {
        throw std::invalid_argument("PSF grid has no cells");
    }
    if (energy.channels != static_cast<int>(grid.channels)) {
        throw std::invalid_argument("image and PSF grid channel counts differ");
    }
    if (energy.height < static_cast<int>(grid.rows) || energy.width < static_cast<int>(grid.cols)) {
        throw std::invalid_argument("image is smaller than the PSF grid");
    }
    const int H = energy.height, W = energy.width, C = energy.channels;
    int R = 0;
    for (const auto& cell : grid.cells) R = std::max({R, cell.height / 2, cell.width / 2});
    const int PW = W + 2 * R;
    const int PH = H + 2 * R;

    // Edge-replicated planar copies so the inner loop needs no bounds checks.
    std::vector<std::vector<double>> padded(C, std::vector<double>(static_cast<std::size_t>(PH) * PW));
    for (int ch = 0; ch < C; ++ch)
        for (int r = 0; r < PH; ++r) {
            int sr = std::clamp(r - R, 0, H - 1);
            for (int c = 0; c < PW; ++c) {
                int sc = std::clamp(c - R, 0, W - 1);
                padded[ch][static_cast<std::size_t>(r) * PW + c] = energy.at(sr, sc, ch);
            }
        }

    auto bound = [](int i, int n, int total) { return static_cast<int>(static_cast<long long>(i) * total / n); };
    Image out(H, W, C);
    const std::size_t tasks = grid.cells.size() * C;
    parallel_for(tasks, threads, [&](std::size_t task) {
        const std::size_t idx = task / C;
        const int ch = static_cast<int>(task % C);
        const int gr = static_cast<int>(idx / grid.cols), gc = static_cast<int>(idx % grid.cols);
        const PsfCell& cell = grid.cells[idx];
        const int r0 = bound(gr, grid.rows, H), r1 = bound(gr + 1, grid.rows, H);
        const int c0 = bound(gc, grid.cols, W), c1 = bound(gc + 1, grid.cols, W);
        if (cell.height % 2 == 0 || cell.width % 2 == 0 || cell.height > H || cell.width > W ||
            cell.kernels.size() != static_cast<std::size_t>(C) ||
            cell.kernels[ch].size() != static_cast<std::size_t>(cell.height) * cell.width ||
            cell.illumination.size() != static_cast<std::size_t>(C)) {
            throw std::invalid_argument("PSF cell " + std::to_string(idx) + " does not fit the image");
        }
        const int hy = cell.height / 2, hx = cell.width / 2;
        const auto& k = cell.kernels[ch];
        const double weight = cell.illumination[ch];
        const int n = c1 - c0;
        std::vector<double> acc(n);
        const auto& plane = padded[ch];
        for (int r = r0; r < r1; ++r) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int i = 0; i < cell.height; ++i) {
                const double* row = plane.data() + static_cast<std::size_t>(r - (i - hy) + R) * PW;
                for (int j = 0; j < cell.width; ++j) {
                    const double w = k[static_cast<std::size_t>(i) * cell.width + j];
                    if (w == 0.0) continue;
                    const double* src = row + (c0 - (j - hx) + R);
                    for (int c = 0; c < n; ++c) acc[c] += w * src[c];
                }
            }
            for (int c = 0; c < n; ++c) out.at(r, c0 + c, ch) = weight * acc[c];
        }
    });
    return out;
}

RawImage mosaic(const Image& energy, BayerPattern pattern) {
    require_rgb(energy);
    RawImage raw{energy.height, energy.width, pattern, std::vector<double>(energy.pixels())};
    for (int r = 0; r < energy.height; ++r)
        for (int c = 0; c < energy.width; ++c) raw.at(r, c) = energy.at(r, c, bayer_channel(pattern, r, c));
    return raw;
}

namespace {

void noisy_inplace(std::vector<double>& values, const NoiseParams& noise, std::uint64_t seed) {
    if (noise.shot < 0.0 || noise.read < 0.0) throw std::invalid_argument("noise variances must be non-negative");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : values) {
        double sigma = std::sqrt(noise.read + noise.shot * std::max(v, 0.0));
        v = std::clamp(v + sigma * normal(rng), 0.0, 1.0);
    }
}

int reflect101(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * n - 2 - i;
    return i;
}

struct Tap {
    int dy, dx;
    double w;
};

// Gradient-corrected interpolation weights (sum 8, divided by 8).
const std::vector<Tap> kGreenAtRB = {{0, 0, 4},  {0, -1, 2}, {0, 1, 2},  {-1, 0, 2}, {1, 0, 2},
                                     {0, -2, -1}, {0, 2, -1}, {-2, 0, -1}, {2, 0, -1}};
const std::vector<Tap> kRowNeighbours = {{0, 0, 5},    {0, -1, 4},   {0, 1, 4},    {0, -2, -1},
                                         {0, 2, -1},   {-1, -1, -1}, {-1, 1, -1},  {1, -1, -1},
                                         {1, 1, -1},   {-2, 0, 0.5}, {2, 0, 0.5}};
const std::vector<Tap> kColNeighbours = {{0, 0, 5},    {-1, 0, 4},   {1, 0, 4},    {-2, 0, -1},
                                         {2, 0, -1},   {-1, -1, -1}, {-1, 1, -1},  {1, -1, -1},
                                         {1, 1, -1},   {0, -2, 0.5}, {0, 2, 0.5}};
const std::vector<Tap> kDiagonal = {{0, 0, 6},     {-1, -1, 2},  {-1, 1, 2},   {1, -1, 2},  {1, 1, 2},
                                    {0, -2, -1.5}, {0, 2, -1.5}, {-2, 0, -1.5}, {2, 0, -1.5}};

const std::vector<Tap> kBilinearCross = {{0, -1, 2}, {0, 1, 2}, {-1, 0, 2}, {1, 0, 2}};
const std::vector<Tap> kBilinearRow = {{0, -1, 4}, {0, 1, 4}};
const std::vector<Tap> kBilinearCol = {{-1, 0, 4}, {1, 0, 4}};
const std::vector<Tap> kBilinearDiag = {{-1, -1, 2}, {-1, 1, 2}, {1, -1, 2}, {1, 1, 2}};

double apply(const RawImage& raw, int r, int c, const std::vector<Tap>& taps) {
    double s = 0.0;
    for (const Tap& t : taps) s += t.w * raw.at(reflect101(r + t.dy, raw.height), reflect101(c + t.dx, raw.width));
    return s / 8.0;
}

}  // namespace

RawImage add_noise(const RawImage& raw, const NoiseParams& noise, std::uint64_t seed) {
    RawImage out = raw;
    noisy_inplace(out.data, noise, seed);
    return out;
}

DemosaicMethod parse_demosaic(const std::string& name) {
    if (name == "malvar") return DemosaicMethod::Malvar;
    if (name == "bilinear") return DemosaicMethod::Bilinear;
    throw std::invalid_argument("unknown demosaic method '" + name + "'");
}

std::string to_string(DemosaicMethod m) { return m == DemosaicMethod::Malvar ? "malvar" : "bilinear"; }

Image demosaic(const RawImage& raw, DemosaicMethod method) {
    if (raw.height < 5 || raw.width < 5) throw std::invalid_argument("demosaic needs at least 5x5 pixels");
    const bool malvar = method == DemosaicMethod::Malvar;
    const auto& green = malvar ? kGreenAtRB : kBilinearCross;
    const auto& row = malvar ? kRowNeighbours : kBilinearRow;
    const auto& col = malvar ? kColNeighbours : kBilinearCol;
    const auto& diag = malvar ? kDiagonal : kBilinearDiag;
    Image out(raw.height, raw.width, 3);
    for (int r = 0; r < raw.height; ++r)
        for (int c = 0; c < raw.width; ++c) {
            const int own = bayer_channel(raw.pattern, r, c);
            double v[3];
            v[own] = raw.at(r, c);
            if (own == 1) {
                // Which chroma channel shares this row.
                const int row_channel = bayer_channel(raw.pattern, r, c ^ 1);
                v[row_channel] = apply(raw, r, c, row);
                v[2 - row_channel] = apply(raw, r, c, col);
            } else {
                v[1] = apply(raw, r, c, green);
                v[2 - own] = apply(raw, r, c, diag);
            }
            for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = std::max(0.0, v[ch]);
        }
    return out;
}

SimulationParams sample_simulation(const SimulationConfig& config, const SensorSpec& sensor, std::uint64_t seed) {
    std::vector<int> temps = config.color_temperatures;
    if (temps.empty())
        for (const auto& [t, gains] : sensor.white_balance) temps.push_back(t);
    if (temps.empty()) throw std::invalid_argument("sensor has no white balance entries");
    std::mt19937_64 rng(seed);
    auto draw = [&](const Range& range) {
        if (range.lo < 0.0 || range.hi < range.lo) throw std::invalid_argument("invalid noise range");
        if (range.lo == range.hi) return range.lo;
        if (range.lo == 0.0) return std::uniform_real_distribution<double>(0.0, range.hi)(rng);
        return std::exp(std::uniform_real_distribution<double>(std::log(range.lo), std::log(range.hi))(rng));
    };
    SimulationParams p;
    p.color_temperature = temps[std::uniform_int_distribution<std::size_t>(0, temps.size() - 1)(rng)];
    p.noise.shot = draw(config.shot);
    p.noise.read = draw(config.read);
    p.noise_seed = rng();
    return p;
}

Image simulate_image(const Image& srgb, const PsfGrid& grid, const SensorSpec& sensor, const SimulationConfig& config,
                     const SimulationParams& params) {
    Image energy = energy_transform(srgb, sensor, params.color_temperature);
    Image blurred = partitioned_convolve(energy, grid, config.threads);
    if (config.mosaic) {
        RawImage raw = mosaic(blurred, sensor.bayer);
        noisy_inplace(raw.data, params.noise, params.noise_seed);
        blurred = demosaic(raw, config.demosaic);
    } else {
        noisy_inplace(blurred.data, params.noise, params.noise_seed);
    }
    return inverse_energy_transform(blurred, sensor, params.color_temperature);
}

SimulationResult simulate_image(const Image& srgb, const PsfGrid& grid, const SensorSpec& sensor,
                                const SimulationConfig& config, std::uint64_t seed) {
    SimulationResult result;
    result.params = sample_simulation(config, sensor, seed);
    result.output = simulate_image(srgb, grid, sensor, config, result.params);
    return result;
}

}  // namespace lenstrace
