#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "lenstrace/lens_model.hpp"
#include "lenstrace/raytrace.hpp"

namespace lenstrace {

using Complex = std::complex<double>;

enum class ObliquityPolicy {
    Inclination,  // K = (1 + cos(D, r)) / 2
    Literal,      // K = (cos(n, r) - cos(n, D)) / 2
};

/// Wave number in rad/mm for a vacuum wavelength in nm.
inline double wave_number(double wavelength_nm) { return 2.0 * M_PI / (wavelength_nm * 1e-6); }

double obliquity(const Vec3& d, const Vec3& r, const Vec3& n, ObliquityPolicy policy);

/// a0 e^{ikl} / l with a0 = 1.
Complex pupil_amplitude(double opl, double k);

/// One secondary source on the pupil plane.
struct Wavelet {
    Vec3 position;
    Vec3 direction;     // unit, direction of the traced ray at the pupil
    Complex amplitude;  // e^{ikl} / l
};

Wavelet make_wavelet(const TraceResult& sample, double k);

/// Complex amplitude contributed by a traced pupil sample at an image point.
Complex wavelet_field(const TraceResult& sample, const Vec3& image_point, double k,
                      ObliquityPolicy policy = ObliquityPolicy::Inclination, const Vec3& normal = {0, 0, 1});
Complex wavelet_field(const Wavelet& w, const Vec3& image_point, double k,
                      ObliquityPolicy policy = ObliquityPolicy::Inclination, const Vec3& normal = {0, 0, 1});

struct PupilGridSpec {
    double center_x = 0.0;
    double center_y = 0.0;
    double range_x = 0.0;  // mm, full width of the sampled window
    double range_y = 0.0;
    int samples_x = 128;
    int samples_y = 128;
    Vec3 normal{0.0, 0.0, 1.0};

    double interval_x() const { return range_x / samples_x; }
    double interval_y() const { return range_y / samples_y; }
    double x(int i) const { return center_x - 0.5 * range_x + (i + 0.5) * interval_x(); }
    double y(int j) const { return center_y - 0.5 * range_y + (j + 0.5) * interval_y(); }
};

struct ImageGridSpec {
    double center_x = 0.0;
    double center_y = 0.0;
    double z = 0.0;
    double interval = 0.0;  // mm
    int nx = 0;
    int ny = 0;

    /// Grid with ceil(range / interval) points per side, centered on (cx, cy).
    static ImageGridSpec from_range(double cx, double cy, double z, double range_x, double range_y,
                                    double interval);

    double x(int i) const { return center_x + (i - 0.5 * (nx - 1)) * interval; }
    double y(int j) const { return center_y + (j - 0.5 * (ny - 1)) * interval; }
    std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
};

/// Monochromatic PSF, row-major with rows along +y.
struct MonoPsf {
    ImageGridSpec grid;
    std::vector<double> intensity;
    double wavelength_nm = 0.0;
    double transmitted = 0.0;  // surviving / launched pupil samples

    double at(int i, int j) const { return intensity[static_cast<std::size_t>(j) * grid.nx + i]; }
    double sum() const;
    double peak() const;
};

class PsfError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PupilSamples {
    std::vector<Wavelet> wavelets;
    std::size_t launched = 0;
    double transmitted() const {
        return launched ? static_cast<double>(wavelets.size()) / static_cast<double>(launched) : 0.0;
    }
};

/// Traces every pupil grid point; vignetted and TIR samples are dropped.
PupilSamples sample_pupil(const TraceContext& ctx, const Vec3& object_point, const PupilGridSpec& pupil);

/// Coherent sum over wavelets at every image grid point.
std::vector<Complex> superpose(const std::vector<Wavelet>& wavelets, const ImageGridSpec& grid, double k,
                               ObliquityPolicy policy = ObliquityPolicy::Inclination,
                               const Vec3& normal = {0, 0, 1});
/// Coherent sum at a single point (same arithmetic as superpose).
Complex superpose_at(const std::vector<Wavelet>& wavelets, const Vec3& point, double k,
                     ObliquityPolicy policy = ObliquityPolicy::Inclination, const Vec3& normal = {0, 0, 1});

std::vector<double> intensity(const std::vector<Complex>& field);

MonoPsf psf_from_wavelets(const std::vector<Wavelet>& wavelets, const ImageGridSpec& grid, double wavelength_nm,
                          double transmitted, ObliquityPolicy policy = ObliquityPolicy::Inclination,
                          const Vec3& normal = {0, 0, 1});

MonoPsf psf_monochromatic(const TraceContext& ctx, const Vec3& object_point, const PupilGridSpec& pupil,
                          const ImageGridSpec& image, ObliquityPolicy policy = ObliquityPolicy::Inclination);
MonoPsf psf_monochromatic(const LensPrescription& lens, const Vec3& object_point, double wavelength_nm,
                          const PupilGridSpec& pupil, const ImageGridSpec& image,
                          ObliquityPolicy policy = ObliquityPolicy::Inclination);

/// Same wavelets with every phase chosen to arrive at `focus` in phase; the
/// amplitude moduli are kept.
std::vector<Wavelet> flatten_phase(const std::vector<Wavelet>& wavelets, const Vec3& focus, double k);

/// max(psf) / max(reference); values above one by less than 1e-6 are reported as one.
double strehl(const MonoPsf& psf, const MonoPsf& reference);

/// Strehl ratio of one field point, evaluated on a fine grid around the chief
/// ray and refined with a local peak search.
struct FieldStrehl {
    double strehl = 0.0;
    double peak = 0.0;
    double reference_peak = 0.0;
    Vec3 chief;
};
FieldStrehl field_strehl(const TraceContext& ctx, const Vec3& object_point, const PupilGridSpec& pupil,
                         ObliquityPolicy policy = ObliquityPolicy::Inclination);

/// Box-integrates a fine PSF whose grid is `factor` times denser than the pixel grid.
MonoPsf bin_psf(const MonoPsf& fine, int factor);

// ---------------------------------------------------------------------------
// Spectral assembly

struct SpectralModel {
    std::vector<double> wavelengths_nm;
    std::array<std::vector<double>, 3> response;  // C_wav on wavelengths_nm
    std::optional<RelativeIllumination> illumination;  // C_ill table, sampled on table_wavelengths_nm
    std::vector<double> table_wavelengths_nm;

    static SpectralModel from_sensor(const SensorSpec& sensor, const std::vector<double>& wavelengths_nm);
    double illumination_at(double fov, double wavelength_nm) const;
    std::size_t index_of(double wavelength_nm) const;  // throws outside the set
};

/// C_e(fov, lambda) = C_ill(fov, lambda) * C_wav(lambda).
double spectral_weight(double fov, double wavelength_nm, const SpectralModel& model, int channel);

struct ChannelKernels {
    ImageGridSpec grid;                      // shared by all channels
    std::array<std::vector<double>, 3> kernels;  // unit sum each
    std::array<double, 3> raw_sum{};         // sum before normalization
};

/// kernel_c = normalize(sum_l C_e * T_l * normalize(I_l)). When `illumination`
/// is given it replaces C_ill (one value per mono).
ChannelKernels assemble_channel_kernels(const std::vector<MonoPsf>& monos, const SpectralModel& model,
                                        double fov, const std::vector<double>* illumination = nullptr);

// ---------------------------------------------------------------------------
// Field grid

struct PsfGridSpec {
    int rows = 6;
    int cols = 8;
    std::vector<double> wavelengths_nm{400, 450, 500, 550, 600, 650, 700};
    int pupil_samples = 128;
    int oversample = 10;
    double crop_energy = 0.999;
    int max_kernel = 129;
    double reference_wavelength_nm = 550.0;
    double pupil_margin = 1.1;
    double spot_margin = 1.5;
    ObliquityPolicy obliquity = ObliquityPolicy::Inclination;
    int threads = 0;  // 0 = hardware concurrency
};

/// Per-cell kernels at sensor pitch; all channels of a cell share one size.
struct PsfCell {
    int height = 1;
    int width = 1;
    std::vector<std::vector<float>> kernels;   // [channel][height * width]
    std::vector<float> illumination;           // [channel]

    bool operator==(const PsfCell& o) const {
        return height == o.height && width == o.width && kernels == o.kernels && illumination == o.illumination;
    }
};

struct PsfGrid {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::uint32_t channels = 3;
    std::uint32_t patch_size = 0;
    std::uint32_t max_kernel = 0;
    std::vector<PsfCell> cells;  // row-major

    PsfCell& cell(std::size_t r, std::size_t c) { return cells[r * cols + c]; }
    const PsfCell& cell(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }
    bool operator==(const PsfGrid&) const = default;
};

/// Sensor-plane center (mm) of a field cell; rows run along +y.
std::pair<double, double> cell_center_mm(const SensorSpec& sensor, int rows, int cols, int r, int c);

/// Object point and pupil window center for one image-plane position.
struct FieldPlan {
    double image_x = 0.0;
    double image_y = 0.0;
    Vec3 object_point;
    double pupil_center_x = 0.0;
    double pupil_center_y = 0.0;
    double footprint_extent = 0.0;  // larger side of the transmitted beam's bounding box
};
FieldPlan plan_field(const OpticalSystem& system, const PsfGridSpec& spec, double image_x, double image_y);

/// Per-cell plans plus the common pupil window size shared by every cell.
struct PupilPlan {
    double range = 0.0;
    std::vector<FieldPlan> cells;  // row-major
    FieldPlan axis;
};
PupilPlan plan_pupil(const OpticalSystem& system, const PsfGridSpec& spec);

/// Everything computed for one image-plane position.
struct FieldKernels {
    Vec3 chief;                       // reference-wavelength chief ray on the image plane
    int half_size = 0;                // kernels span 2 * half_size + 1 pixels
    std::vector<MonoPsf> pixel_psfs;  // per wavelength, binned to pixel pitch, unnormalized
    std::vector<double> fine_energy;  // per wavelength, sum of the fine intensity
};
FieldKernels compute_field_kernels(const OpticalSystem& system, const PsfGridSpec& spec, const FieldPlan& field,
                                   double pupil_range);

/// Per-wavelength relative illumination derived from the PSF energies when the
/// sensor has no table: energy ratio to the axis divided by the transmission ratio.
std::vector<double> derived_illumination(const FieldKernels& field, const FieldKernels& axis);

/// Channel kernels of one field position, with C_ill from the sensor table or derived.
ChannelKernels field_channel_kernels(const OpticalSystem& system, const PsfGridSpec& spec,
                                     const FieldKernels& field, const FieldKernels& axis);

/// Builds one stored cell from field kernels given on-axis reference sums.
PsfCell make_cell(const ChannelKernels& assembled, const std::array<double, 3>& axis_sum, double crop_energy,
                  int max_kernel);

PsfGrid compute_psf_grid(const OpticalSystem& system, const PsfGridSpec& spec);
/// Recomputes only the listed cells (row-major indices) with the plan used by compute_psf_grid.
std::vector<PsfCell> compute_psf_cells(const OpticalSystem& system, const PsfGridSpec& spec,
                                       const std::vector<std::size_t>& cells);

/// Float kernel whose double-precision sum is 1 within 1e-9.
std::vector<float> to_unit_float(const std::vector<double>& kernel);

}  // namespace lenstrace
