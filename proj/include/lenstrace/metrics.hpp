#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "lenstrace/image.hpp"
#include "lenstrace/lens_model.hpp"
#include "lenstrace/psf.hpp"

namespace lenstrace {

/// 10 log10(peak^2 / MSE); +infinity when the images are identical.
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Mean single-scale SSIM over channels: 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, population statistics, averaged over the positions
/// where the window fits inside the image.
double ssim(const Image& a, const Image& b, double data_range = 1.0);

struct MtfCurve {
    std::vector<double> frequency;   // cycles/pixel, 0 to 0.5
    std::vector<double> modulation;  // 1 at DC
    std::string orientation;         // x, y, sagittal, tangential or edge
};

inline constexpr int kMtfSamples = 65;

/// Transform of a line-spread function whose samples sit at `positions` (pixels).
MtfCurve mtf_from_lsf(const std::vector<double>& lsf, const std::vector<double>& positions,
                      int samples = kMtfSamples);

/// LSF from column sums (orientation "x", frequencies along x) or row sums ("y").
MtfCurve mtf_from_psf(const std::vector<double>& kernel, int height, int width, char axis,
                      int samples = kMtfSamples);
MtfCurve mtf_from_psf(const std::vector<float>& kernel, int height, int width, char axis,
                      int samples = kMtfSamples);
/// Frequencies along the unit direction (ux, uy) in (column, row) pixel axes.
MtfCurve mtf_along(const std::vector<double>& kernel, int height, int width, double ux, double uy,
                   int samples = kMtfSamples);

/// Trapezoidal integral of the modulation over the frequency samples.
double mtf_area(const MtfCurve& curve);

/// Sagittal and tangential MTF of one cell. Tangential frequencies run along
/// the radius from the sensor center (along rows for the center cell).
struct CellMtf {
    int row = 0;
    int col = 0;
    double fov = 0.0;  // cell center radius / half diagonal
    MtfCurve sagittal;
    MtfCurve tangential;
};
std::vector<CellMtf> grid_mtf(const PsfGrid& grid, int channel, int samples = kMtfSamples);

/// Edge-spread measurement: pixels of `channel` inside the ROI (optionally only
/// those accepted by `include`) are projected on the edge normal through
/// (x0, y0) in (column, row) coordinates, averaged in bins of `bin` pixels
/// within +-half_width, differentiated and transformed.
struct EdgeRoi {
    int top = 0;
    int left = 0;
    int height = 0;
    int width = 0;
};
struct EdgeGeometry {
    double x0 = 0.0;
    double y0 = 0.0;
    double nx = 1.0;
    double ny = 0.0;
    double half_width = 12.0;
    double bin = 0.1;
    std::function<bool(int row, int col)> include;
};
MtfCurve slanted_edge_mtf(const Image& image, int channel, const EdgeRoi& roi, const EdgeGeometry& edge,
                          int samples = kMtfSamples);

/// Centroid displacement of R and B kernels relative to G, in pixels.
struct CaPoint {
    int row = 0;
    int col = 0;
    double fov = 0.0;
    double red = 0.0;
    double blue = 0.0;
    double max() const { return red > blue ? red : blue; }
};
std::vector<CaPoint> ca_curve(const PsfGrid& grid);

/// Strehl ratio at image heights fov * half diagonal along +y.
struct FieldValue {
    double fov = 0.0;
    double value = 0.0;
};
std::vector<FieldValue> strehl_curve(const OpticalSystem& system, const std::vector<double>& fovs,
                                     double wavelength_nm, int pupil_samples = 128, double pupil_margin = 1.1,
                                     ObliquityPolicy policy = ObliquityPolicy::Inclination, int threads = 0);

/// Polychromatic MTF areas at image heights fov * half diagonal along +y, from
/// the uncropped channel kernels. Sagittal frequencies run along x.
struct FieldMtfArea {
    double fov = 0.0;
    std::array<double, 3> sagittal{};
    std::array<double, 3> tangential{};
    double mean(int channel) const { return 0.5 * (sagittal[channel] + tangential[channel]); }
};
std::vector<FieldMtfArea> mtf_area_curve(const OpticalSystem& system, const PsfGridSpec& spec,
                                         const std::vector<double>& fovs);

}  // namespace lenstrace
