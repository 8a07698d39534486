#include "lenstrace/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

#include "lenstrace/parallel.hpp"

namespace lenstrace {

double psnr(const Image& a, const Image& b, double peak) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: image shapes differ");
    if (a.data.empty()) throw std::invalid_argument("psnr: empty images");
    double sse = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        sse += d * d;
    }
    if (sse == 0.0) return std::numeric_limits<double>::infinity();
    double mse = sse / static_cast<double>(a.data.size());
    return 10.0 * std::log10(peak * peak / mse);
}

namespace {

constexpr int kSsimRadius = 5;

std::array<double, 2 * kSsimRadius + 1> ssim_window() {
    std::array<double, 2 * kSsimRadius + 1> g{};
    double sum = 0.0;
    for (int k = -kSsimRadius; k <= kSsimRadius; ++k) {
        g[k + kSsimRadius] = std::exp(-0.5 * k * k / (1.5 * 1.5));
        sum += g[k + kSsimRadius];
    }
    for (double& v : g) v /= sum;
    return g;
}

// Gaussian-weighted mean of `plane` at every position where the window fits.
std::vector<double> valid_filter(const std::vector<double>& plane, int H, int W) {
    static const auto g = ssim_window();
    const int n = 2 * kSsimRadius + 1;
    const int VW = W - n + 1, VH = H - n + 1;
    std::vector<double> horiz(static_cast<std::size_t>(H) * VW, 0.0);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < VW; ++c) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += g[k] * plane[static_cast<std::size_t>(r) * W + c + k];
            horiz[static_cast<std::size_t>(r) * VW + c] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(VH) * VW, 0.0);
    for (int r = 0; r < VH; ++r)
        for (int k = 0; k < n; ++k)
            for (int c = 0; c < VW; ++c)
                out[static_cast<std::size_t>(r) * VW + c] += g[k] * horiz[static_cast<std::size_t>(r + k) * VW + c];
    return out;
}

}  // namespace

double ssim(const Image& a, const Image& b, double data_range) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim: image shapes differ");
    if (a.height < 2 * kSsimRadius + 1 || a.width < 2 * kSsimRadius + 1) {
        throw std::invalid_argument("ssim: images must be at least 11x11");
    }
    const double c1 = std::pow(0.01 * data_range, 2), c2 = std::pow(0.03 * data_range, 2);
    const int H = a.height, W = a.width;
    const std::size_t n = a.pixels();
    double total = 0.0;
    for (int ch = 0; ch < a.channels; ++ch) {
        std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
        for (std::size_t p = 0; p < n; ++p) {
            x[p] = a.data[p * a.channels + ch];
            y[p] = b.data[p * b.channels + ch];
            xx[p] = x[p] * x[p];
            yy[p] = y[p] * y[p];
            xy[p] = x[p] * y[p];
        }
        auto mx = valid_filter(x, H, W), my = valid_filter(y, H, W);
        auto mxx = valid_filter(xx, H, W), myy = valid_filter(yy, H, W), mxy = valid_filter(xy, H, W);
        double sum = 0.0;
        for (std::size_t i = 0; i < mx.size(); ++i) {
            double vx = mxx[i] - mx[i] * mx[i];
            double vy = myy[i] - my[i] * my[i];
            double cxy = mxy[i] - mx[i] * my[i];
            sum += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) /
                   ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
        }
        total += sum / static_cast<double>(mx.size());
    }
    return total / a.channels;
}

MtfCurve mtf_from_lsf(const std::vector<double>& lsf, const std::vector<double>& positions, int samples) {
    if (lsf.empty() || lsf.size() != positions.size()) throw std::invalid_argument("mtf: empty or mismatched LSF");
    if (samples < 2) throw std::invalid_argument("mtf: need at least two frequency samples");
    double dc = 0.0;
    for (double v : lsf) dc += v;
    if (!(std::abs(dc) > 0.0)) throw std::invalid_argument("mtf: LSF has zero sum");
    MtfCurve curve;
    curve.frequency.resize(samples);
    curve.modulation.resize(samples);
    for (int k = 0; k < samples; ++k) {
        const double f = 0.5 * k / (samples - 1);
        std::complex<double> s = 0.0;
        for (std::size_t i = 0; i < lsf.size(); ++i) s += lsf[i] * std::polar(1.0, -2.0 * M_PI * f * positions[i]);
        curve.frequency[k] = f;
        curve.modulation[k] = std::abs(s) / std::abs(dc);
    }
    curve.modulation[0] = 1.0;
    return curve;
}

MtfCurve mtf_from_psf(const std::vector<double>& kernel, int height, int width, char axis, int samples) {
    if (kernel.empty() || kernel.size() != static_cast<std::size_t>(height) * width) {
        throw std::invalid_argument("mtf: empty kernel or size mismatch");
    }
    if (axis != 'x' && axis != 'y') throw std::invalid_argument("mtf: axis must be 'x' or 'y'");
    const int n = axis == 'x' ? width : height;
    std::vector<double> lsf(n, 0.0), pos(n);
    for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j) lsf[axis == 'x' ? j : i] += kernel[static_cast<std::size_t>(i) * width + j];
    for (int i = 0; i < n; ++i) pos[i] = i - n / 2;
    MtfCurve curve = mtf_from_lsf(lsf, pos, samples);
    curve.orientation = std::string(1, axis);
    return curve;
}

MtfCurve mtf_from_psf(const std::vector<float>& kernel, int height, int width, char axis, int samples) {
    return mtf_from_psf(std::vector<double>(kernel.begin(), kernel.end()), height, width, axis, samples);
}

MtfCurve mtf_along(const std::vector<double>& kernel, int height, int width, double ux, double uy, int samples) {
    if (kernel.empty() || kernel.size() != static_cast<std::size_t>(height) * width) {
        throw std::invalid_argument("mtf: empty kernel or size mismatch");
    }
    std::vector<double> pos(kernel.size());
    for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j)
            pos[static_cast<std::size_t>(i) * width + j] = ux * (j - width / 2) + uy * (i - height / 2);
    return mtf_from_lsf(kernel, pos, samples);
}

double mtf_area(const MtfCurve& curve) {
    double area = 0.0;
    for (std::size_t k = 1; k < curve.frequency.size(); ++k) {
        area += 0.5 * (curve.modulation[k] + curve.modulation[k - 1]) * (curve.frequency[k] - curve.frequency[k - 1]);
    }
    return area;
}

namespace {

struct CellGeometry {
    double x = 0.0;  // pixels from the sensor center, along columns
    double y = 0.0;  // along rows
    double fov = 0.0;
};

CellGeometry cell_geometry(const PsfGrid& grid, std::size_t r, std::size_t c) {
    const double H = static_cast<double>(grid.rows) * grid.patch_size;
    const double W = static_cast<double>(grid.cols) * grid.patch_size;
    CellGeometry g;
    g.x = (c + 0.5) * grid.patch_size - 0.5 * W;
    g.y = (r + 0.5) * grid.patch_size - 0.5 * H;
    g.fov = std::hypot(g.x, g.y) / (0.5 * std::hypot(H, W));
    return g;
}

}  // namespace

std::vector<CellMtf> grid_mtf(const PsfGrid& grid, int channel, int samples) {
    if (channel < 0 || channel >= static_cast<int>(grid.channels)) throw std::invalid_argument("mtf: bad channel");
    std::vector<CellMtf> out;
    for (std::size_t r = 0; r < grid.rows; ++r)
        for (std::size_t c = 0; c < grid.cols; ++c) {
            const PsfCell& cell = grid.cell(r, c);
            CellGeometry g = cell_geometry(grid, r, c);
            double rad = std::hypot(g.x, g.y);
            double ux = 0.0, uy = 1.0;
            if (rad > 1e-9) {
                ux = g.x / rad;
                uy = g.y / rad;
            }
            std::vector<double> k(cell.kernels[channel].begin(), cell.kernels[channel].end());
            CellMtf m;
            m.row = static_cast<int>(r);
            m.col = static_cast<int>(c);
            m.fov = g.fov;
            m.tangential = mtf_along(k, cell.height, cell.width, ux, uy, samples);
            m.tangential.orientation = "tangential";
            m.sagittal = mtf_along(k, cell.height, cell.width, -uy, ux, samples);
            m.sagittal.orientation = "sagittal";
            out.push_back(std::move(m));
        }
    return out;
}

MtfCurve slanted_edge_mtf(const Image& image, int channel, const EdgeRoi& roi, const EdgeGeometry& edge,
                          int samples) {
    const double half_width = edge.half_width, bin = edge.bin;
    if (channel < 0 || channel >= image.channels) throw std::invalid_argument("edge: bad channel");
    if (roi.top < 0 || roi.left < 0 || roi.top + roi.height > image.height || roi.left + roi.width > image.width ||
        roi.height <= 0 || roi.width <= 0) {
        throw std::invalid_argument("edge: ROI outside the image");
    }
    if (!(bin > 0.0) || !(half_width > bin)) throw std::invalid_argument("edge: invalid binning");
    const double norm = std::hypot(edge.nx, edge.ny);
    if (!(norm > 0.0)) throw std::invalid_argument("edge: zero normal");
    const double nx = edge.nx / norm, ny = edge.ny / norm;
    const int bins = static_cast<int>(std::lround(2.0 * half_width / bin));
    std::vector<double> sum(bins, 0.0), count(bins, 0.0);
    for (int r = roi.top; r < roi.top + roi.height; ++r)
        for (int c = roi.left; c < roi.left + roi.width; ++c) {
            if (edge.include && !edge.include(r, c)) continue;
            double d = (c - edge.x0) * nx + (r - edge.y0) * ny;
            int b = static_cast<int>(std::floor((d + half_width) / bin));
            if (b < 0 || b >= bins) continue;
            sum[b] += image.at(r, c, channel);
            count[b] += 1.0;
        }
    // Bin means, with empty bins filled linearly from their neighbours.
    std::vector<double> esf(bins);
    std::vector<int> filled;
    for (int b = 0; b < bins; ++b)
        if (count[b] > 0) {
            esf[b] = sum[b] / count[b];
            filled.push_back(b);
        }
    if (filled.size() < 2) throw std::invalid_argument("edge: ROI does not straddle the edge");
    for (int b = 0; b < bins; ++b) {
        if (count[b] > 0) continue;
        auto it = std::lower_bound(filled.begin(), filled.end(), b);
        if (it == filled.begin()) {
            esf[b] = esf[filled.front()];
        } else if (it == filled.end()) {
            esf[b] = esf[filled.back()];
        } else {
            int hi = *it, lo = *(it - 1);
            esf[b] = esf[lo] + (esf[hi] - esf[lo]) * (b - lo) / static_cast<double>(hi - lo);
        }
    }
    std::vector<double> lsf(bins - 1), pos(bins - 1);
    for (int b = 0; b + 1 < bins; ++b) {
        lsf[b] = esf[b + 1] - esf[b];
        pos[b] = (b + 1) * bin - half_width;
    }
    MtfCurve curve = mtf_from_lsf(lsf, pos, samples);
    curve.orientation = "edge";
    return curve;
}

namespace {

std::pair<double, double> centroid(const std::vector<float>& k, int h, int w) {
    double s = 0.0, sx = 0.0, sy = 0.0;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double v = k[static_cast<std::size_t>(i) * w + j];
            s += v;
            sx += v * j;
            sy += v * i;
        }
    if (!(s > 0.0)) throw std::invalid_argument("ca_curve: kernel has no energy");
    return {sx / s, sy / s};
}

}  // namespace

std::vector<CaPoint> ca_curve(const PsfGrid& grid) {
    if (grid.channels < 2) throw std::invalid_argument("ca_curve: need at least two channels");
    const int ref = grid.channels >= 3 ? 1 : 0;
    std::vector<CaPoint> out;
    for (std::size_t r = 0; r < grid.rows; ++r)
        for (std::size_t c = 0; c < grid.cols; ++c) {
            const PsfCell& cell = grid.cell(r, c);
            auto g = centroid(cell.kernels[ref], cell.height, cell.width);
            auto dist = [&](int ch) {
                auto p = centroid(cell.kernels[ch], cell.height, cell.width);
                return std::hypot(p.first - g.first, p.second - g.second);
            };
            CaPoint p;
            p.row = static_cast<int>(r);
            p.col = static_cast<int>(c);
            p.fov = cell_geometry(grid, r, c).fov;
            p.red = ref == 1 ? dist(0) : dist(1);
            p.blue = grid.channels >= 3 ? dist(2) : 0.0;
            out.push_back(p);
        }
    return out;
}

std::vector<FieldValue> strehl_curve(const OpticalSystem& system, const std::vector<double>& fovs,
                                     double wavelength_nm, int pupil_samples, double pupil_margin,
                                     ObliquityPolicy policy, int threads) {
    PsfGridSpec spec;
    spec.reference_wavelength_nm = wavelength_nm;
    const double hd = system.sensor.half_diagonal_mm();
    std::vector<FieldPlan> plans(fovs.size());
    parallel_for(fovs.size(), threads, [&](std::size_t i) { plans[i] = plan_field(system, spec, 0.0, fovs[i] * hd); });
    double extent = 0.0;
    for (const FieldPlan& p : plans) extent = std::max(extent, p.footprint_extent);
    TraceContext ctx(system.lens, wavelength_nm);
    std::vector<FieldValue> out(fovs.size());
    parallel_for(fovs.size(), threads, [&](std::size_t i) {
        PupilGridSpec pupil;
        pupil.center_x = plans[i].pupil_center_x;
        pupil.center_y = plans[i].pupil_center_y;
        pupil.range_x = pupil.range_y = pupil_margin * extent;
        pupil.samples_x = pupil.samples_y = pupil_samples;
        out[i] = {fovs[i], field_strehl(ctx, plans[i].object_point, pupil, policy).strehl};
    });
    return out;
}

std::vector<FieldMtfArea> mtf_area_curve(const OpticalSystem& system, const PsfGridSpec& spec,
                                         const std::vector<double>& fovs) {
    const double hd = system.sensor.half_diagonal_mm();
    // Index 0 is the axis, which also supplies the illumination reference.
    std::vector<FieldPlan> plans(fovs.size() + 1);
    parallel_for(plans.size(), spec.threads, [&](std::size_t i) {
        plans[i] = plan_field(system, spec, 0.0, i == 0 ? 0.0 : fovs[i - 1] * hd);
    });
    double extent = 0.0;
    for (const FieldPlan& p : plans) extent = std::max(extent, p.footprint_extent);
    const double range = spec.pupil_margin * extent;
    const FieldKernels axis = compute_field_kernels(system, spec, plans[0], range);
    std::vector<FieldMtfArea> out(fovs.size());
    parallel_for(fovs.size(), spec.threads, [&](std::size_t i) {
        FieldKernels fk = compute_field_kernels(system, spec, plans[i + 1], range);
        ChannelKernels ck = field_channel_kernels(system, spec, fk, axis);
        out[i].fov = fovs[i];
        for (int ch = 0; ch < 3; ++ch) {
            const auto& k = ck.kernels[ch];
            out[i].sagittal[ch] = mtf_area(mtf_along(k, ck.grid.ny, ck.grid.nx, 1.0, 0.0));
            out[i].tangential[ch] = mtf_area(mtf_along(k, ck.grid.ny, ck.grid.nx, 0.0, 1.0));
        }
    });
    return out;
}

}  // namespace lenstrace
