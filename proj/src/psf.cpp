#include "lenstrace/psf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fast_sincos.hpp"
#include "lenstrace/parallel.hpp"

namespace lenstrace {

double obliquity(const Vec3& d, const Vec3& r, const Vec3& n, ObliquityPolicy policy) {
    const double inv = 1.0 / length(r);
    if (policy == ObliquityPolicy::Literal) return 0.5 * (dot(n, r) * inv - dot(n, d));
    return 0.5 * (1.0 + dot(d, r) * inv);
}

Complex pupil_amplitude(double opl, double k) { return std::polar(1.0 / opl, k * opl); }

Wavelet make_wavelet(const TraceResult& sample, double k) {
    return {sample.pupil_point, sample.direction, pupil_amplitude(sample.opl, k)};
}

Complex wavelet_field(const Wavelet& w, const Vec3& image_point, double k, ObliquityPolicy policy,
                      const Vec3& normal) {
    Vec3 r = image_point - w.position;
    if (r.z <= 0.0) throw PsfError("image point must lie behind the pupil sample");
    double len = length(r);
    double kf = obliquity(w.direction, r, normal, policy);
    return w.amplitude * std::polar(kf / len, k * len);
}

Complex wavelet_field(const TraceResult& sample, const Vec3& image_point, double k, ObliquityPolicy policy,
                      const Vec3& normal) {
    return wavelet_field(make_wavelet(sample, k), image_point, k, policy, normal);
}

ImageGridSpec ImageGridSpec::from_range(double cx, double cy, double z, double range_x, double range_y,
                                        double interval) {
    if (!(interval > 0.0)) throw PsfError("image sample interval must be positive");
    ImageGridSpec g;
    g.center_x = cx;
    g.center_y = cy;
    g.z = z;
    g.interval = interval;
    g.nx = std::max(1, static_cast<int>(std::ceil(range_x / interval - 1e-9)));
    g.ny = std::max(1, static_cast<int>(std::ceil(range_y / interval - 1e-9)));
    return g;
}

double MonoPsf::sum() const { return std::accumulate(intensity.begin(), intensity.end(), 0.0); }

double MonoPsf::peak() const {
    return intensity.empty() ? 0.0 : *std::max_element(intensity.begin(), intensity.end());
}

PupilSamples sample_pupil(const TraceContext& ctx, const Vec3& object_point, const PupilGridSpec& pupil) {
    if (pupil.samples_x <= 0 || pupil.samples_y <= 0 || !(pupil.range_x > 0.0) || !(pupil.range_y > 0.0)) {
        throw PsfError("invalid pupil grid");
    }
    PupilSamples out;
    const double k = wave_number(ctx.wavelength_nm());
    out.launched = static_cast<std::size_t>(pupil.samples_x) * static_cast<std::size_t>(pupil.samples_y);
    out.wavelets.reserve(out.launched);
    for (int j = 0; j < pupil.samples_y; ++j) {
        for (int i = 0; i < pupil.samples_x; ++i) {
            TraceResult r;
            if (trace(ctx, object_point, pupil.x(i), pupil.y(j), r) == RayStatus::Ok) {
                out.wavelets.push_back(make_wavelet(r, k));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Superposition. Wavelets are the outer loop and image points the inner one,
// so each point accumulates in the same order as the plain double loop.

namespace {

constexpr std::size_t kBlock = 4096;

template <ObliquityPolicy Policy>
void accumulate_block(const std::vector<Wavelet>& wavelets, const double* xs, const double* ys, double z,
                      std::size_t n, double k, const Vec3& normal, double* re, double* im) {
    for (const Wavelet& w : wavelets) {
        const double px = w.position.x, py = w.position.y, rz = z - w.position.z;
        const double dx = w.direction.x, dy = w.direction.y, dz = w.direction.z;
        const double ar = w.amplitude.real(), ai = w.amplitude.imag();
        const double nd = dot(normal, w.direction);
        const double nx = normal.x, ny = normal.y, nz = normal.z;
        for (std::size_t i = 0; i < n; ++i) {
            const double rx = xs[i] - px;
            const double ry = ys[i] - py;
            const double len = std::sqrt(rx * rx + ry * ry + rz * rz);
            const double inv = 1.0 / len;
            double kf;
            if constexpr (Policy == ObliquityPolicy::Literal) {
                kf = 0.5 * ((nx * rx + ny * ry + nz * rz) * inv - nd);
            } else {
                kf = 0.5 * (1.0 + (dx * rx + dy * ry + dz * rz) * inv);
            }
            const double mag = kf * inv;
            double s, c;
            detail::fast_sincos(k * len, s, c);
            re[i] += (ar * c - ai * s) * mag;
            im[i] += (ar * s + ai * c) * mag;
        }
    }
}

}  // namespace

std::vector<Complex> superpose(const std::vector<Wavelet>& wavelets, const ImageGridSpec& grid, double k,
                               ObliquityPolicy policy, const Vec3& normal) {
    const std::size_t n = grid.size();
    for (const Wavelet& w : wavelets) {
        if (!(grid.z > w.position.z)) throw PsfError("image plane must lie behind every pupil sample");
    }
    std::vector<double> xs(n), ys(n), re(n, 0.0), im(n, 0.0);
    for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
            std::size_t idx = static_cast<std::size_t>(j) * grid.nx + i;
            xs[idx] = grid.x(i);
            ys[idx] = grid.y(j);
        }
    }
    for (std::size_t start = 0; start < n; start += kBlock) {
        std::size_t m = std::min(kBlock, n - start);
        if (policy == ObliquityPolicy::Literal) {
            accumulate_block<ObliquityPolicy::Literal>(wavelets, xs.data() + start, ys.data() + start, grid.z, m,
                                                       k, normal, re.data() + start, im.data() + start);
        } else {
            accumulate_block<ObliquityPolicy::Inclination>(wavelets, xs.data() + start, ys.data() + start, grid.z,
                                                           m, k, normal, re.data() + start, im.data() + start);
        }
    }
    std::vector<Complex> field(n);
    for (std::size_t i = 0; i < n; ++i) field[i] = {re[i], im[i]};
    return field;
}

Complex superpose_at(const std::vector<Wavelet>& wavelets, const Vec3& point, double k, ObliquityPolicy policy,
                     const Vec3& normal) {
    double re = 0.0, im = 0.0;
    if (policy == ObliquityPolicy::Literal) {
        accumulate_block<ObliquityPolicy::Literal>(wavelets, &point.x, &point.y, point.z, 1, k, normal, &re, &im);
    } else {
        accumulate_block<ObliquityPolicy::Inclination>(wavelets, &point.x, &point.y, point.z, 1, k, normal, &re,
                                                       &im);
    }
    return {re, im};
}

std::vector<double> intensity(const std::vector<Complex>& field) {
    std::vector<double> out(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) out[i] = std::norm(field[i]);
    return out;
}

MonoPsf psf_from_wavelets(const std::vector<Wavelet>& wavelets, const ImageGridSpec& grid, double wavelength_nm,
                          double transmitted, ObliquityPolicy policy, const Vec3& normal) {
    MonoPsf psf;
    psf.grid = grid;
    psf.wavelength_nm = wavelength_nm;
    psf.transmitted = transmitted;
    psf.intensity = intensity(superpose(wavelets, grid, wave_number(wavelength_nm), policy, normal));
    return psf;
}

MonoPsf psf_monochromatic(const TraceContext& ctx, const Vec3& object_point, const PupilGridSpec& pupil,
                          const ImageGridSpec& image, ObliquityPolicy policy) {
    PupilSamples samples = sample_pupil(ctx, object_point, pupil);
    if (samples.wavelets.empty()) throw PsfError("every pupil sample is vignetted");
    return psf_from_wavelets(samples.wavelets, image, ctx.wavelength_nm(), samples.transmitted(), policy,
                             pupil.normal);
}

MonoPsf psf_monochromatic(const LensPrescription& lens, const Vec3& object_point, double wavelength_nm,
                          const PupilGridSpec& pupil, const ImageGridSpec& image, ObliquityPolicy policy) {
    TraceContext ctx(lens, wavelength_nm);
    return psf_monochromatic(ctx, object_point, pupil, image, policy);
}

std::vector<Wavelet> flatten_phase(const std::vector<Wavelet>& wavelets, const Vec3& focus, double k) {
    std::vector<Wavelet> out = wavelets;
    for (Wavelet& w : out) w.amplitude = std::polar(std::abs(w.amplitude), -k * length(focus - w.position));
    return out;
}

namespace {

double clamp_ratio(double ratio) { return (ratio > 1.0 && ratio <= 1.0 + 1e-6) ? 1.0 : ratio; }

// Compass search for a local intensity maximum starting at (x, y).
double refine_peak(const std::vector<Wavelet>& wavelets, double k, ObliquityPolicy policy, const Vec3& normal,
                   double z, double& x, double& y, double step) {
    auto value = [&](double px, double py) { return std::norm(superpose_at(wavelets, {px, py, z}, k, policy, normal)); };
    double best = value(x, y);
    const double stop = step / 256.0;
    while (step > stop) {
        bool moved = false;
        for (int d = 0; d < 8; ++d) {
            static constexpr int dirs[8][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
            double nx = x + dirs[d][0] * step, ny = y + dirs[d][1] * step;
            double v = value(nx, ny);
            if (v > best) {
                best = v;
                x = nx;
                y = ny;
                moved = true;
            }
        }
        if (!moved) step *= 0.5;
    }
    return best;
}

}  // namespace

double strehl(const MonoPsf& psf, const MonoPsf& reference) {
    double ref = reference.peak();
    if (!(ref > 0.0)) throw PsfError("reference PSF has no energy");
    return clamp_ratio(psf.peak() / ref);
}

FieldStrehl field_strehl(const TraceContext& ctx, const Vec3& object_point, const PupilGridSpec& pupil,
                         ObliquityPolicy policy) {
    const LensPrescription& lens = ctx.lens();
    const double k = wave_number(ctx.wavelength_nm());
    const double lambda_mm = ctx.wavelength_nm() * 1e-6;
    FieldStrehl out;
    out.chief = chief_ray(ctx, object_point).image_point;
    PupilSamples samples = sample_pupil(ctx, object_point, pupil);
    if (samples.wavelets.empty()) throw PsfError("every pupil sample is vignetted");
    const auto& ws = samples.wavelets;

    // Beam half width on the pupil and geometric spot half width on the image.
    double mx = 0, my = 0;
    for (const Wavelet& w : ws) {
        mx += w.position.x;
        my += w.position.y;
    }
    mx /= ws.size();
    my /= ws.size();
    double aperture = 0.0, spot = 0.0;
    for (const Wavelet& w : ws) {
        aperture = std::max(aperture, std::hypot(w.position.x - mx, w.position.y - my));
        double t = (lens.image_plane_z - w.position.z) / w.direction.z;
        spot = std::max({spot, std::abs(w.position.x + w.direction.x * t - out.chief.x),
                         std::abs(w.position.y + w.direction.y * t - out.chief.y)});
    }
    const double distance = lens.image_plane_z - lens.exit_pupil_z;
    const double f_number = distance / (2.0 * std::max(aperture, 1e-9));
    const double tau = lambda_mm * f_number / 3.0;
    const double half = 1.5 * spot + 3.0 * lambda_mm * f_number;
    ImageGridSpec grid = ImageGridSpec::from_range(out.chief.x, out.chief.y, lens.image_plane_z, 2.0 * half,
                                                   2.0 * half, tau);
    if (grid.nx % 2 == 0) ++grid.nx;
    if (grid.ny % 2 == 0) ++grid.ny;
    std::vector<double> psf = intensity(superpose(ws, grid, k, policy, pupil.normal));
    std::size_t arg = std::max_element(psf.begin(), psf.end()) - psf.begin();
    double px = grid.x(static_cast<int>(arg % grid.nx));
    double py = grid.y(static_cast<int>(arg / grid.nx));
    out.peak = refine_peak(ws, k, policy, pupil.normal, grid.z, px, py, tau);

    std::vector<Wavelet> ref = flatten_phase(ws, out.chief, k);
    double rx = out.chief.x, ry = out.chief.y;
    out.reference_peak = refine_peak(ref, k, policy, pupil.normal, grid.z, rx, ry, tau);
    if (!(out.reference_peak > 0.0)) throw PsfError("reference PSF has no energy");
    out.strehl = clamp_ratio(out.peak / out.reference_peak);
    return out;
}

MonoPsf bin_psf(const MonoPsf& fine, int factor) {
    if (factor <= 0 || fine.grid.nx % factor != 0 || fine.grid.ny % factor != 0) {
        throw PsfError("fine grid is not a multiple of the binning factor");
    }
    MonoPsf out;
    out.wavelength_nm = fine.wavelength_nm;
    out.transmitted = fine.transmitted;
    out.grid = fine.grid;
    out.grid.nx = fine.grid.nx / factor;
    out.grid.ny = fine.grid.ny / factor;
    out.grid.interval = fine.grid.interval * factor;
    out.intensity.assign(out.grid.size(), 0.0);
    for (int j = 0; j < fine.grid.ny; ++j) {
        for (int i = 0; i < fine.grid.nx; ++i) {
            out.intensity[static_cast<std::size_t>(j / factor) * out.grid.nx + i / factor] += fine.at(i, j);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spectral assembly

namespace {

double interp1(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (xs.size() == 1) return ys.front();
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
    double t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    return ys[i] + t * (ys[i + 1] - ys[i]);
}

}  // namespace

SpectralModel SpectralModel::from_sensor(const SensorSpec& sensor, const std::vector<double>& wavelengths_nm) {
    SpectralModel m;
    m.wavelengths_nm = wavelengths_nm;
    for (int c = 0; c < 3; ++c) {
        for (double wl : wavelengths_nm) m.response[c].push_back(sensor.response(c, wl));
    }
    m.illumination = sensor.relative_illumination;
    m.table_wavelengths_nm = sensor.wavelengths_nm;
    return m;
}

std::size_t SpectralModel::index_of(double wavelength_nm) const {
    for (std::size_t i = 0; i < wavelengths_nm.size(); ++i) {
        if (std::abs(wavelengths_nm[i] - wavelength_nm) < 1e-9) return i;
    }
    std::ostringstream os;
    os << "wavelength " << wavelength_nm << " nm is not in the spectral model";
    throw PsfError(os.str());
}

double SpectralModel::illumination_at(double fov, double wavelength_nm) const {
    if (!illumination) return 1.0;
    const RelativeIllumination& ri = *illumination;
    std::vector<double> at_fov(ri.fov.size());
    for (std::size_t i = 0; i < ri.fov.size(); ++i) at_fov[i] = interp1(table_wavelengths_nm, ri.values[i], wavelength_nm);
    return interp1(ri.fov, at_fov, std::clamp(fov, 0.0, 1.0));
}

double spectral_weight(double fov, double wavelength_nm, const SpectralModel& model, int channel) {
    std::size_t i = model.index_of(wavelength_nm);
    return model.illumination_at(fov, wavelength_nm) * model.response[channel][i];
}

ChannelKernels assemble_channel_kernels(const std::vector<MonoPsf>& monos, const SpectralModel& model, double fov,
                                        const std::vector<double>* illumination) {
    if (monos.empty()) throw PsfError("no monochromatic PSFs to assemble");
    if (illumination && illumination->size() != monos.size()) {
        throw PsfError("illumination override must have one value per wavelength");
    }
    const ImageGridSpec& g = monos.front().grid;
    for (const MonoPsf& m : monos) {
        if (m.grid.nx != g.nx || m.grid.ny != g.ny || m.grid.interval != g.interval ||
            m.grid.center_x != g.center_x || m.grid.center_y != g.center_y) {
            throw PsfError("monochromatic PSFs are not co-registered");
        }
    }
    ChannelKernels out;
    out.grid = g;
    for (int c = 0; c < 3; ++c) out.kernels[c].assign(g.size(), 0.0);
    for (std::size_t m = 0; m < monos.size(); ++m) {
        const MonoPsf& psf = monos[m];
        double total = psf.sum();
        if (!(total > 0.0) || !(psf.transmitted > 0.0)) continue;
        std::size_t wi = model.index_of(psf.wavelength_nm);
        double c_ill = illumination ? (*illumination)[m] : model.illumination_at(fov, psf.wavelength_nm);
        for (int c = 0; c < 3; ++c) {
            double w = c_ill * model.response[c][wi] * psf.transmitted;
            if (w == 0.0) continue;
            double scale = w / total;
            auto& kc = out.kernels[c];
            for (std::size_t i = 0; i < kc.size(); ++i) kc[i] += scale * psf.intensity[i];
            out.raw_sum[c] += w;
        }
    }
    for (int c = 0; c < 3; ++c) {
        if (!(out.raw_sum[c] > 0.0)) throw PsfError("channel has zero total response");
        double inv = 1.0 / std::accumulate(out.kernels[c].begin(), out.kernels[c].end(), 0.0);
        for (double& v : out.kernels[c]) v *= inv;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Field grid

std::pair<double, double> cell_center_mm(const SensorSpec& sensor, int rows, int cols, int r, int c) {
    const double ph = static_cast<double>(sensor.height) / rows;
    const double pw = static_cast<double>(sensor.width) / cols;
    const double p = sensor.pitch_mm();
    return {((c + 0.5) * pw - 0.5 * sensor.width) * p, ((r + 0.5) * ph - 0.5 * sensor.height) * p};
}

FieldPlan plan_field(const OpticalSystem& system, const PsfGridSpec& spec, double image_x, double image_y) {
    TraceContext ctx(system.lens, spec.reference_wavelength_nm);
    FieldPlan plan;
    plan.image_x = image_x;
    plan.image_y = image_y;
    plan.object_point = object_point_for_image(ctx, image_x, image_y);
    BeamFootprint fp = trace_footprint(ctx, plan.object_point);
    if (fp.pupil_points.empty()) throw PsfError("no rays reach the pupil plane for this field");
    double x0 = fp.pupil_points[0].x, x1 = x0, y0 = fp.pupil_points[0].y, y1 = y0;
    for (const Vec3& p : fp.pupil_points) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    plan.pupil_center_x = 0.5 * (x0 + x1);
    plan.pupil_center_y = 0.5 * (y0 + y1);
    plan.footprint_extent = std::max(x1 - x0, y1 - y0);
    return plan;
}

namespace {

int patch_size(const SensorSpec& sensor, const PsfGridSpec& spec) {
    if (spec.rows <= 0 || spec.cols <= 0 || sensor.height % spec.rows != 0 || sensor.width % spec.cols != 0 ||
        sensor.height / spec.rows != sensor.width / spec.cols) {
        std::ostringstream os;
        os << "field grid " << spec.rows << "x" << spec.cols << " does not tile the " << sensor.height << "x"
           << sensor.width << " sensor with square patches";
        throw PsfError(os.str());
    }
    return sensor.height / spec.rows;
}

}  // namespace

PupilPlan plan_pupil(const OpticalSystem& system, const PsfGridSpec& spec) {
    patch_size(system.sensor, spec);
    PupilPlan plan;
    plan.cells.resize(static_cast<std::size_t>(spec.rows) * spec.cols);
    parallel_for(plan.cells.size(), spec.threads, [&](std::size_t i) {
        auto [x, y] = cell_center_mm(system.sensor, spec.rows, spec.cols, static_cast<int>(i / spec.cols),
                                     static_cast<int>(i % spec.cols));
        plan.cells[i] = plan_field(system, spec, x, y);
    });
    plan.axis = plan_field(system, spec, 0.0, 0.0);
    double extent = plan.axis.footprint_extent;
    for (const FieldPlan& f : plan.cells) extent = std::max(extent, f.footprint_extent);
    plan.range = spec.pupil_margin * extent;
    return plan;
}

FieldKernels compute_field_kernels(const OpticalSystem& system, const PsfGridSpec& spec, const FieldPlan& field,
                                   double pupil_range) {
    const LensPrescription& lens = system.lens;
    const double pitch = system.sensor.pitch_mm();
    FieldKernels out;
    {
        TraceContext ref(lens, spec.reference_wavelength_nm);
        out.chief = chief_ray(ref, field.object_point).image_point;
    }
    PupilGridSpec pupil;
    pupil.center_x = field.pupil_center_x;
    pupil.center_y = field.pupil_center_y;
    pupil.range_x = pupil.range_y = pupil_range;
    pupil.samples_x = pupil.samples_y = spec.pupil_samples;

    const std::size_t nw = spec.wavelengths_nm.size();
    std::vector<PupilSamples> samples(nw);
    double spot = 0.0, aperture = 0.0, lambda_max = 0.0;
    for (std::size_t w = 0; w < nw; ++w) {
        TraceContext ctx(lens, spec.wavelengths_nm[w]);
        samples[w] = sample_pupil(ctx, field.object_point, pupil);
        lambda_max = std::max(lambda_max, spec.wavelengths_nm[w] * 1e-6);
        const auto& ws = samples[w].wavelets;
        if (ws.empty()) continue;
        double mx = 0, my = 0;
        for (const Wavelet& s : ws) {
            mx += s.position.x;
            my += s.position.y;
        }
        mx /= ws.size();
        my /= ws.size();
        for (const Wavelet& s : ws) {
            aperture = std::max(aperture, std::hypot(s.position.x - mx, s.position.y - my));
            double t = (lens.image_plane_z - s.position.z) / s.direction.z;
            spot = std::max({spot, std::abs(s.position.x + s.direction.x * t - out.chief.x),
                             std::abs(s.position.y + s.direction.y * t - out.chief.y)});
        }
    }
    if (!(aperture > 0.0)) throw PsfError("every pupil sample is vignetted at every wavelength");
    const double f_number = (lens.image_plane_z - lens.exit_pupil_z) / (2.0 * aperture);
    const double diffraction = 2.0 * 1.22 * lambda_max * f_number;
    const int max_half = (spec.max_kernel - 1) / 2;
    out.half_size = std::clamp(static_cast<int>(std::ceil((spec.spot_margin * spot + diffraction) / pitch)), 1,
                               max_half);

    ImageGridSpec fine;
    fine.center_x = out.chief.x;
    fine.center_y = out.chief.y;
    fine.z = lens.image_plane_z;
    fine.interval = pitch / spec.oversample;
    fine.nx = fine.ny = spec.oversample * (2 * out.half_size + 1);

    out.pixel_psfs.resize(nw);
    out.fine_energy.resize(nw);
    for (std::size_t w = 0; w < nw; ++w) {
        MonoPsf psf;
        psf.grid = fine;
        psf.wavelength_nm = spec.wavelengths_nm[w];
        psf.transmitted = samples[w].transmitted();
        if (samples[w].wavelets.empty()) {
            psf.intensity.assign(fine.size(), 0.0);
        } else {
            psf = psf_from_wavelets(samples[w].wavelets, fine, spec.wavelengths_nm[w], psf.transmitted,
                                    spec.obliquity, pupil.normal);
        }
        out.fine_energy[w] = psf.sum();
        out.pixel_psfs[w] = bin_psf(psf, spec.oversample);
    }
    return out;
}

std::vector<double> derived_illumination(const FieldKernels& field, const FieldKernels& axis) {
    std::vector<double> out(field.pixel_psfs.size(), 0.0);
    for (std::size_t w = 0; w < out.size(); ++w) {
        double t = field.pixel_psfs[w].transmitted, t0 = axis.pixel_psfs[w].transmitted;
        double e0 = axis.fine_energy[w];
        if (!(t > 0.0) || !(t0 > 0.0) || !(e0 > 0.0)) continue;
        out[w] = (field.fine_energy[w] / e0) / (t / t0);
    }
    return out;
}

ChannelKernels field_channel_kernels(const OpticalSystem& system, const PsfGridSpec& spec,
                                     const FieldKernels& field, const FieldKernels& axis) {
    SpectralModel model = SpectralModel::from_sensor(system.sensor, spec.wavelengths_nm);
    const double fov = std::hypot(field.chief.x, field.chief.y) / system.sensor.half_diagonal_mm();
    if (model.illumination) return assemble_channel_kernels(field.pixel_psfs, model, fov);
    std::vector<double> ill = derived_illumination(field, axis);
    return assemble_channel_kernels(field.pixel_psfs, model, fov, &ill);
}

std::vector<float> to_unit_float(const std::vector<double>& kernel) {
    std::vector<float> f(kernel.size());
    for (std::size_t i = 0; i < kernel.size(); ++i) f[i] = static_cast<float>(kernel[i]);
    std::vector<std::size_t> order(kernel.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return kernel[a] > kernel[b]; });
    double sum = 0.0;
    for (float v : f) sum += v;
    // Push the float rounding residual into progressively smaller entries,
    // whose spacing eventually resolves it.
    for (std::size_t idx : order) {
        double residual = 1.0 - sum;
        if (std::abs(residual) <= 1e-12) break;
        float updated = std::max(0.0f, static_cast<float>(static_cast<double>(f[idx]) + residual));
        sum += static_cast<double>(updated) - static_cast<double>(f[idx]);
        f[idx] = updated;
    }
    return f;
}

PsfCell make_cell(const ChannelKernels& assembled, const std::array<double, 3>& axis_sum, double crop_energy,
                  int max_kernel) {
    const ImageGridSpec& g = assembled.grid;
    const int n = g.nx;
    if (g.nx != g.ny || n % 2 == 0) throw PsfError("channel kernels must be square with a center pixel");
    const int center = n / 2;
    auto window_energy = [&](int c, int h) {
        double s = 0.0;
        for (int j = center - h; j <= center + h; ++j)
            for (int i = center - h; i <= center + h; ++i) s += assembled.kernels[c][static_cast<std::size_t>(j) * n + i];
        return s;
    };
    int half = 0;
    const int max_half = std::min(center, (max_kernel - 1) / 2);
    for (; half < max_half; ++half) {
        bool enough = true;
        for (int c = 0; c < 3 && enough; ++c) enough = window_energy(c, half) >= crop_energy;
        if (enough) break;
    }
    const int size = 2 * half + 1;
    PsfCell cell;
    cell.height = cell.width = size;
    cell.kernels.resize(3);
    cell.illumination.resize(3);
    for (int c = 0; c < 3; ++c) {
        std::vector<double> k(static_cast<std::size_t>(size) * size);
        double s = 0.0;
        for (int j = 0; j < size; ++j)
            for (int i = 0; i < size; ++i) {
                double v = assembled.kernels[c][static_cast<std::size_t>(center - half + j) * n + center - half + i];
                k[static_cast<std::size_t>(j) * size + i] = v;
                s += v;
            }
        for (double& v : k) v /= s;
        cell.kernels[c] = to_unit_float(k);
        cell.illumination[c] = static_cast<float>(std::min(1.0, assembled.raw_sum[c] / axis_sum[c]));
    }
    return cell;
}

namespace {

struct AxisReference {
    FieldKernels kernels;
    std::array<double, 3> sum{};
};

AxisReference axis_reference(const OpticalSystem& system, const PsfGridSpec& spec, const PupilPlan& plan) {
    AxisReference ref;
    ref.kernels = compute_field_kernels(system, spec, plan.axis, plan.range);
    ref.sum = field_channel_kernels(system, spec, ref.kernels, ref.kernels).raw_sum;
    return ref;
}

PsfCell compute_cell(const OpticalSystem& system, const PsfGridSpec& spec, const PupilPlan& plan,
                     const AxisReference& axis, std::size_t index) {
    FieldKernels fk = compute_field_kernels(system, spec, plan.cells[index], plan.range);
    ChannelKernels ck = field_channel_kernels(system, spec, fk, axis.kernels);
    return make_cell(ck, axis.sum, spec.crop_energy, spec.max_kernel);
}

}  // namespace

PsfGrid compute_psf_grid(const OpticalSystem& system, const PsfGridSpec& spec) {
    const int patch = patch_size(system.sensor, spec);
    PupilPlan plan = plan_pupil(system, spec);
    AxisReference axis = axis_reference(system, spec, plan);
    PsfGrid grid;
    grid.rows = static_cast<std::uint32_t>(spec.rows);
    grid.cols = static_cast<std::uint32_t>(spec.cols);
    grid.channels = 3;
    grid.patch_size = static_cast<std::uint32_t>(patch);
    grid.max_kernel = static_cast<std::uint32_t>(spec.max_kernel);
    grid.cells.resize(plan.cells.size());
    parallel_for(plan.cells.size(), spec.threads,
                 [&](std::size_t i) { grid.cells[i] = compute_cell(system, spec, plan, axis, i); });
    return grid;
}

std::vector<PsfCell> compute_psf_cells(const OpticalSystem& system, const PsfGridSpec& spec,
                                       const std::vector<std::size_t>& cells) {
    PupilPlan plan = plan_pupil(system, spec);
    AxisReference axis = axis_reference(system, spec, plan);
    std::vector<PsfCell> out(cells.size());
    for (std::size_t i : cells) {
        if (i >= plan.cells.size()) throw PsfError("cell index out of range");
    }
    parallel_for(cells.size(), spec.threads,
                 [&](std::size_t i) { out[i] = compute_cell(system, spec, plan, axis, cells[i]); });
    return out;
}

}  // namespace lenstrace
