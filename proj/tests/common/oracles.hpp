#pragma once

// Reference implementations used only by tests. They are written for
// clarity, not speed, and share no arithmetic helpers with the library.

#include <cmath>
#include <complex>
#include <vector>

#include "lenstrace/psf.hpp"
#include "lenstrace/raytrace.hpp"

namespace oracle {

using lenstrace::Vec3;

/// Plain nested loop: image points outside, pupil points inside, one trace
/// per (image point, pupil point) pair exactly as written in the algorithm.
inline std::vector<double> literal_psf(const lenstrace::TraceContext& ctx, const Vec3& object,
                                       const lenstrace::PupilGridSpec& pupil,
                                       const lenstrace::ImageGridSpec& image, bool trace_every_pair = true) {
    const double lambda_mm = ctx.wavelength_nm() * 1e-6;
    const double k = 2.0 * M_PI / lambda_mm;
    const std::complex<double> i1(0.0, 1.0);

    // Optional memo of the traces; the arithmetic is unchanged.
    std::vector<lenstrace::TraceResult> memo;
    std::vector<char> ok;
    if (!trace_every_pair) {
        for (int py = 0; py < pupil.samples_y; ++py)
            for (int px = 0; px < pupil.samples_x; ++px) {
                lenstrace::TraceResult r;
                ok.push_back(lenstrace::trace(ctx, object, pupil.x(px), pupil.y(py), r) == lenstrace::RayStatus::Ok);
                memo.push_back(r);
            }
    }

    std::vector<double> out(image.size(), 0.0);
    for (int iy = 0; iy < image.ny; ++iy) {
        for (int ix = 0; ix < image.nx; ++ix) {
            const Vec3 q{image.x(ix), image.y(iy), image.z};
            std::complex<double> e(0.0, 0.0);
            for (int py = 0; py < pupil.samples_y; ++py) {
                for (int px = 0; px < pupil.samples_x; ++px) {
                    lenstrace::TraceResult r;
                    if (trace_every_pair) {
                        if (lenstrace::trace(ctx, object, pupil.x(px), pupil.y(py), r) != lenstrace::RayStatus::Ok)
                            continue;
                    } else {
                        std::size_t s = static_cast<std::size_t>(py) * pupil.samples_x + px;
                        if (!ok[s]) continue;
                        r = memo[s];
                    }
                    const double l = r.opl;
                    const Vec3 rv = q - r.pupil_point;
                    const double rl = std::sqrt(rv.x * rv.x + rv.y * rv.y + rv.z * rv.z);
                    const double cos_g = (r.direction.x * rv.x + r.direction.y * rv.y + r.direction.z * rv.z) / rl;
                    const double K = 0.5 * (1.0 + cos_g);
                    e += std::exp(i1 * (k * l)) / l * std::exp(i1 * (k * rl)) / rl * K;
                }
            }
            out[static_cast<std::size_t>(iy) * image.nx + ix] = std::norm(e);
        }
    }
    return out;
}

/// Aberration-free converging wave: samples on z = 0 inside radius a, all
/// arriving in phase at (0, 0, focus). `phase_error(rho)` adds a path error in mm.
template <class PathError>
std::vector<lenstrace::Wavelet> synthetic_pupil(double a, double focus, double wavelength_nm, int samples,
                                                PathError&& path_error) {
    const double k = 2.0 * M_PI / (wavelength_nm * 1e-6);
    const double total = 1000.0;
    std::vector<lenstrace::Wavelet> out;
    const double step = 2.0 * a / samples;
    for (int j = 0; j < samples; ++j) {
        for (int i = 0; i < samples; ++i) {
            double x = -a + (i + 0.5) * step, y = -a + (j + 0.5) * step;
            double rho = std::hypot(x, y) / a;
            if (rho > 1.0) continue;
            Vec3 p{x, y, 0.0};
            Vec3 to_focus{-x, -y, focus};
            double d = std::sqrt(to_focus.x * to_focus.x + to_focus.y * to_focus.y + to_focus.z * to_focus.z);
            double l = total - d + path_error(rho);
            out.push_back({p, to_focus * (1.0 / d), std::polar(1.0 / l, k * l)});
        }
    }
    return out;
}

inline std::vector<lenstrace::Wavelet> synthetic_pupil(double a, double focus, double wavelength_nm, int samples) {
    return synthetic_pupil(a, focus, wavelength_nm, samples, [](double) { return 0.0; });
}

}  // namespace oracle
