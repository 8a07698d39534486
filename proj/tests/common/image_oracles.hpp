#pragma once

// Straightforward image-domain references for tests.

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "lenstrace/image.hpp"

namespace oracle {

/// Full-image convolution with one kernel per channel, clamped borders.
inline lenstrace::Image direct_convolve(const lenstrace::Image& in, const std::vector<std::vector<double>>& kernels,
                                        int kh, int kw, const std::vector<double>& weights) {
    lenstrace::Image out(in.height, in.width, in.channels);
    for (int ch = 0; ch < in.channels; ++ch)
        for (int r = 0; r < in.height; ++r)
            for (int c = 0; c < in.width; ++c) {
                double s = 0.0;
                for (int i = 0; i < kh; ++i)
                    for (int j = 0; j < kw; ++j) {
                        int sr = std::clamp(r - (i - kh / 2), 0, in.height - 1);
                        int sc = std::clamp(c - (j - kw / 2), 0, in.width - 1);
                        s += kernels[ch][i * kw + j] * in.at(sr, sc, ch);
                    }
                out.at(r, c, ch) = weights[ch] * s;
            }
    return out;
}

inline double rms(const lenstrace::Image& a, const lenstrace::Image& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
    return std::sqrt(s / a.data.size());
}

/// SSIM with the window evaluated explicitly at every valid position.
inline double ssim(const lenstrace::Image& a, const lenstrace::Image& b) {
    double w[11][11], wsum = 0.0;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            w[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2.0 * 1.5 * 1.5));
            wsum += w[i][j];
        }
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0.0;
    for (int ch = 0; ch < a.channels; ++ch) {
        double acc = 0.0;
        int count = 0;
        for (int r = 5; r + 5 < a.height; ++r)
            for (int c = 5; c + 5 < a.width; ++c) {
                double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
                for (int i = 0; i < 11; ++i)
                    for (int j = 0; j < 11; ++j) {
                        double x = a.at(r + i - 5, c + j - 5, ch), y = b.at(r + i - 5, c + j - 5, ch);
                        double k = w[i][j] / wsum;
                        mx += k * x;
                        my += k * y;
                        sxx += k * x * x;
                        syy += k * y * y;
                        sxy += k * x * y;
                    }
                double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
                acc += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                ++count;
            }
        total += acc / count;
    }
    return total / a.channels;
}

}  // namespace oracle

namespace oracle {

/// MTF area of a kernel along the unit direction (ux, uy): magnitude of the 2-D
/// DFT sampled on that line (projection-slice), normalized by dc, integrated by
/// trapezoid over 0..0.5 cycles/pixel.
inline double psf_mtf_area(const std::vector<double>& kernel, int h, int w, double ux, double uy, int samples = 65) {
    double dc = 0.0;
    for (double v : kernel) dc += v;
    double cx = 0.5 * (w - 1), cy = 0.5 * (h - 1);
    std::vector<double> m(samples);
    for (int s = 0; s < samples; ++s) {
        const double f = 0.5 * s / (samples - 1);
        std::complex<double> acc(0.0, 0.0);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const double t = (c - cx) * ux + (r - cy) * uy;
                acc += kernel[static_cast<std::size_t>(r) * w + c] * std::polar(1.0, -2.0 * M_PI * f * t);
            }
        m[s] = std::abs(acc) / dc;
    }
    double area = 0.0;
    for (int s = 1; s < samples; ++s) area += 0.5 * (m[s] + m[s - 1]) * (0.5 / (samples - 1));
    return area;
}

}  // namespace oracle
