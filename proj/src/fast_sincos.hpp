#pragma once

#include <bit>
#include <cstdint>

namespace lenstrace::detail {

// Branch-free sin/cos for |x| up to ~1e9 so the superposition loop vectorizes.
// Cody-Waite reduction by pi/2 in three parts, then the cephes minimax
// polynomials on [-pi/4, pi/4].
inline void fast_sincos(double x, double& s, double& c) {
    constexpr double kTwoOverPi = 0.63661977236758134308;
    constexpr double kDP1 = 1.570796310901641845703125;
    constexpr double kDP2 = 1.589325471229585673428e-8;
    constexpr double kDP3 = 6.12323399573676588614e-17;
    constexpr double kRound = 6755399441055744.0;  // 1.5 * 2^52

    double shifted = x * kTwoOverPi + kRound;
    std::int64_t quadrant = std::bit_cast<std::int64_t>(shifted);
    double q = shifted - kRound;
    double r = ((x - q * kDP1) - q * kDP2) - q * kDP3;
    double z = r * r;

    double ps = 1.58962301576546568060e-10;
    ps = ps * z - 2.50507477628578072866e-8;
    ps = ps * z + 2.75573136213857245213e-6;
    ps = ps * z - 1.98412698295895385996e-4;
    ps = ps * z + 8.33333333332211858878e-3;
    ps = ps * z - 1.66666666666666307295e-1;
    double sin_r = r + r * z * ps;

    double pc = -1.13585365213876817300e-11;
    pc = pc * z + 2.08757008419747316778e-9;
    pc = pc * z - 2.75573141792967388112e-7;
    pc = pc * z + 2.48015872888517045348e-5;
    pc = pc * z - 1.38888888888730564116e-3;
    pc = pc * z + 4.16666666666665929218e-2;
    double cos_r = 1.0 - 0.5 * z + z * z * pc;

    const bool swap = (quadrant & 1) != 0;
    const bool neg_s = (quadrant & 2) != 0;
    const bool neg_c = ((quadrant + 1) & 2) != 0;
    double s0 = swap ? cos_r : sin_r;
    double c0 = swap ? sin_r : cos_r;
    s = neg_s ? -s0 : s0;
    c = neg_c ? -c0 : c0;
}

}  // namespace lenstrace::detail
