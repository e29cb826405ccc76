/*
 * Copyright 2026 The pansharp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "pansharp/plane.hpp"

namespace pansharp {

/// B3 cubic spline taps [1 4 6 4 1] / 16.
inline constexpr std::array<double, 5> kB3SplineTaps = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

/// CDF 9/7 analysis low-pass, normalised to unit DC gain.
inline constexpr std::array<double, 9> kBior97LowpassTaps = {
    0.02674875741080976, -0.01686411844287495, -0.07822326652898785, 0.2668641184428723, 0.6029490182363579,
    0.2668641184428723,  -0.07822326652898785, -0.01686411844287495, 0.02674875741080976,
};

/// Half-sample symmetric extension: ... x1 x0 | x0 x1 ... x(n-1) | x(n-1) x(n-2) ...
/// Periodic with period 2n, so any offset is valid.
inline std::ptrdiff_t mirror_index(std::ptrdiff_t i, std::ptrdiff_t n) noexcept
{
    const std::ptrdiff_t period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

/// Span of a symmetric odd-length kernel dilated with `step - 1` holes between taps.
inline int dilated_support(std::size_t taps, int step) noexcept
{
    return static_cast<int>(taps - 1) * step + 1;
}

/// Separable convolution with a symmetric odd-length kernel, `step` apart
/// ("a trous" holes), mirror boundaries. Rows then columns.
inline Plane smooth_separable(const Plane& in, std::span<const double> taps, int step = 1)
{
    if (taps.size() % 2 == 0) throw std::invalid_argument("smooth_separable: kernel length must be odd");
    const int w = in.width;
    const int h = in.height;
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(taps.size() / 2);

    const std::size_t nt = taps.size();
    std::vector<std::ptrdiff_t> xs(static_cast<std::size_t>(w) * nt);
    for (int x = 0; x < w; ++x)
        for (std::size_t t = 0; t < nt; ++t)
            xs[static_cast<std::size_t>(x) * nt + t] =
                mirror_index(x + (static_cast<std::ptrdiff_t>(t) - half) * step, w);

    Plane tmp(w, h);
    for (int y = 0; y < h; ++y) {
        const double* row = in.data.data() + static_cast<std::size_t>(y) * w;
        double* dst = tmp.data.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            const std::ptrdiff_t* ix = xs.data() + static_cast<std::size_t>(x) * nt;
            double acc = 0.0;
            for (std::size_t t = 0; t < nt; ++t) acc += taps[t] * row[ix[t]];
            dst[x] = acc;
        }
    }

    Plane out(w, h);
    std::vector<std::size_t> ys(nt);
    for (int y = 0; y < h; ++y) {
        for (std::size_t t = 0; t < nt; ++t)
            ys[t] = static_cast<std::size_t>(mirror_index(y + (static_cast<std::ptrdiff_t>(t) - half) * step, h)) * w;
        double* dst = out.data.data() + static_cast<std::size_t>(y) * w;
        for (std::size_t t = 0; t < nt; ++t) {
            const double* src = tmp.data.data() + ys[t];
            const double c = taps[t];
            for (int x = 0; x < w; ++x) dst[x] += c * src[x];
        }
    }
    return out;
}

/// Smoothing cascade of an "a trous" pyramid: level j applies the kernel
/// dilated by 2^(j-1). Returns the approximation after `levels` passes.
inline Plane atrous_lowpass(const Plane& in, std::span<const double> taps, int levels)
{
    Plane cur = in;
    for (int j = 1; j <= levels; ++j) cur = smooth_separable(cur, taps, 1 << (j - 1));
    return cur;
}

} // namespace pansharp
