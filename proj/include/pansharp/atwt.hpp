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

// Undecimated ("a trous") wavelet transform.
//
// approx_0 = plane, approx_j = h_j * approx_{j-1}, detail_j = approx_{j-1} - approx_j,
// where h_j is the separable low-pass with 2^(j-1) - 1 zeros inserted between
// taps. Every plane keeps the source dimensions, and the source is recovered
// exactly (up to rounding) as approx_J + sum_j detail_j.

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pansharp/filter.hpp"
#include "pansharp/plane.hpp"
#include "pansharp/raster.hpp"

namespace pansharp {

enum class FilterBankKind { b3_spline, bior_9_7 };

struct FilterBank {
    FilterBankKind kind = FilterBankKind::b3_spline;

    std::span<const double> lowpass() const noexcept
    {
        if (kind == FilterBankKind::bior_9_7) return kBior97LowpassTaps;
        return kB3SplineTaps;
    }

    /// Footprint of the level-`level` dilated kernel, in samples.
    int support(int level) const noexcept { return dilated_support(lowpass().size(), 1 << (level - 1)); }

    static FilterBank b3() { return {FilterBankKind::b3_spline}; }
    static FilterBank bior97() { return {FilterBankKind::bior_9_7}; }
};

inline std::string to_string(FilterBankKind k) { return k == FilterBankKind::b3_spline ? "b3" : "bior97"; }

inline FilterBankKind parse_filter_bank(const std::string& s)
{
    if (s == "b3" || s == "b3_spline" || s == "B3_SPLINE") return FilterBankKind::b3_spline;
    if (s == "bior97" || s == "bior_9_7" || s == "BIOR_9_7" || s == "9-7") return FilterBankKind::bior_9_7;
    throw std::invalid_argument("unknown filter bank '" + s + "'");
}

/// Decomposition of one plane. details[0] is level 1 (finest).
struct WaveletPyramid {
    std::vector<Plane> details;
    Plane approximation;

    int levels() const noexcept { return static_cast<int>(details.size()); }
    const Plane& detail(int level) const { return details.at(static_cast<std::size_t>(level - 1)); }
    Plane& detail(int level) { return details.at(static_cast<std::size_t>(level - 1)); }
};

inline WaveletPyramid decompose(const Plane& plane, int levels, const FilterBank& bank = FilterBank::b3())
{
    if (levels < 1) throw std::invalid_argument("decompose: need at least one level");
    const int need = bank.support(levels);
    if (plane.width < need || plane.height < need)
        throw std::invalid_argument("decompose: plane " + std::to_string(plane.width) + "x" +
                                    std::to_string(plane.height) + " smaller than level-" + std::to_string(levels) +
                                    " filter support " + std::to_string(need));
    WaveletPyramid p;
    p.details.reserve(levels);
    Plane prev = plane;
    for (int j = 1; j <= levels; ++j) {
        Plane next = smooth_separable(prev, bank.lowpass(), 1 << (j - 1));
        p.details.push_back(prev - next);
        prev = std::move(next);
    }
    p.approximation = std::move(prev);
    return p;
}

/// Same as decompose() with the CDF 9/7 low-pass driving the smoothing sequence.
inline WaveletPyramid decompose_97(const Plane& plane, int levels)
{
    return decompose(plane, levels, FilterBank::bior97());
}

inline Plane reconstruct(const WaveletPyramid& p)
{
    Plane out = p.approximation;
    for (const Plane& d : p.details) {
        if (!d.same_shape(out)) throw std::invalid_argument("reconstruct: detail plane dimensions differ");
        out += d;
    }
    return out;
}

inline std::vector<WaveletPyramid> decompose(const MultiBandRaster& r, int levels,
                                             const FilterBank& bank = FilterBank::b3())
{
    std::vector<WaveletPyramid> out;
    out.reserve(r.bands());
    for (int b = 0; b < r.bands(); ++b) out.push_back(decompose(r.band_plane(b), levels, bank));
    return out;
}

/// Detail plane `level` of every band, stacked as one raster (debug export).
inline MultiBandRaster detail_raster(std::span<const WaveletPyramid> bands, int level)
{
    std::vector<Plane> planes;
    for (const auto& p : bands) planes.push_back(p.detail(level));
    return MultiBandRaster::from_planes(planes);
}

inline MultiBandRaster approximation_raster(std::span<const WaveletPyramid> bands)
{
    std::vector<Plane> planes;
    for (const auto& p : bands) planes.push_back(p.approximation);
    return MultiBandRaster::from_planes(planes);
}

} // namespace pansharp
