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

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pansharp/filter.hpp"
#include "pansharp/plane.hpp"

namespace pansharp {

/// W x H x B grid of finite doubles, band-sequential (all of band 0, then band 1, ...).
class MultiBandRaster {
public:
    MultiBandRaster() = default;

    MultiBandRaster(int width, int height, int bands, std::vector<double> samples,
                    std::vector<std::string> labels = {})
        : width_(width), height_(height), bands_(bands), samples_(std::move(samples)), labels_(std::move(labels))
    {
        if (width < 0 || height < 0) throw std::invalid_argument("MultiBandRaster: negative dimension");
        if (bands < 1) throw std::invalid_argument("MultiBandRaster: need at least one band");
        if (samples_.size() != band_size() * static_cast<std::size_t>(bands))
            throw std::invalid_argument("MultiBandRaster: sample count does not match width*height*bands");
        for (double v : samples_)
            if (!std::isfinite(v)) throw std::invalid_argument("MultiBandRaster: non-finite sample");
        if (!labels_.empty() && labels_.size() != static_cast<std::size_t>(bands))
            throw std::invalid_argument("MultiBandRaster: one label per band required");
    }

    MultiBandRaster(int width, int height, int bands, double fill = 0.0)
        : MultiBandRaster(width, height, bands,
                          std::vector<double>(Plane::checked_size(width, height) * static_cast<std::size_t>(bands), fill))
    {
    }

    static MultiBandRaster from_planes(std::span<const Plane> planes, std::vector<std::string> labels = {})
    {
        if (planes.empty()) throw std::invalid_argument("MultiBandRaster::from_planes: no planes");
        std::vector<double> s;
        s.reserve(planes.size() * planes.front().size());
        for (const Plane& p : planes) {
            p.require_same_shape(planes.front(), "MultiBandRaster::from_planes");
            s.insert(s.end(), p.data.begin(), p.data.end());
        }
        return {planes.front().width, planes.front().height, static_cast<int>(planes.size()), std::move(s),
                std::move(labels)};
    }

    static MultiBandRaster from_plane(const Plane& p) { return from_planes(std::span<const Plane>(&p, 1)); }
    static MultiBandRaster from_plane(const Plane& p, std::string label)
    {
        return from_planes(std::span<const Plane>(&p, 1), {std::move(label)});
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int bands() const noexcept { return bands_; }
    std::size_t band_size() const noexcept { return static_cast<std::size_t>(width_) * height_; }
    const std::vector<double>& samples() const noexcept { return samples_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

    std::span<const double> band(int b) const
    {
        check_band(b);
        return {samples_.data() + band_size() * b, band_size()};
    }

    Plane band_plane(int b) const
    {
        auto s = band(b);
        return {width_, height_, std::vector<double>(s.begin(), s.end())};
    }

    std::vector<Plane> planes() const
    {
        std::vector<Plane> out;
        out.reserve(bands_);
        for (int b = 0; b < bands_; ++b) out.push_back(band_plane(b));
        return out;
    }

    double at(int x, int y, int b) const noexcept
    {
        return samples_[band_size() * b + static_cast<std::size_t>(y) * width_ + x];
    }

    bool same_shape(const MultiBandRaster& o) const noexcept
    {
        return width_ == o.width_ && height_ == o.height_ && bands_ == o.bands_;
    }

    bool operator==(const MultiBandRaster& o) const = default;

private:
    void check_band(int b) const
    {
        if (b < 0 || b >= bands_) throw std::out_of_range("MultiBandRaster: band index out of range");
    }

    int width_ = 0;
    int height_ = 0;
    int bands_ = 1;
    std::vector<double> samples_;
    std::vector<std::string> labels_;
};

enum class ResamplingKernel { nearest, bilinear, bicubic };

struct ResamplingSpec {
    int factor = 1;
    ResamplingKernel kernel = ResamplingKernel::bicubic;

    void validate() const
    {
        if (factor < 1) throw std::invalid_argument("ResamplingSpec: factor must be >= 1");
    }
};

/// Number of B3 smoothing passes used to anti-alias a decimation by `factor`: ceil(log2 factor).
inline int lowpass_passes(int factor)
{
    int n = 0;
    while ((1 << n) < factor) ++n;
    return n;
}

namespace detail {

/// Sparse 1-D resampling matrix: output i reads `taps` inputs starting at row i.
struct ResampleTable {
    int taps = 0;
    std::vector<std::ptrdiff_t> index;
    std::vector<double> weight;
};

inline double cubic_weight(double t) noexcept
{
    // Keys cubic convolution, a = -1/2.
    constexpr double a = -0.5;
    t = std::abs(t);
    if (t < 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

// Pixel-area alignment: output pixel centre x + 1/2 sits at input coordinate (x + 1/2) / f.
inline ResampleTable make_upsample_table(int n_in, int factor, ResamplingKernel kernel)
{
    ResampleTable t;
    const int n_out = n_in * factor;
    t.taps = kernel == ResamplingKernel::nearest ? 1 : kernel == ResamplingKernel::bilinear ? 2 : 4;
    t.index.resize(static_cast<std::size_t>(n_out) * t.taps);
    t.weight.resize(t.index.size());
    for (int x = 0; x < n_out; ++x) {
        const std::size_t base = static_cast<std::size_t>(x) * t.taps;
        if (kernel == ResamplingKernel::nearest) {
            t.index[base] = x / factor;
            t.weight[base] = 1.0;
            continue;
        }
        const double src = (x + 0.5) / factor - 0.5;
        const double i0 = std::floor(src);
        const double frac = src - i0;
        const auto first = static_cast<std::ptrdiff_t>(i0) - (kernel == ResamplingKernel::bicubic ? 1 : 0);
        for (int k = 0; k < t.taps; ++k) {
            t.index[base + k] = mirror_index(first + k, n_in);
            if (kernel == ResamplingKernel::bilinear)
                t.weight[base + k] = k == 0 ? 1.0 - frac : frac;
            else
                t.weight[base + k] = cubic_weight(frac - (k - 1));
        }
    }
    return t;
}

inline Plane upsample_plane(const Plane& in, int factor, ResamplingKernel kernel)
{
    const ResampleTable tx = make_upsample_table(in.width, factor, kernel);
    const ResampleTable ty = make_upsample_table(in.height, factor, kernel);
    const int wo = in.width * factor;
    const int ho = in.height * factor;

    Plane rows(wo, in.height);
    for (int y = 0; y < in.height; ++y) {
        const double* src = in.data.data() + static_cast<std::size_t>(y) * in.width;
        double* dst = rows.data.data() + static_cast<std::size_t>(y) * wo;
        for (int x = 0; x < wo; ++x) {
            const std::size_t base = static_cast<std::size_t>(x) * tx.taps;
            double acc = 0.0;
            for (int k = 0; k < tx.taps; ++k) acc += tx.weight[base + k] * src[tx.index[base + k]];
            dst[x] = acc;
        }
    }

    Plane out(wo, ho);
    for (int y = 0; y < ho; ++y) {
        const std::size_t base = static_cast<std::size_t>(y) * ty.taps;
        double* dst = out.data.data() + static_cast<std::size_t>(y) * wo;
        for (int k = 0; k < ty.taps; ++k) {
            const double c = ty.weight[base + k];
            const double* src = rows.data.data() + static_cast<std::size_t>(ty.index[base + k]) * wo;
            for (int x = 0; x < wo; ++x) dst[x] += c * src[x];
        }
    }
    return out;
}

} // namespace detail

/// Interpolates every band onto a grid `factor` times finer. Grids are
/// aligned at the top-left corner: input pixel (i, j) covers output block
/// [i*f, (i+1)*f) x [j*f, (j+1)*f).
inline Plane upsample(const Plane& p, const ResamplingSpec& spec)
{
    spec.validate();
    if (spec.factor == 1) return p;
    return detail::upsample_plane(p, spec.factor, spec.kernel);
}

inline MultiBandRaster upsample(const MultiBandRaster& r, const ResamplingSpec& spec)
{
    spec.validate();
    if (spec.factor == 1) return r;
    std::vector<Plane> out;
    for (int b = 0; b < r.bands(); ++b) out.push_back(detail::upsample_plane(r.band_plane(b), spec.factor, spec.kernel));
    return MultiBandRaster::from_planes(out, r.labels());
}

/// Anti-aliased decimation: B3 "a trous" low-pass cascade of ceil(log2 f)
/// levels, then the mean of each f x f block. The kernel field of `spec` is
/// not used.
inline Plane degrade(const Plane& p, const ResamplingSpec& spec)
{
    spec.validate();
    const int f = spec.factor;
    if (p.width % f != 0 || p.height % f != 0)
        throw std::invalid_argument("degrade: dimensions must be divisible by the factor");
    if (f == 1) return p;
    const Plane smooth = atrous_lowpass(p, kB3SplineTaps, lowpass_passes(f));
    Plane out(p.width / f, p.height / f);
    const double norm = 1.0 / (double(f) * f);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            double acc = 0.0;
            for (int dy = 0; dy < f; ++dy)
                for (int dx = 0; dx < f; ++dx) acc += smooth.at(x * f + dx, y * f + dy);
            out.at(x, y) = acc * norm;
        }
    return out;
}

inline MultiBandRaster degrade(const MultiBandRaster& r, const ResamplingSpec& spec)
{
    spec.validate();
    if (r.width() % spec.factor != 0 || r.height() % spec.factor != 0)
        throw std::invalid_argument("degrade: dimensions must be divisible by the factor");
    if (spec.factor == 1) return r;
    std::vector<Plane> out;
    for (int b = 0; b < r.bands(); ++b) out.push_back(degrade(r.band_plane(b), spec));
    return MultiBandRaster::from_planes(out, r.labels());
}

} // namespace pansharp
