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

// Synthetic multispectral scenes with known high-resolution truth.
//
// A shared texture (Voronoi regions plus a cosine field whose amplitude
// falls as 1/sqrt(f)) carries the geometry. A few materials with fixed spectra and smooth abundance maps
// give band-dependent gains, so band details are correlated but not
// collinear. The PAN is a fixed non-negative band mix plus white noise and
// the LMS is the reference degraded by the ratio.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "pansharp/raster.hpp"

namespace pansharp {

struct SyntheticSpec {
    int width = 256;
    int height = 256;
    int bands = 4;
    int ratio = 4;
    std::uint64_t seed = 1;
    double pan_noise = 0.5;  // std of additive PAN noise
};

struct SyntheticScene {
    MultiBandRaster reference;  // width x height x bands
    MultiBandRaster pan;        // width x height x 1
    MultiBandRaster lms;        // (width/ratio) x (height/ratio) x bands
    std::vector<double> pan_weights;
};

/// PAN weights w_j proportional to j + 1, summing to 1.
inline std::vector<double> synthetic_pan_weights(int bands)
{
    std::vector<double> w(static_cast<std::size_t>(bands));
    const double total = 0.5 * bands * (bands + 1);
    for (int j = 0; j < bands; ++j) w[static_cast<std::size_t>(j)] = (j + 1) / total;
    return w;
}

inline SyntheticScene make_synthetic_scene(const SyntheticSpec& spec)
{
    if (spec.width < 1 || spec.height < 1 || spec.bands < 1) throw std::invalid_argument("make_synthetic: bad dimensions");
    if (spec.ratio < 1 || spec.width % spec.ratio != 0 || spec.height % spec.ratio != 0)
        throw std::invalid_argument("make_synthetic: dimensions must be divisible by the ratio");
    if (spec.pan_noise < 0.0) throw std::invalid_argument("make_synthetic: negative noise");

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int w = spec.width, h = spec.height, k = spec.bands;
    const double side = std::max(w, h);

    // Voronoi regions with random levels.
    const int cells = 48;
    std::vector<double> cx(cells), cy(cells), cv(cells);
    for (int i = 0; i < cells; ++i) {
        cx[i] = uni(rng) * w;
        cy[i] = uni(rng) * h;
        cv[i] = 0.3 + 0.7 * uni(rng);
    }
    // Cosine field, amplitude ~ 1/sqrt(f).
    const int waves = 40;
    std::vector<double> fx(waves), fy(waves), ph(waves), amp(waves);
    for (int i = 0; i < waves; ++i) {
        const double period = side * std::pow(2.0, -uni(rng) * std::log2(side / 3.0));
        const double theta = uni(rng) * std::numbers::pi;
        fx[i] = std::cos(theta) * 2.0 * std::numbers::pi / period;
        fy[i] = std::sin(theta) * 2.0 * std::numbers::pi / period;
        ph[i] = uni(rng) * 2.0 * std::numbers::pi;
        amp[i] = 0.12 * std::sqrt(period / side);
    }
    // Materials: spectra and smooth abundance fields.
    const int mats = 3;
    std::vector<std::vector<double>> spectra(mats, std::vector<double>(static_cast<std::size_t>(k)));
    for (auto& s : spectra)
        for (double& v : s) v = 0.4 + 1.2 * uni(rng);
    std::vector<double> ax(mats), ay(mats), ap(mats);
    for (int m = 0; m < mats; ++m) {
        const double theta = uni(rng) * 2.0 * std::numbers::pi;
        const double freq = 2.0 * std::numbers::pi * (1.0 + 2.0 * uni(rng)) / side;
        ax[m] = std::cos(theta) * freq;
        ay[m] = std::sin(theta) * freq;
        ap[m] = uni(rng) * 2.0 * std::numbers::pi;
    }
    // Per-band smooth modulation keeps band details from being collinear.
    std::vector<double> bx(static_cast<std::size_t>(k)), by(static_cast<std::size_t>(k)), bp(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        const double theta = uni(rng) * 2.0 * std::numbers::pi;
        const double freq = 2.0 * std::numbers::pi * (1.0 + 3.0 * uni(rng)) / side;
        bx[j] = std::cos(theta) * freq;
        by[j] = std::sin(theta) * freq;
        bp[j] = uni(rng) * 2.0 * std::numbers::pi;
    }
    std::vector<double> offset(static_cast<std::size_t>(k));
    for (double& o : offset) o = 20.0 + 30.0 * uni(rng);

    std::vector<Plane> ref(static_cast<std::size_t>(k), Plane(w, h));
    std::vector<double> ab(mats);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int best = 0;
            double bd = 1e300;
            for (int i = 0; i < cells; ++i) {
                const double d = (x - cx[i]) * (x - cx[i]) + (y - cy[i]) * (y - cy[i]);
                if (d < bd) {
                    bd = d;
                    best = i;
                }
            }
            double t = cv[best];
            for (int i = 0; i < waves; ++i) t += amp[i] * std::cos(fx[i] * x + fy[i] * y + ph[i]);
            t = std::max(t, 0.05);

            double norm = 0.0;
            for (int m = 0; m < mats; ++m) {
                ab[m] = std::exp(1.5 * std::cos(ax[m] * x + ay[m] * y + ap[m]) + 0.8 * ((best + m) % 3 == 0));
                norm += ab[m];
            }
            for (int j = 0; j < k; ++j) {
                double gain = 0.0;
                for (int m = 0; m < mats; ++m) gain += ab[m] / norm * spectra[m][static_cast<std::size_t>(j)];
                gain *= 1.0 + 0.3 * std::cos(bx[j] * x + by[j] * y + bp[j]);
                ref[static_cast<std::size_t>(j)].at(x, y) = offset[static_cast<std::size_t>(j)] + 150.0 * gain * t;
            }
        }

    SyntheticScene scene;
    scene.pan_weights = synthetic_pan_weights(k);
    Plane pan(w, h);
    for (int j = 0; j < k; ++j) pan += ref[static_cast<std::size_t>(j)] * scene.pan_weights[static_cast<std::size_t>(j)];
    for (double& v : pan.data) v += spec.pan_noise * gauss(rng);

    std::vector<std::string> labels;
    for (int j = 0; j < k; ++j) labels.push_back("B" + std::to_string(j + 1));
    scene.reference = MultiBandRaster::from_planes(ref, labels);
    scene.pan = MultiBandRaster::from_plane(pan, "PAN");
    scene.lms = degrade(scene.reference, ResamplingSpec{spec.ratio});
    return scene;
}

} // namespace pansharp
