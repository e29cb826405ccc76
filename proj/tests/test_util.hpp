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
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "pansharp/plane.hpp"
#include "pansharp/raster.hpp"

namespace pansharp::test {

inline Plane random_plane(int w, int h, std::uint64_t seed, double lo = -1.0, double hi = 1.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Plane p(w, h);
    for (double& v : p.data) v = u(rng);
    return p;
}

inline MultiBandRaster random_raster(int w, int h, int bands, std::uint64_t seed, double lo = 0.0, double hi = 1.0)
{
    std::vector<Plane> planes;
    for (int b = 0; b < bands; ++b) planes.push_back(random_plane(w, h, seed * 131 + b, lo, hi));
    return MultiBandRaster::from_planes(planes);
}

inline std::filesystem::path temp_path(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / "pansharp_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

// Reference 2-D convolution with the outer product of `taps`, mirror edges.
inline Plane direct_convolve(const Plane& in, const std::vector<double>& taps, int step)
{
    const int half = static_cast<int>(taps.size() / 2);
    auto mirror = [](int i, int n) {
        while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - 1 - i;
        return i;
    };
    Plane out(in.width, in.height);
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            double acc = 0.0;
            for (int j = 0; j < int(taps.size()); ++j)
                for (int i = 0; i < int(taps.size()); ++i)
                    acc += taps[j] * taps[i] *
                           in.at(mirror(x + (i - half) * step, in.width), mirror(y + (j - half) * step, in.height));
            out.at(x, y) = acc;
        }
    return out;
}

// Zero mean, unit population variance.
inline Plane standardised(const Plane& p)
{
    const double m = p.mean();
    double v = 0.0;
    for (double x : p.data) v += (x - m) * (x - m);
    v /= double(p.size());
    Plane out = p;
    for (double& x : out.data) x = (x - m) / std::sqrt(v);
    return out;
}

inline double mixing_objective(const std::vector<std::vector<double>>& dm, const std::vector<double>& dp,
                             const std::vector<double>& a, double gamma)
{
    double v = 0.0;
    for (std::size_t s = 0; s < dp.size(); ++s) {
        double r = -dp[s];
        for (std::size_t j = 0; j < dm.size(); ++j) r += a[j] * dm[j][s];
        v += r * r;
    }
    for (double c : a)
        if (c < 0.0) v += gamma * c * c;
    return v;
}

// Dense grid over a box, re-centred and shrunk around the best cell each round.
inline double grid_minimum(const std::vector<std::vector<double>>& dm, const std::vector<double>& dp, double gamma,
                         std::vector<double> centre, double half_width)
{
    const std::size_t k = dm.size();
    const int steps = k == 1 ? 2000 : 60;
    double best = std::numeric_limits<double>::infinity();
    for (int round = 0; round < 12; ++round) {
        std::vector<double> best_a = centre;
        std::vector<int> idx(k, 0);
        while (true) {
            std::vector<double> a(k);
            for (std::size_t j = 0; j < k; ++j) a[j] = centre[j] - half_width + 2.0 * half_width * idx[j] / steps;
            if (const double v = mixing_objective(dm, dp, a, gamma); v < best) {
                best = v;
                best_a = a;
            }
            std::size_t j = 0;
            while (j < k && ++idx[j] > steps) idx[j++] = 0;
            if (j == k) break;
        }
        centre = best_a;
        half_width *= 4.0 / steps;
    }
    return best;
}

} // namespace pansharp::test
