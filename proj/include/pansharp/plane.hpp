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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pansharp {

/// Single-band 2-D grid of doubles, row-major.
struct Plane {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Plane() = default;
    Plane(int w, int h, double fill = 0.0) : width(w), height(h), data(checked_size(w, h), fill) {}
    Plane(int w, int h, std::vector<double> values) : width(w), height(h), data(std::move(values))
    {
        if (data.size() != checked_size(w, h))
            throw std::invalid_argument("Plane: sample count does not match dimensions");
    }

    std::size_t size() const noexcept { return data.size(); }
    bool same_shape(const Plane& o) const noexcept { return width == o.width && height == o.height; }

    double& at(int x, int y) noexcept { return data[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const noexcept { return data[static_cast<std::size_t>(y) * width + x]; }

    double mean() const
    {
        return data.empty() ? 0.0 : std::accumulate(data.begin(), data.end(), 0.0) / double(data.size());
    }

    Plane& operator+=(const Plane& o)
    {
        require_same_shape(o, "Plane::operator+=");
        for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
        return *this;
    }
    Plane& operator-=(const Plane& o)
    {
        require_same_shape(o, "Plane::operator-=");
        for (std::size_t i = 0; i < data.size(); ++i) data[i] -= o.data[i];
        return *this;
    }
    Plane& operator*=(double s)
    {
        for (double& v : data) v *= s;
        return *this;
    }

    friend Plane operator+(Plane a, const Plane& b) { return a += b; }
    friend Plane operator-(Plane a, const Plane& b) { return a -= b; }
    friend Plane operator*(Plane a, double s) { return a *= s; }
    friend Plane operator*(double s, Plane a) { return a *= s; }

    void require_same_shape(const Plane& o, const char* who) const
    {
        if (!same_shape(o))
            throw std::invalid_argument(std::string(who) + ": plane dimensions differ");
    }

    static std::size_t checked_size(int w, int h)
    {
        if (w < 0 || h < 0) throw std::invalid_argument("Plane: negative dimension");
        return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    }
};

inline double max_abs_diff(const Plane& a, const Plane& b)
{
    a.require_same_shape(b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

} // namespace pansharp
