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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "pansharp/atwt.hpp"
#include "test_util.hpp"

using namespace pansharp;

namespace {

std::vector<double> taps_of(const FilterBank& bank)
{
    return {bank.lowpass().begin(), bank.lowpass().end()};
}

Plane impulse(int n)
{
    Plane p(n, n);
    p.at(n / 2, n / 2) = 1.0;
    return p;
}

} // namespace

TEST(FilterBank, TapsSumToOne)
{
    for (const auto& bank : {FilterBank::b3(), FilterBank::bior97()}) {
        double s = 0.0;
        for (double t : bank.lowpass()) s += t;
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(FilterBank, ParseNames)
{
    EXPECT_EQ(parse_filter_bank("b3"), FilterBankKind::b3_spline);
    EXPECT_EQ(parse_filter_bank("BIOR_9_7"), FilterBankKind::bior_9_7);
    EXPECT_EQ(parse_filter_bank(to_string(FilterBankKind::bior_9_7)), FilterBankKind::bior_9_7);
    EXPECT_THROW(parse_filter_bank("haar"), std::invalid_argument);
}

TEST(Decompose, ConstantPlaneHasNoDetail)
{
    for (const auto& bank : {FilterBank::b3(), FilterBank::bior97()}) {
        const auto p = decompose(Plane(40, 40, 7.0), 3, bank);
        ASSERT_EQ(p.levels(), 3);
        for (const auto& d : p.details)
            for (double v : d.data) EXPECT_NEAR(v, 0.0, 1e-12);
        for (double v : p.approximation.data) EXPECT_NEAR(v, 7.0, 1e-12);
    }
}

TEST(Decompose, ImpulseCentreDetail)
{
    const auto p = decompose(impulse(15), 1);
    EXPECT_NEAR(p.detail(1).at(7, 7), 0.859375, 1e-15);
}

TEST(Decompose, LevelOneMatchesDirectConvolution)
{
    for (const auto& bank : {FilterBank::b3(), FilterBank::bior97()}) {
        const Plane x = impulse(21);
        const Plane smooth = test::direct_convolve(x, taps_of(bank), 1);
        const auto p = decompose(x, 1, bank);
        EXPECT_LT(max_abs_diff(p.approximation, smooth), 1e-14);
        EXPECT_LT(max_abs_diff(p.detail(1), x - smooth), 1e-14);
    }
}

TEST(Decompose, DeeperLevelsUseDilatedKernel)
{
    const Plane x = test::random_plane(24, 24, 3);
    const auto taps = taps_of(FilterBank::b3());
    const Plane a1 = test::direct_convolve(x, taps, 1);
    const Plane a2 = test::direct_convolve(a1, taps, 2);
    const Plane a3 = test::direct_convolve(a2, taps, 4);
    const auto p = decompose(x, 3);
    EXPECT_LT(max_abs_diff(p.detail(2), a1 - a2), 1e-12);
    EXPECT_LT(max_abs_diff(p.detail(3), a2 - a3), 1e-12);
    EXPECT_LT(max_abs_diff(p.approximation, a3), 1e-12);
}

TEST(Decompose, KeepsDimensions)
{
    const auto p = decompose(test::random_plane(37, 29, 1), 3);
    for (const auto& d : p.details) {
        EXPECT_EQ(d.width, 37);
        EXPECT_EQ(d.height, 29);
    }
}

TEST(Decompose, TooSmallThrows)
{
    const FilterBank b3 = FilterBank::b3();
    const int need = b3.support(4);
    EXPECT_NO_THROW(decompose(Plane(need, need), 4));
    EXPECT_THROW(decompose(Plane(need - 1, need), 4), std::invalid_argument);
    EXPECT_THROW(decompose(Plane(8, 8), 0), std::invalid_argument);
}

TEST(Reconstruct, AdditiveIdentity)
{
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
        for (const auto& bank : {FilterBank::b3(), FilterBank::bior97()}) {
            const Plane x = test::random_plane(32, 32, seed, -100.0, 100.0);
            EXPECT_LT(max_abs_diff(reconstruct(decompose(x, 2, bank)), x), 1e-9);
        }
}

TEST(Reconstruct, ConstantApproximation)
{
    WaveletPyramid p;
    p.approximation = Plane(5, 4, 7.0);
    p.details.assign(2, Plane(5, 4));
    EXPECT_EQ(reconstruct(p).data, Plane(5, 4, 7.0).data);
}

TEST(Reconstruct, ScaledDetailAddsOnce)
{
    const Plane x = test::random_plane(32, 32, 9);
    auto p = decompose(x, 3);
    const Plane d2 = p.detail(2);
    p.detail(2) = d2 * 2.0;
    EXPECT_LT(max_abs_diff(reconstruct(p), x + d2), 1e-9);
}

TEST(Reconstruct, MismatchedDimsThrow)
{
    WaveletPyramid p;
    p.approximation = Plane(4, 4);
    p.details.push_back(Plane(4, 5));
    EXPECT_THROW(reconstruct(p), std::invalid_argument);
}

TEST(Decompose, IsLinear)
{
    const Plane x = test::random_plane(48, 48, 1);
    const Plane y = test::random_plane(48, 48, 2);
    const auto lhs = decompose(x * 1.7 + y * -0.4, 3);
    const auto px = decompose(x, 3), py = decompose(y, 3);
    for (int j = 1; j <= 3; ++j)
        EXPECT_LT(max_abs_diff(lhs.detail(j), px.detail(j) * 1.7 + py.detail(j) * -0.4), 1e-9);
    EXPECT_LT(max_abs_diff(lhs.approximation, px.approximation * 1.7 + py.approximation * -0.4), 1e-9);
}

TEST(Decompose, ShiftInvariantInInterior)
{
    const int n = 64, levels = 3, s = 5;
    const FilterBank bank = FilterBank::b3();
    int margin = 0;
    for (int j = 1; j <= levels; ++j) margin += bank.support(j) / 2;
    const Plane x = test::random_plane(n, n, 17);
    Plane shifted(n, n);
    for (int y = 0; y < n; ++y)
        for (int xx = 0; xx < n; ++xx) shifted.at((xx + s) % n, (y + s) % n) = x.at(xx, y);
    const auto a = decompose(x, levels, bank), b = decompose(shifted, levels, bank);
    for (int j = 1; j <= levels; ++j)
        for (int y = margin; y < n - margin - s; ++y)
            for (int xx = margin; xx < n - margin - s; ++xx)
                ASSERT_EQ(a.detail(j).at(xx, y), b.detail(j).at(xx + s, y + s)) << "level " << j;
}

TEST(Decompose, MultiBandRasterPerBand)
{
    const auto r = test::random_raster(20, 20, 3, 5);
    const auto pyrs = decompose(r, 2);
    ASSERT_EQ(pyrs.size(), 3u);
    for (int b = 0; b < 3; ++b)
        EXPECT_EQ(pyrs[b].detail(1).data, decompose(r.band_plane(b), 2).detail(1).data);
    EXPECT_EQ(approximation_raster(pyrs).bands(), 3);
}
