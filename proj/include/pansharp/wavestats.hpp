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

// Statistics of undecimated wavelet coefficients across scale: histogram
// mutual information with a partial bias correction, the weighted
// sufficient statistic T = sum_i a_i |PX_i| for multi-parent dependence, and
// conditional-mean profiles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include "pansharp/atwt.hpp"
#include "pansharp/error.hpp"

namespace pansharp::wavestats {

/// Joint cell counts of an equal-width J x K histogram.
struct JointHistogram {
    int rows = 0;  // J, cells along x
    int cols = 0;  // K, cells along y
    std::vector<std::uint32_t> counts;     // row-major J x K
    std::vector<std::uint32_t> row_sums;   // k_i
    std::vector<std::uint32_t> col_sums;   // k_j
    std::size_t total = 0;                 // N

    std::uint32_t at(int i, int j) const { return counts[static_cast<std::size_t>(i) * cols + j]; }
};

namespace detail {

/// Samples mapped to [0, 1] over their observed range.
inline std::vector<double> unit_range(std::span<const double> v, const char* what)
{
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    if (!(*hi > *lo)) throw NumericalError(std::string(what) + ": constant input has no histogram range");
    const double scale = 1.0 / (*hi - *lo);
    std::vector<double> u(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) u[i] = (v[i] - *lo) * scale;
    return u;
}

inline std::vector<std::uint8_t> bin_indices(const std::vector<double>& unit, int cells)
{
    std::vector<std::uint8_t> b(unit.size());
    for (std::size_t i = 0; i < unit.size(); ++i)
        b[i] = static_cast<std::uint8_t>(std::min(static_cast<int>(unit[i] * cells), cells - 1));
    return b;
}

inline void check_pair(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size()) throw std::invalid_argument("mutual_information: sequence lengths differ");
    if (x.size() < 2) throw std::invalid_argument("mutual_information: need at least two samples");
}

inline void check_cells(int j, int k)
{
    if (j < 2 || k < 2) throw std::invalid_argument("mutual_information: need at least two cells per axis");
    if (j > 255 || k > 255) throw std::invalid_argument("mutual_information: at most 255 cells per axis");
}

/// Bias-corrected estimate from precomputed bin indices. `scratch` holds J*K counters.
inline double mi_from_bins(const std::vector<std::uint8_t>& bx, const std::vector<std::uint8_t>& by, int j, int k,
                           std::vector<std::uint32_t>& scratch)
{
    scratch.assign(static_cast<std::size_t>(j) * k, 0);
    for (std::size_t s = 0; s < bx.size(); ++s) ++scratch[static_cast<std::size_t>(bx[s]) * k + by[s]];
    std::vector<double> ri(j, 0.0), cj(k, 0.0);
    for (int a = 0; a < j; ++a)
        for (int b = 0; b < k; ++b) {
            const double c = scratch[static_cast<std::size_t>(a) * k + b];
            ri[a] += c;
            cj[b] += c;
        }
    const double n = static_cast<double>(bx.size());
    // Summed in sorted order so that swapping the axes gives the same bits.
    std::vector<double> terms;
    for (int a = 0; a < j; ++a)
        for (int b = 0; b < k; ++b) {
            const double c = scratch[static_cast<std::size_t>(a) * k + b];
            if (c > 0.0) terms.push_back(c * std::log(c * n / (ri[a] * cj[b])));
        }
    std::sort(terms.begin(), terms.end());
    double acc = 0.0;
    for (double t : terms) acc += t;
    return acc / n - double(j - 1) * double(k - 1) / (2.0 * n);
}

} // namespace detail

inline JointHistogram joint_histogram(std::span<const double> x, std::span<const double> y, int j, int k)
{
    detail::check_pair(x, y);
    detail::check_cells(j, k);
    const auto bx = detail::bin_indices(detail::unit_range(x, "joint_histogram"), j);
    const auto by = detail::bin_indices(detail::unit_range(y, "joint_histogram"), k);
    JointHistogram h;
    h.rows = j;
    h.cols = k;
    h.counts.assign(static_cast<std::size_t>(j) * k, 0);
    h.row_sums.assign(j, 0);
    h.col_sums.assign(k, 0);
    for (std::size_t s = 0; s < bx.size(); ++s) {
        ++h.counts[static_cast<std::size_t>(bx[s]) * k + by[s]];
        ++h.row_sums[bx[s]];
        ++h.col_sums[by[s]];
    }
    h.total = bx.size();
    return h;
}

/// I(X;Y) in nats: sum k_ij/N log(k_ij N / (k_i k_j)) - (J-1)(K-1)/(2N),
/// with equal-width cells spanning each sample range.
inline double mutual_information(std::span<const double> x, std::span<const double> y, int j, int k)
{
    detail::check_pair(x, y);
    detail::check_cells(j, k);
    const auto bx = detail::bin_indices(detail::unit_range(x, "mutual_information"), j);
    const auto by = detail::bin_indices(detail::unit_range(y, "mutual_information"), k);
    std::vector<std::uint32_t> scratch;
    return detail::mi_from_bins(bx, by, j, k, scratch);
}

struct CellRange {
    int min_cells = 4;
    int max_cells = 64;
};

struct MiMaximum {
    int rows = 0;
    int cols = 0;
    double mi = 0.0;
};

/// Exhaustive search of (J, K) over `range` on both axes for the largest estimate.
inline MiMaximum maximize_mi_over_cells(std::span<const double> x, std::span<const double> y, CellRange range = {})
{
    detail::check_pair(x, y);
    if (range.min_cells > range.max_cells) throw std::invalid_argument("maximize_mi_over_cells: empty search range");
    detail::check_cells(range.min_cells, range.min_cells);
    detail::check_cells(range.max_cells, range.max_cells);
    const auto ux = detail::unit_range(x, "maximize_mi_over_cells");
    const auto uy = detail::unit_range(y, "maximize_mi_over_cells");
    std::vector<std::vector<std::uint8_t>> by;
    for (int k = range.min_cells; k <= range.max_cells; ++k) by.push_back(detail::bin_indices(uy, k));

    MiMaximum best{0, 0, -std::numeric_limits<double>::infinity()};
    std::vector<std::uint32_t> scratch;
    for (int j = range.min_cells; j <= range.max_cells; ++j) {
        const auto bx = detail::bin_indices(ux, j);
        for (int k = range.min_cells; k <= range.max_cells; ++k) {
            const double mi = detail::mi_from_bins(bx, by[static_cast<std::size_t>(k - range.min_cells)], j, k, scratch);
            if (mi > best.mi) best = {j, k, mi};
        }
    }
    return best;
}

/// X: detail samples at one level; predecessors[i]: same-site samples i+1
/// levels coarser (PX_1 is the parent).
struct CoefficientLineage {
    std::vector<double> x;
    std::vector<std::vector<double>> predecessors;

    int depth() const noexcept { return static_cast<int>(predecessors.size()); }
};

/// Lineage of level-`level` coefficients over interior sites. The margin
/// drops sites within half the deepest filter footprint of the border.
inline CoefficientLineage lineage_from_pyramid(const WaveletPyramid& p, const FilterBank& bank, int depth,
                                               int level = 1)
{
    if (depth < 1) throw std::invalid_argument("lineage_from_pyramid: depth must be >= 1");
    const int deepest = level + depth;
    if (deepest > p.levels())
        throw std::invalid_argument("lineage_from_pyramid: pyramid has " + std::to_string(p.levels()) +
                                    " levels, need " + std::to_string(deepest));
    const int margin = bank.support(deepest) / 2;
    const Plane& base = p.detail(level);
    if (2 * margin >= base.width || 2 * margin >= base.height)
        throw std::invalid_argument("lineage_from_pyramid: no interior sites left");
    CoefficientLineage lin;
    lin.predecessors.resize(depth);
    for (int y = margin; y < base.height - margin; ++y)
        for (int x = margin; x < base.width - margin; ++x) {
            lin.x.push_back(base.at(x, y));
            for (int i = 0; i < depth; ++i) lin.predecessors[i].push_back(p.detail(level + 1 + i).at(x, y));
        }
    return lin;
}

struct SufficientStatistic {
    std::vector<double> weights;  // a_1..a_n
    std::vector<double> t;        // T samples
    double mi = 0.0;              // I(X; T), maximised over cell counts
};

struct StatisticOptions {
    int iterations = 200;   // simplex iterations per start
    int restarts = 3;       // number of starting points
    CellRange cells{};
};

namespace detail {

inline std::vector<double> weighted_abs_sum(const CoefficientLineage& lin, std::span<const double> w)
{
    std::vector<double> t(lin.x.size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const auto& px = lin.predecessors[i];
        const double a = w[i];
        if (a == 0.0) continue;
        for (std::size_t s = 0; s < t.size(); ++s) t[s] += a * std::abs(px[s]);
    }
    return t;
}

/// Fixed-cell objective used inside the simplex search.
struct WeightObjective {
    const CoefficientLineage* lin;
    int n;
    int rows, cols;
    std::vector<std::uint8_t> bx;
    std::vector<std::uint32_t> scratch;

    // Weights: a_1 = 1 (I(X;T) ignores the scale of T), a_i = |theta_{i-1}|.
    std::vector<double> weights(const gsl_vector* theta) const
    {
        std::vector<double> w(n, 1.0);
        for (int i = 1; i < n; ++i) w[i] = std::abs(gsl_vector_get(theta, i - 1));
        return w;
    }

    double value(std::span<const double> w)
    {
        const auto t = weighted_abs_sum(*lin, w);
        const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
        if (!(*hi > *lo)) return 0.0;
        std::vector<std::uint8_t> by(t.size());
        const double scale = 1.0 / (*hi - *lo);
        for (std::size_t s = 0; s < t.size(); ++s)
            by[s] = static_cast<std::uint8_t>(std::min(static_cast<int>((t[s] - *lo) * scale * cols), cols - 1));
        return mi_from_bins(bx, by, rows, cols, scratch);
    }

    static double negated(const gsl_vector* theta, void* self)
    {
        auto* o = static_cast<WeightObjective*>(self);
        const auto w = o->weights(theta);
        return -o->value(w);
    }
};

inline std::vector<double> simplex_search(WeightObjective& obj, std::vector<double> start, int iterations)
{
    const int dim = obj.n - 1;
    gsl_multimin_function f;
    f.n = static_cast<std::size_t>(dim);
    f.f = &WeightObjective::negated;
    f.params = &obj;

    gsl_vector* x = gsl_vector_alloc(dim);
    gsl_vector* step = gsl_vector_alloc(dim);
    for (int i = 0; i < dim; ++i) {
        gsl_vector_set(x, i, start[i + 1] / start[0]);
        gsl_vector_set(step, i, 0.5);
    }
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim);
    gsl_multimin_fminimizer_set(s, &f, x, step);
    for (int it = 0; it < iterations; ++it) {
        if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
        if (gsl_multimin_fminimizer_size(s) < 1e-6) break;
    }
    auto w = obj.weights(gsl_multimin_fminimizer_x(s));
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(step);
    gsl_vector_free(x);
    return w;
}

inline SufficientStatistic finish(const CoefficientLineage& lin, std::vector<double> w, CellRange cells)
{
    SufficientStatistic out;
    out.t = weighted_abs_sum(lin, w);
    out.mi = maximize_mi_over_cells(lin.x, out.t, cells).mi;
    out.weights = std::move(w);
    return out;
}

} // namespace detail

/// Weights a_1..a_n of T = sum a_i |PX_i| chosen to maximise I(X;T).
/// `seed` (length n or n - 1) is tried first; its result is returned when no
/// other start does better, so a longer lineage seeded with a shorter
/// solution padded by zero never loses information.
inline SufficientStatistic sufficient_statistic(const CoefficientLineage& lin, int n, StatisticOptions opt = {},
                                                std::span<const double> seed = {})
{
    if (n < 1) throw std::invalid_argument("sufficient_statistic: depth must be >= 1");
    if (n > lin.depth())
        throw std::invalid_argument("sufficient_statistic: depth " + std::to_string(n) + " exceeds lineage depth " +
                                    std::to_string(lin.depth()));
    for (int i = 0; i < n; ++i) {
        const auto& px = lin.predecessors[static_cast<std::size_t>(i)];
        if (px.size() != lin.x.size()) throw std::invalid_argument("sufficient_statistic: ragged lineage");
        if (std::all_of(px.begin(), px.end(), [](double v) { return v == 0.0; }))
            throw NumericalError("sufficient_statistic: predecessor " + std::to_string(i + 1) + " is identically zero");
    }
    if (n == 1) return detail::finish(lin, {1.0}, opt.cells);

    // Cell counts for the inner objective come from the single-parent problem.
    std::vector<double> abs_parent(lin.x.size());
    for (std::size_t s = 0; s < abs_parent.size(); ++s) abs_parent[s] = std::abs(lin.predecessors[0][s]);
    const MiMaximum cells = maximize_mi_over_cells(lin.x, abs_parent, opt.cells);

    detail::WeightObjective obj{&lin, n, cells.rows, cells.cols,
                                detail::bin_indices(detail::unit_range(lin.x, "sufficient_statistic"), cells.rows),
                                {}};

    std::vector<std::vector<double>> starts;
    if (!seed.empty()) {
        std::vector<double> s(seed.begin(), seed.end());
        s.resize(static_cast<std::size_t>(n), 0.0);
        if (s[0] <= 0.0) s[0] = 1.0;
        starts.push_back(s);
    }
    starts.push_back(std::vector<double>(static_cast<std::size_t>(n), 1.0));
    {
        std::vector<double> s(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) s[i] = std::pow(0.5, i);
        starts.push_back(s);
    }
    {
        std::vector<double> s(static_cast<std::size_t>(n), 0.1);
        s[0] = 1.0;
        starts.push_back(s);
    }
    const auto n_starts = static_cast<std::size_t>(std::max(opt.restarts, 1)) + (seed.empty() ? 0 : 1);
    starts.resize(std::min(starts.size(), n_starts));

    std::optional<SufficientStatistic> best;
    for (auto& s : starts) {
        // The start itself is a candidate, so the seed's value is a floor.
        for (const auto& cand : {s, detail::simplex_search(obj, s, opt.iterations)}) {
            std::vector<double> w = cand;
            const double a0 = w[0];
            for (double& v : w) v = std::abs(v) / a0;
            auto r = detail::finish(lin, std::move(w), opt.cells);
            if (!best || r.mi > best->mi) best = std::move(r);
        }
    }
    return *best;
}

/// I(X; T_i) for i = 1..n, each depth seeded with the previous weights, so
/// the sequence never decreases.
inline std::vector<SufficientStatistic> markov_order_curve(const CoefficientLineage& lin, int max_depth,
                                                           StatisticOptions opt = {})
{
    if (max_depth < 1) throw std::invalid_argument("markov_order_curve: depth must be >= 1");
    if (max_depth > lin.depth()) throw std::invalid_argument("markov_order_curve: lineage too shallow");
    std::vector<SufficientStatistic> out;
    for (int i = 1; i <= max_depth; ++i) {
        std::span<const double> seed;
        if (!out.empty()) seed = out.back().weights;
        auto r = sufficient_statistic(lin, i, opt, seed);
        if (!out.empty() && r.mi < out.back().mi) {
            // Equal information is always reachable by giving PX_i zero weight.
            r.weights = out.back().weights;
            r.weights.push_back(0.0);
            r.t = out.back().t;
            r.mi = out.back().mi;
        }
        out.push_back(std::move(r));
    }
    return out;
}

struct ProfileBin {
    double lo = 0.0, hi = 0.0, center = 0.0;
    std::size_t count = 0;
    std::optional<double> mean;     // absent for empty bins
    std::optional<double> std_err;  // absent with fewer than two samples
};

/// E[X | PX in bin] over `bins` equal-width bins spanning the PX range.
inline std::vector<ProfileBin> conditional_expectation_profile(std::span<const double> x, std::span<const double> px,
                                                               int bins = 32)
{
    if (x.size() != px.size()) throw std::invalid_argument("conditional_expectation_profile: lengths differ");
    if (bins < 1) throw std::invalid_argument("conditional_expectation_profile: need at least one bin");
    if (x.empty()) throw std::invalid_argument("conditional_expectation_profile: empty input");
    const auto [lo_it, hi_it] = std::minmax_element(px.begin(), px.end());
    const double lo = *lo_it;
    const double width = (*hi_it - lo) / bins;
    std::vector<double> sum(bins, 0.0), sq(bins, 0.0);
    std::vector<std::size_t> cnt(bins, 0);
    for (std::size_t s = 0; s < x.size(); ++s) {
        int b = width > 0.0 ? static_cast<int>((px[s] - lo) / width) : 0;
        b = std::clamp(b, 0, bins - 1);
        sum[b] += x[s];
        sq[b] += x[s] * x[s];
        ++cnt[b];
    }
    std::vector<ProfileBin> out(bins);
    for (int b = 0; b < bins; ++b) {
        auto& o = out[b];
        o.lo = lo + b * width;
        o.hi = lo + (b + 1) * width;
        o.center = 0.5 * (o.lo + o.hi);
        o.count = cnt[b];
        if (cnt[b] == 0) continue;
        const double m = sum[b] / double(cnt[b]);
        o.mean = m;
        if (cnt[b] > 1) {
            const double var = std::max(0.0, (sq[b] - double(cnt[b]) * m * m) / double(cnt[b] - 1));
            o.std_err = std::sqrt(var / double(cnt[b]));
        }
    }
    return out;
}

} // namespace pansharp::wavestats
