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

// Scale-indexed state-space model for detail injection.
//
// State s_k: the K band detail coefficients at one site and level k.
// Observation x_k = [dP; dHDMS_1..dHDMS_K], related by
//
//   s_k = A s_{k+1} + u_k                       (coarse to fine)
//   x_k = H_k s_k + w_k,  H_k = [a_1 .. a_K; diag(a'_1 .. a'_K)]
//
// Everything here is fitted on the coarse levels where MS details exist.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pansharp/atwt.hpp"
#include "pansharp/error.hpp"

namespace pansharp::ssm {

/// Interior samples of every plane at one training level.
struct TrainingLevel {
    int level = 0;
    std::vector<std::vector<double>> dm;     // K bands
    std::vector<double> dp;
    std::vector<std::vector<double>> dhdms;  // K bands

    int bands() const noexcept { return static_cast<int>(dm.size()); }
    std::size_t sites() const noexcept { return dp.size(); }
};

struct TrainingTensor {
    int width = 0, height = 0, margin = 0;
    std::vector<TrainingLevel> levels;  // coarse to fine
};

namespace detail {

inline std::vector<double> interior(const Plane& p, int margin)
{
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(p.width - 2 * margin) * (p.height - 2 * margin));
    for (int y = margin; y < p.height - margin; ++y)
        for (int x = margin; x < p.width - margin; ++x) out.push_back(p.at(x, y));
    return out;
}

} // namespace detail

/// Gathers interior sites of the given levels. `levels` are listed coarse to
/// fine; every pyramid must share the plane dimensions.
inline TrainingTensor make_training_tensor(std::span<const WaveletPyramid> ms, const WaveletPyramid& pan,
                                           std::span<const WaveletPyramid> hdms, std::span<const int> levels,
                                           int margin)
{
    if (ms.empty() || ms.size() != hdms.size())
        throw std::invalid_argument("make_training_tensor: MS and HDMS band counts differ");
    const Plane& ref = pan.approximation;
    if (margin < 0 || 2 * margin >= ref.width || 2 * margin >= ref.height)
        throw std::invalid_argument("make_training_tensor: margin leaves no interior sites");
    TrainingTensor t;
    t.width = ref.width;
    t.height = ref.height;
    t.margin = margin;
    for (int lv : levels) {
        TrainingLevel tl;
        tl.level = lv;
        const Plane& dp = pan.detail(lv);
        tl.dp = detail::interior(dp, margin);
        for (std::size_t b = 0; b < ms.size(); ++b) {
            dp.require_same_shape(ms[b].detail(lv), "make_training_tensor");
            dp.require_same_shape(hdms[b].detail(lv), "make_training_tensor");
            tl.dm.push_back(detail::interior(ms[b].detail(lv), margin));
            tl.dhdms.push_back(detail::interior(hdms[b].detail(lv), margin));
        }
        t.levels.push_back(std::move(tl));
    }
    return t;
}

struct Ar1Fit {
    double a = 0.0;
    double noise_var = 0.0;  // sigma^2_u
};

/// Yule-Walker AR(1) over scale. sequences[k][s] is the coefficient of site s
/// at the k-th level of the walk (walk order, coarse first). Lag products are
/// pooled over sites and level pairs.
inline Ar1Fit fit_ar1(const std::vector<std::vector<double>>& sequences)
{
    if (sequences.size() < 2) throw std::invalid_argument("fit_ar1: need at least two levels");
    const std::size_t n = sequences.front().size();
    for (const auto& s : sequences)
        if (s.size() != n) throw std::invalid_argument("fit_ar1: levels hold different site counts");
    if (n == 0) throw std::invalid_argument("fit_ar1: no sites");

    double r0 = 0.0, r1 = 0.0;
    for (std::size_t k = 1; k < sequences.size(); ++k)
        for (std::size_t s = 0; s < n; ++s) {
            r0 += sequences[k - 1][s] * sequences[k - 1][s];
            r1 += sequences[k][s] * sequences[k - 1][s];
        }
    if (!(r0 > 0.0)) throw NumericalError("fit_ar1: zero-energy band");
    Ar1Fit f;
    f.a = std::clamp(r1 / r0, -0.999, 0.999);
    double e2 = 0.0;
    for (std::size_t k = 1; k < sequences.size(); ++k)
        for (std::size_t s = 0; s < n; ++s) {
            const double e = sequences[k][s] - f.a * sequences[k - 1][s];
            e2 += e * e;
        }
    f.noise_var = e2 / double(n * (sequences.size() - 1));
    return f;
}

struct MixingFit {
    std::vector<double> coeffs;
    double objective = 0.0;
    bool rank_deficient = false;
};

namespace detail {

inline double penalised_objective(const Eigen::MatrixXd& g, const Eigen::VectorXd& b, double pp,
                                  const Eigen::VectorXd& a, double gamma)
{
    // |D a - p|^2 = a'Ga - 2 b'a + p'p
    double v = a.dot(g * a) - 2.0 * b.dot(a) + pp;
    for (Eigen::Index j = 0; j < a.size(); ++j)
        if (a[j] < 0.0) v += gamma * a[j] * a[j];
    return std::max(v, 0.0);
}

inline Eigen::VectorXd solve_with_penalty(const Eigen::MatrixXd& g, const Eigen::VectorXd& b,
                                          const std::vector<bool>& active, double gamma, bool& deficient)
{
    Eigen::MatrixXd m = g;
    for (Eigen::Index j = 0; j < m.rows(); ++j)
        if (active[static_cast<std::size_t>(j)]) m(j, j) += gamma;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(m);
    if (cod.rank() < m.rows()) deficient = true;
    return cod.solve(b);
}

} // namespace detail

/// Minimiser of sum_x (sum_j a_j dM_j(x) - dP(x))^2 + gamma sum_j max(0, -a_j)^2.
///
/// The objective is a convex piecewise quadratic; on each sign pattern of a
/// the stationarity condition is (G + gamma I_S) a = D'dP with S the set of
/// negative coefficients. Sign patterns are iterated to a fixed point, with
/// exhaustive search over patterns as a fallback.
inline MixingFit fit_pan_mixing(std::span<const std::vector<double>> dm, std::span<const double> dp, double gamma)
{
    if (!(gamma >= 0.0)) throw std::invalid_argument("fit_pan_mixing: gamma must be >= 0");
    const auto k = static_cast<Eigen::Index>(dm.size());
    if (k == 0) throw std::invalid_argument("fit_pan_mixing: no bands");
    for (const auto& v : dm)
        if (v.size() != dp.size()) throw std::invalid_argument("fit_pan_mixing: plane sizes differ");

    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
    double pp = 0.0;
    for (std::size_t s = 0; s < dp.size(); ++s) pp += dp[s] * dp[s];
    for (Eigen::Index i = 0; i < k; ++i) {
        const auto& di = dm[static_cast<std::size_t>(i)];
        for (std::size_t s = 0; s < dp.size(); ++s) b[i] += di[s] * dp[s];
        for (Eigen::Index j = i; j < k; ++j) {
            const auto& dj = dm[static_cast<std::size_t>(j)];
            double acc = 0.0;
            for (std::size_t s = 0; s < dp.size(); ++s) acc += di[s] * dj[s];
            g(i, j) = g(j, i) = acc;
        }
    }

    MixingFit out;
    std::vector<bool> active(static_cast<std::size_t>(k), false);
    Eigen::VectorXd a = detail::solve_with_penalty(g, b, active, gamma, out.rank_deficient);
    bool converged = false;
    for (int it = 0; it < 64; ++it) {
        std::vector<bool> next(static_cast<std::size_t>(k));
        for (Eigen::Index j = 0; j < k; ++j) next[static_cast<std::size_t>(j)] = a[j] < 0.0;
        if (next == active) {
            converged = true;
            break;
        }
        active = next;
        bool deficient = false;
        a = detail::solve_with_penalty(g, b, active, gamma, deficient);
        out.rank_deficient = deficient;
    }
    if (!converged && k <= 16) {
        double best = std::numeric_limits<double>::infinity();
        for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
            for (Eigen::Index j = 0; j < k; ++j) active[static_cast<std::size_t>(j)] = (mask >> j) & 1u;
            bool deficient = false;
            const Eigen::VectorXd cand = detail::solve_with_penalty(g, b, active, gamma, deficient);
            const double v = detail::penalised_objective(g, b, pp, cand, gamma);
            if (v < best) {
                best = v;
                a = cand;
                out.rank_deficient = deficient;
            }
        }
    }
    out.coeffs.assign(a.data(), a.data() + k);
    out.objective = detail::penalised_objective(g, b, pp, a, gamma);
    return out;
}

/// The K = 1 case in closed form: sum_x (a dM - dHDMS)^2 + gamma max(0, -a)^2.
inline MixingFit fit_hdms_mixing(std::span<const double> dm, std::span<const double> dhdms, double gamma)
{
    if (!(gamma >= 0.0)) throw std::invalid_argument("fit_hdms_mixing: gamma must be >= 0");
    if (dm.size() != dhdms.size()) throw std::invalid_argument("fit_hdms_mixing: plane sizes differ");
    double mm = 0.0, mh = 0.0, hh = 0.0;
    for (std::size_t s = 0; s < dm.size(); ++s) {
        mm += dm[s] * dm[s];
        mh += dm[s] * dhdms[s];
        hh += dhdms[s] * dhdms[s];
    }
    MixingFit out;
    double a = 0.0;
    if (mm > 0.0) {
        a = mh / mm;
        if (a < 0.0) a = mh / (mm + gamma);
    } else {
        out.rank_deficient = true;
    }
    out.coeffs = {a};
    out.objective = std::max(0.0, a * a * mm - 2.0 * a * mh + hh + (a < 0.0 ? gamma * a * a : 0.0));
    return out;
}

struct Extrapolation {
    std::vector<double> values;  // one per target level
    bool constant = false;       // only one training level was available
};

/// Least-squares affine fit of value against level index, evaluated at
/// `targets` and clamped to >= 0.
inline Extrapolation extrapolate_mixing(std::span<const int> levels, std::span<const double> values,
                                        std::span<const int> targets)
{
    if (levels.size() != values.size()) throw std::invalid_argument("extrapolate_mixing: size mismatch");
    if (levels.empty()) throw std::invalid_argument("extrapolate_mixing: no training levels");
    Extrapolation out;
    if (levels.size() == 1) {
        out.constant = true;
        out.values.assign(targets.size(), std::max(values[0], 0.0));
        return out;
    }
    const double n = double(levels.size());
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        sx += levels[i];
        sy += values[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        sxx += (levels[i] - mx) * (levels[i] - mx);
        sxy += (levels[i] - mx) * (values[i] - my);
    }
    double slope = 0.0;
    if (sxx > 0.0) {
        slope = sxy / sxx;
    } else {
        out.constant = true;
    }
    for (int t : targets) out.values.push_back(std::max(0.0, my + slope * (t - mx)));
    return out;
}

/// H_k as a (K+1) x K matrix.
inline Eigen::MatrixXd measurement_matrix(std::span<const double> pan_mix, std::span<const double> hdms_mix)
{
    const auto k = static_cast<Eigen::Index>(pan_mix.size());
    if (static_cast<Eigen::Index>(hdms_mix.size()) != k) throw std::invalid_argument("measurement_matrix: size mismatch");
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(k + 1, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        h(0, j) = pan_mix[static_cast<std::size_t>(j)];
        h(j + 1, j) = hdms_mix[static_cast<std::size_t>(j)];
    }
    return h;
}

namespace detail {

/// Residual vectors e(x) = x(x) - H s(x), one column per site.
inline Eigen::MatrixXd residuals(const TrainingLevel& t, const Eigen::MatrixXd& h)
{
    const int k = t.bands();
    if (h.rows() != k + 1 || h.cols() != k) throw std::invalid_argument("residuals: H shape does not match band count");
    Eigen::MatrixXd e(k + 1, static_cast<Eigen::Index>(t.sites()));
    for (std::size_t s = 0; s < t.sites(); ++s) {
        const auto c = static_cast<Eigen::Index>(s);
        double pan = t.dp[s];
        for (int j = 0; j < k; ++j) pan -= h(0, j) * t.dm[j][s];
        e(0, c) = pan;
        for (int j = 0; j < k; ++j) e(j + 1, c) = t.dhdms[j][s] - h(j + 1, j) * t.dm[j][s];
    }
    return e;
}

} // namespace detail

/// Sample covariance of the observation residuals (full matrix).
inline Eigen::MatrixXd fit_observation_noise(const TrainingLevel& t, const Eigen::MatrixXd& h)
{
    const int k = t.bands();
    if (t.sites() < static_cast<std::size_t>(k + 2))
        throw NumericalError("fit_observation_noise: " + std::to_string(t.sites()) + " sites, need at least " +
                             std::to_string(k + 2));
    const Eigen::MatrixXd e = detail::residuals(t, h);
    const Eigen::VectorXd mu = e.rowwise().mean();
    const Eigen::MatrixXd c = e.colwise() - mu;
    Eigen::MatrixXd rw = (c * c.transpose()) / double(e.cols() - 1);
    return 0.5 * (rw + rw.transpose());
}

/// m4 / m2^2, which is 3 for Gaussian data. NaN when the variance is zero.
inline double kurtosis(std::span<const double> v)
{
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= double(v.size());
    double m2 = 0.0, m4 = 0.0;
    for (double x : v) {
        const double d = (x - mean) * (x - mean);
        m2 += d;
        m4 += d * d;
    }
    m2 /= double(v.size());
    m4 /= double(v.size());
    if (!(m2 > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return m4 / (m2 * m2);
}

struct KurtosisReport {
    int level = 0;
    std::vector<double> values;  // PAN row first, then one per band
    bool degenerate = false;     // at least one component has zero variance
};

inline KurtosisReport residual_kurtosis(const TrainingLevel& t, const Eigen::MatrixXd& h)
{
    const Eigen::MatrixXd e = detail::residuals(t, h);
    KurtosisReport r;
    r.level = t.level;
    for (Eigen::Index i = 0; i < e.rows(); ++i) {
        std::vector<double> row(e.cols());
        for (Eigen::Index c = 0; c < e.cols(); ++c) row[static_cast<std::size_t>(c)] = e(i, c);
        const double v = kurtosis(row);
        if (std::isnan(v)) r.degenerate = true;
        r.values.push_back(v);
    }
    return r;
}

/// One level of the fitted model.
struct LevelModel {
    int level = 0;
    bool training = false;      // true MS details exist at this level
    bool extrapolated = false;  // H obtained by extrapolation
    Eigen::VectorXd transition;  // diagonal of A
    Eigen::MatrixXd measurement; // H, (K+1) x K
    Eigen::MatrixXd process_cov; // R_u, K x K
    Eigen::MatrixXd observation_cov; // R_w, (K+1) x (K+1)
};

struct ScaleStateModel {
    int bands = 0;
    std::vector<LevelModel> levels;  // coarse to fine

    const LevelModel& at_level(int level) const
    {
        for (const auto& l : levels)
            if (l.level == level) return l;
        throw std::out_of_range("ScaleStateModel: no level " + std::to_string(level));
    }

    void validate() const
    {
        for (const auto& l : levels) {
            const std::string where = "ScaleStateModel level " + std::to_string(l.level) + ": ";
            if (l.transition.size() != bands || l.process_cov.rows() != bands || l.process_cov.cols() != bands ||
                l.measurement.rows() != bands + 1 ||
                l.measurement.cols() != bands || l.observation_cov.rows() != bands + 1 ||
                l.observation_cov.cols() != bands + 1)
                throw std::invalid_argument(where + "inconsistent dimensions");
            if ((l.transition.array().abs() >= 1.0).any()) throw std::invalid_argument(where + "unstable transition");
            if ((l.process_cov.diagonal().array() < 0.0).any())
                throw std::invalid_argument(where + "negative process variance");
            if (!l.process_cov.isApprox(l.process_cov.transpose(), 1e-12))
                throw std::invalid_argument(where + "R_u not symmetric");
            for (int j = 0; j < bands; ++j) {
                if (l.measurement(0, j) < 0.0 || l.measurement(j + 1, j) < 0.0)
                    throw std::invalid_argument(where + "negative mixing coefficient");
                for (int i = 0; i < bands; ++i)
                    if (i != j && l.measurement(i + 1, j) != 0.0)
                        throw std::invalid_argument(where + "HDMS rows must be diagonal");
            }
            if (!l.observation_cov.isApprox(l.observation_cov.transpose(), 1e-12))
                throw std::invalid_argument(where + "R_w not symmetric");
        }
    }
};

namespace detail {

inline void write_values(std::ostream& os, const std::string& key, const double* v, Eigen::Index n)
{
    os << key << " =";
    for (Eigen::Index i = 0; i < n; ++i) os << ' ' << v[i];
    os << '\n';
}

inline std::vector<double> parse_values(const std::string& s)
{
    std::istringstream in(s);
    in.imbue(std::locale::classic());
    std::vector<double> v;
    std::string tok;
    while (in >> tok) {
        std::size_t used = 0;
        double d = 0.0;
        try {
            d = std::stod(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != tok.size()) throw std::invalid_argument("model file: bad number '" + tok + "'");
        v.push_back(d);
    }
    return v;
}

} // namespace detail

/// Text key-value form, one `key = values...` line per quantity; matrices are
/// row-major. Round-trips exactly.
inline void write_model(std::ostream& os, const ScaleStateModel& m)
{
    std::ostringstream buf;
    buf.imbue(std::locale::classic());
    buf << std::setprecision(17);
    buf << "bands = " << m.bands << '\n' << "levels = " << m.levels.size() << '\n';
    for (std::size_t i = 0; i < m.levels.size(); ++i) {
        const auto& l = m.levels[i];
        const std::string p = "level." + std::to_string(i) + ".";
        buf << p << "index = " << l.level << '\n';
        buf << p << "training = " << (l.training ? 1 : 0) << '\n';
        buf << p << "extrapolated = " << (l.extrapolated ? 1 : 0) << '\n';
        detail::write_values(buf, p + "A", l.transition.data(), l.transition.size());
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> h = l.measurement;
        detail::write_values(buf, p + "H", h.data(), h.size());
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> ru = l.process_cov;
        detail::write_values(buf, p + "Ru", ru.data(), ru.size());
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rw = l.observation_cov;
        detail::write_values(buf, p + "Rw", rw.data(), rw.size());
    }
    os << buf.str();
}

inline ScaleStateModel read_model(std::istream& is)
{
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("model file: missing '=' in '" + line + "'");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    auto get = [&](const std::string& k) -> const std::string& {
        const auto it = kv.find(k);
        if (it == kv.end()) throw std::invalid_argument("model file: missing key " + k);
        return it->second;
    };
    auto get_exact = [&](const std::string& k, std::size_t n) {
        auto v = detail::parse_values(get(k));
        if (v.size() != n) throw std::invalid_argument("model file: " + k + " has wrong length");
        return v;
    };
    ScaleStateModel m;
    m.bands = std::stoi(get("bands"));
    const int n = std::stoi(get("levels"));
    if (m.bands < 1 || n < 0) throw std::invalid_argument("model file: bad header");
    const auto k = static_cast<std::size_t>(m.bands);
    for (int i = 0; i < n; ++i) {
        const std::string p = "level." + std::to_string(i) + ".";
        LevelModel l;
        l.level = std::stoi(get(p + "index"));
        l.training = std::stoi(get(p + "training")) != 0;
        l.extrapolated = std::stoi(get(p + "extrapolated")) != 0;
        const auto a = get_exact(p + "A", k);
        l.transition = Eigen::Map<const Eigen::VectorXd>(a.data(), m.bands);
        const auto h = get_exact(p + "H", (k + 1) * k);
        l.measurement = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            h.data(), m.bands + 1, m.bands);
        const auto ru = get_exact(p + "Ru", k * k);
        l.process_cov = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            ru.data(), m.bands, m.bands);
        const auto rw = get_exact(p + "Rw", (k + 1) * (k + 1));
        l.observation_cov = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            rw.data(), m.bands + 1, m.bands + 1);
        m.levels.push_back(std::move(l));
    }
    m.validate();
    return m;
}

} // namespace pansharp::ssm
