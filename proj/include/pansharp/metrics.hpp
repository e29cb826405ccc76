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

// Fusion quality indices: CC, ERGAS, UIQI, Q4, SAM (with a reference) and
// QNR (without one).

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pansharp/error.hpp"
#include "pansharp/raster.hpp"

namespace pansharp::metrics {

/// Pearson correlation coefficient.
inline double cc(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) throw std::invalid_argument("cc: sample counts differ");
    if (a.empty()) throw std::invalid_argument("cc: empty input");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) throw NumericalError("cc: zero-variance input");
    return sab / std::sqrt(saa * sbb);
}

inline double cc(const Plane& a, const Plane& b)
{
    a.require_same_shape(b, "cc");
    return cc(std::span<const double>(a.data), std::span<const double>(b.data));
}

/// Root mean squared difference via bias^2 + SD^2 of the difference.
inline double rmse(std::span<const double> fused, std::span<const double> ref)
{
    if (fused.size() != ref.size() || fused.empty()) throw std::invalid_argument("rmse: sample counts differ");
    const double n = static_cast<double>(ref.size());
    double bias = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) bias += fused[i] - ref[i];
    bias /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double d = fused[i] - ref[i] - bias;
        var += d * d;
    }
    var /= n;
    return std::sqrt(bias * bias + var);
}

/// ERGAS = 100 (h/l) sqrt(mean_i RMSE_i^2 / M_i^2). `h_over_l` is the ratio
/// of pixel sizes, e.g. 0.25 for a 4x resolution gap.
inline double ergas(const MultiBandRaster& fused, const MultiBandRaster& ref, double h_over_l)
{
    if (!fused.same_shape(ref)) throw std::invalid_argument("ergas: raster shapes differ");
    double acc = 0.0;
    for (int b = 0; b < ref.bands(); ++b) {
        const auto r = ref.band(b);
        double m = 0.0;
        for (double v : r) m += v;
        m /= static_cast<double>(r.size());
        if (m == 0.0) throw NumericalError("ergas: reference band " + std::to_string(b) + " has zero mean");
        const double e = rmse(fused.band(b), r);
        acc += (e * e) / (m * m);
    }
    return 100.0 * h_over_l * std::sqrt(acc / ref.bands());
}

namespace detail {

/// Moment threshold under which a window statistic counts as zero.
inline constexpr double kDegenerateRel = 1e-12;

/// a/b ratio term with the convention 0/0 -> 1 and x/0 -> 0.
inline double stabilised(double num, double den, bool both_zero, bool one_zero)
{
    if (both_zero) return 1.0;
    if (one_zero || den == 0.0) return 0.0;
    return num / den;
}

struct WindowStats {
    double ma, mb, va, vb, cab, scale;
};

inline double uiqi_from_stats(const WindowStats& s)
{
    const double sa = std::sqrt(std::max(s.va, 0.0));
    const double sb = std::sqrt(std::max(s.vb, 0.0));
    const double tiny = kDegenerateRel * s.scale;
    const bool za = sa <= tiny, zb = sb <= tiny;
    const bool zma = std::abs(s.ma) <= tiny, zmb = std::abs(s.mb) <= tiny;
    const double sab = std::sqrt(std::max(s.va * s.vb, 0.0));
    const double corr = stabilised(s.cab, sab, za && zb, za != zb);
    const double lum = stabilised(2.0 * s.ma * s.mb, s.ma * s.ma + s.mb * s.mb, zma && zmb, false);
    const double con = stabilised(2.0 * sab, s.va + s.vb, za && zb, za != zb);
    return corr * lum * con;
}

inline void check_window(int window, int w, int h, const char* who)
{
    if (window < 1) throw std::invalid_argument(std::string(who) + ": window must be >= 1");
    if (window > w || window > h) throw std::invalid_argument(std::string(who) + ": window larger than plane");
}

} // namespace detail

/// Universal image quality index averaged over all `window` x `window`
/// windows (stride 1).
inline double uiqi(const Plane& a, const Plane& b, int window = 8)
{
    a.require_same_shape(b, "uiqi");
    detail::check_window(window, a.width, a.height, "uiqi");
    const double n = double(window) * window;
    double total = 0.0;
    long count = 0;
    for (int y0 = 0; y0 + window <= a.height; ++y0)
        for (int x0 = 0; x0 + window <= a.width; ++x0) {
            double ma = 0.0, mb = 0.0;
            for (int y = y0; y < y0 + window; ++y)
                for (int x = x0; x < x0 + window; ++x) {
                    ma += a.at(x, y);
                    mb += b.at(x, y);
                }
            ma /= n;
            mb /= n;
            double va = 0.0, vb = 0.0, cab = 0.0, e2 = 0.0;
            for (int y = y0; y < y0 + window; ++y)
                for (int x = x0; x < x0 + window; ++x) {
                    const double da = a.at(x, y) - ma;
                    const double db = b.at(x, y) - mb;
                    va += da * da;
                    vb += db * db;
                    cab += da * db;
                    e2 += a.at(x, y) * a.at(x, y) + b.at(x, y) * b.at(x, y);
                }
            total += detail::uiqi_from_stats({ma, mb, va / n, vb / n, cab / n, std::sqrt(e2 / n)});
            ++count;
        }
    return total / double(count);
}

/// Quaternion a0 + a1 i + a2 j + a3 k.
struct Quaternion {
    std::array<double, 4> c{};

    friend Quaternion operator*(const Quaternion& a, const Quaternion& b)
    {
        const auto& p = a.c;
        const auto& q = b.c;
        return {{p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3],
                 p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2],
                 p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1],
                 p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0]}};
    }
    Quaternion conj() const { return {{c[0], -c[1], -c[2], -c[3]}}; }
    double norm() const { return std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2] + c[3] * c[3]); }
};

/// Q4 over `window` x `window` windows: pixels are quaternions
/// b1 + b2 i + b3 j + b4 k, and the index multiplies the modulus of the
/// hypercomplex correlation, a contrast term and a mean-bias term.
inline double q4(const MultiBandRaster& fused, const MultiBandRaster& ref, int window = 8)
{
    if (fused.bands() != 4 || ref.bands() != 4) throw std::invalid_argument("q4: exactly four bands required");
    if (!fused.same_shape(ref)) throw std::invalid_argument("q4: raster shapes differ");
    detail::check_window(window, ref.width(), ref.height(), "q4");
    const int w = ref.width();
    const double n = double(window) * window;
    std::array<std::span<const double>, 4> fb, rb;
    for (int b = 0; b < 4; ++b) {
        fb[b] = fused.band(b);
        rb[b] = ref.band(b);
    }
    auto pix = [w](const std::array<std::span<const double>, 4>& s, int x, int y) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        return Quaternion{{s[0][i], s[1][i], s[2][i], s[3][i]}};
    };

    double total = 0.0;
    long count = 0;
    for (int y0 = 0; y0 + window <= ref.height(); ++y0)
        for (int x0 = 0; x0 + window <= w; ++x0) {
            Quaternion mu1, mu2;
            for (int y = y0; y < y0 + window; ++y)
                for (int x = x0; x < x0 + window; ++x) {
                    const Quaternion z1 = pix(fb, x, y), z2 = pix(rb, x, y);
                    for (int k = 0; k < 4; ++k) {
                        mu1.c[k] += z1.c[k];
                        mu2.c[k] += z2.c[k];
                    }
                }
            for (int k = 0; k < 4; ++k) {
                mu1.c[k] /= n;
                mu2.c[k] /= n;
            }
            Quaternion cov;
            double v1 = 0.0, v2 = 0.0, e2 = 0.0;
            for (int y = y0; y < y0 + window; ++y)
                for (int x = x0; x < x0 + window; ++x) {
                    Quaternion d1 = pix(fb, x, y), d2 = pix(rb, x, y);
                    for (int k = 0; k < 4; ++k) {
                        e2 += d1.c[k] * d1.c[k] + d2.c[k] * d2.c[k];
                        d1.c[k] -= mu1.c[k];
                        d2.c[k] -= mu2.c[k];
                    }
                    const Quaternion p = d1 * d2.conj();
                    for (int k = 0; k < 4; ++k) cov.c[k] += p.c[k];
                    v1 += d1.c[0] * d1.c[0] + d1.c[1] * d1.c[1] + d1.c[2] * d1.c[2] + d1.c[3] * d1.c[3];
                    v2 += d2.c[0] * d2.c[0] + d2.c[1] * d2.c[1] + d2.c[2] * d2.c[2] + d2.c[3] * d2.c[3];
                }
            for (double& c : cov.c) c /= n;
            v1 /= n;
            v2 /= n;
            const double s1 = std::sqrt(v1), s2 = std::sqrt(v2);
            const double tiny = detail::kDegenerateRel * std::sqrt(e2 / n);
            const bool z1 = s1 <= tiny, z2 = s2 <= tiny;
            const double m1 = mu1.norm(), m2 = mu2.norm();
            const bool zm1 = m1 <= tiny, zm2 = m2 <= tiny;
            const double s12 = std::sqrt(v1 * v2);
            const double corr = detail::stabilised(cov.norm(), s12, z1 && z2, z1 != z2);
            const double con = detail::stabilised(2.0 * s12, v1 + v2, z1 && z2, z1 != z2);
            const double mean = detail::stabilised(2.0 * m1 * m2, m1 * m1 + m2 * m2, zm1 && zm2, false);
            total += corr * con * mean;
            ++count;
        }
    return total / double(count);
}

struct SamResult {
    double degrees = 0.0;
    std::size_t valid_pixels = 0;
    std::size_t skipped_pixels = 0;
};

/// Mean spectral angle in degrees between reference pixels u and fused
/// pixels u_hat. Pixels where either vector has zero norm are skipped.
inline SamResult sam_detail(const MultiBandRaster& fused, const MultiBandRaster& ref)
{
    if (!fused.same_shape(ref)) throw std::invalid_argument("sam: raster shapes differ");
    SamResult r;
    double acc = 0.0;
    const std::size_t npix = ref.band_size();
    const std::size_t nb = static_cast<std::size_t>(ref.bands());
    const auto& fs = fused.samples();
    const auto& rs = ref.samples();
    for (std::size_t i = 0; i < npix; ++i) {
        double dot = 0.0, nu = 0.0, nf = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            const double u = rs[b * npix + i];
            const double f = fs[b * npix + i];
            dot += u * f;
            nu += u * u;
            nf += f * f;
        }
        if (nu == 0.0 || nf == 0.0) {
            ++r.skipped_pixels;
            continue;
        }
        const double c = std::clamp(dot / std::sqrt(nu * nf), -1.0, 1.0);
        acc += std::acos(c);
        ++r.valid_pixels;
    }
    if (r.valid_pixels == 0) throw NumericalError("sam: every pixel has zero norm");
    r.degrees = acc / double(r.valid_pixels) * 180.0 / std::numbers::pi;
    return r;
}

inline double sam(const MultiBandRaster& fused, const MultiBandRaster& ref) { return sam_detail(fused, ref).degrees; }

struct QnrResult {
    double d_lambda = 0.0;
    double d_s = 0.0;
    double qnr = 0.0;
};

/// No-reference QNR with exponents p = q = 1. `lms` is at its native
/// resolution; `pan` and `fused` share the fine grid. The PAN is degraded to
/// the LMS grid with the same anti-aliasing filter as `degrade`.
inline QnrResult qnr(const MultiBandRaster& fused, const MultiBandRaster& lms, const MultiBandRaster& pan,
                     int window = 8)
{
    if (pan.bands() != 1) throw std::invalid_argument("qnr: pan must have one band");
    if (fused.bands() != lms.bands()) throw std::invalid_argument("qnr: fused and lms band counts differ");
    if (fused.width() != pan.width() || fused.height() != pan.height())
        throw std::invalid_argument("qnr: fused and pan dimensions differ");
    const int k = lms.bands();
    if (k < 2) throw std::invalid_argument("qnr: D_lambda needs at least two bands");
    if (lms.width() == 0 || pan.width() % lms.width() != 0 || pan.height() % lms.height() != 0 ||
        pan.width() / lms.width() != pan.height() / lms.height())
        throw std::invalid_argument("qnr: pan/lms dimensions are not an integer ratio");
    const int ratio = pan.width() / lms.width();

    const auto fp = fused.planes();
    const auto lp = lms.planes();
    const Plane p = pan.band_plane(0);
    const Plane p_low = degrade(p, {ratio, ResamplingKernel::bicubic});
    const int wf = std::min({window, fused.width(), fused.height()});
    const int wl = std::min({window, lms.width(), lms.height()});

    double dl = 0.0;
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            if (i != j) dl += std::abs(uiqi(fp[i], fp[j], wf) - uiqi(lp[i], lp[j], wl));
    dl /= double(k) * (k - 1);

    double ds = 0.0;
    for (int i = 0; i < k; ++i) ds += std::abs(uiqi(fp[i], p, wf) - uiqi(lp[i], p_low, wl));
    ds /= double(k);

    // |Q difference| can exceed 1 when the two indices have opposite sign.
    dl = std::clamp(dl, 0.0, 1.0);
    ds = std::clamp(ds, 0.0, 1.0);
    return {dl, ds, (1.0 - dl) * (1.0 - ds)};
}

struct QualityReport {
    std::vector<double> cc;
    double cc_mean = 0.0;
    double ergas = 0.0;
    std::vector<double> uiqi;
    double uiqi_mean = 0.0;
    std::optional<double> q4;
    double sam_deg = 0.0;
    std::optional<QnrResult> qnr;
};

/// All reference indices for `fused` against `ref`. `ratio` is the
/// resolution ratio between the fused grid and the original MS grid.
inline QualityReport evaluate(const MultiBandRaster& fused, const MultiBandRaster& ref, int ratio, int window = 8)
{
    if (!fused.same_shape(ref)) throw std::invalid_argument("evaluate: raster shapes differ");
    QualityReport q;
    const int wnd = std::min({window, ref.width(), ref.height()});
    for (int b = 0; b < ref.bands(); ++b) {
        const Plane f = fused.band_plane(b);
        const Plane r = ref.band_plane(b);
        q.cc.push_back(cc(f, r));
        q.uiqi.push_back(uiqi(f, r, wnd));
    }
    for (double v : q.cc) q.cc_mean += v / double(q.cc.size());
    for (double v : q.uiqi) q.uiqi_mean += v / double(q.uiqi.size());
    q.ergas = ergas(fused, ref, 1.0 / ratio);
    if (ref.bands() == 4) q.q4 = q4(fused, ref, wnd);
    q.sam_deg = sam(fused, ref);
    return q;
}

inline std::string csv_header(const QualityReport& q)
{
    std::ostringstream os;
    os << "cc,ergas,uiqi,q4,sam";
    for (std::size_t b = 0; b < q.cc.size(); ++b) os << ",cc_b" << (b + 1);
    for (std::size_t b = 0; b < q.uiqi.size(); ++b) os << ",uiqi_b" << (b + 1);
    if (q.qnr) os << ",d_lambda,d_s,qnr";
    return os.str();
}

inline std::string csv_row(const QualityReport& q)
{
    std::ostringstream os;
    os.precision(10);
    os << q.cc_mean << ',' << q.ergas << ',' << q.uiqi_mean << ',';
    if (q.q4) os << *q.q4;
    os << ',' << q.sam_deg;
    for (double v : q.cc) os << ',' << v;
    for (double v : q.uiqi) os << ',' << v;
    if (q.qnr) os << ',' << q.qnr->d_lambda << ',' << q.qnr->d_s << ',' << q.qnr->qnr;
    return os.str();
}

} // namespace pansharp::metrics
