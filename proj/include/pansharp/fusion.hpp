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

// Pansharpening pipelines: wavelet / Kalman particle filter fusion, the
// classical baselines, and reduced-resolution (Wald) evaluation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pansharp/atwt.hpp"
#include "pansharp/error.hpp"
#include "pansharp/kpf.hpp"
#include "pansharp/metrics.hpp"
#include "pansharp/raster.hpp"
#include "pansharp/ssm.hpp"

namespace pansharp {

enum class FusionMethod { wkpf, aw, ihs, pca, hpm, upsample };

inline std::string to_string(FusionMethod m)
{
    switch (m) {
    case FusionMethod::wkpf: return "wkpf";
    case FusionMethod::aw: return "aw";
    case FusionMethod::ihs: return "ihs";
    case FusionMethod::pca: return "pca";
    case FusionMethod::hpm: return "hpm";
    case FusionMethod::upsample: return "upsample";
    }
    return "?";
}

inline FusionMethod parse_fusion_method(const std::string& s)
{
    if (s == "wkpf") return FusionMethod::wkpf;
    if (s == "aw") return FusionMethod::aw;
    if (s == "ihs") return FusionMethod::ihs;
    if (s == "pca") return FusionMethod::pca;
    if (s == "hpm") return FusionMethod::hpm;
    if (s == "upsample" || s == "upsample-only") return FusionMethod::upsample;
    throw std::invalid_argument("unknown fusion method '" + s + "'");
}

struct FusionConfig {
    int ratio = 4;
    int levels = 0;              // 0: log2(ratio) + 2
    int particles = 200;
    double resample_threshold = 0.5;
    std::optional<double> gamma; // default 1e3 * mean(dP^2) of the training levels
    std::uint64_t seed = 1;
    FilterBankKind filter_bank = FilterBankKind::b3_spline;
    ResamplingKernel kernel = ResamplingKernel::bicubic;
    double prior_inflation = 2.0;
    bool full_process_cov = true;

    int missing_levels() const { return lowpass_passes(ratio); }
    int resolved_levels() const { return levels > 0 ? levels : missing_levels() + 2; }

    void validate() const
    {
        if (ratio < 1 || (ratio & (ratio - 1)) != 0) throw std::invalid_argument("ratio must be a power of two");
        if (particles < 1) throw std::invalid_argument("particle count must be >= 1");
        if (!(resample_threshold >= 0.0 && resample_threshold <= 1.0))
            throw std::invalid_argument("resample_threshold must lie in [0, 1]");
        if (gamma && !(*gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
        if (levels < 0) throw std::invalid_argument("levels must be >= 0");
        if (levels > 0 && levels <= missing_levels())
            throw std::invalid_argument("levels must exceed log2(ratio) so that training levels exist");
        if (!(prior_inflation > 0.0)) throw std::invalid_argument("prior_inflation must be > 0");
    }
};

struct LevelDiagnostics {
    int level = 0;
    bool training = false;
    double mean_ess = 0.0;
    double resample_rate = 0.0;
};

struct FusionResult {
    MultiBandRaster fused;
    MultiBandRaster upsampled;
    std::vector<MultiBandRaster> details;  // index 0 = level 1; details used in the reconstruction
    std::vector<LevelDiagnostics> levels;  // coarse to fine
    std::vector<ssm::KurtosisReport> kurtosis;
    std::optional<ssm::ScaleStateModel> model;
    double gamma = 0.0;
    std::size_t diverged_sites = 0;
    std::size_t sites = 0;
};

namespace detail {

inline void check_pair(const MultiBandRaster& pan, const MultiBandRaster& lms, const FusionConfig& cfg, const char* who)
{
    cfg.validate();
    if (pan.bands() != 1) throw std::invalid_argument(std::string(who) + ": PAN must have one band");
    if (pan.width() != lms.width() * cfg.ratio || pan.height() != lms.height() * cfg.ratio)
        throw std::invalid_argument(std::string(who) + ": PAN is " + std::to_string(pan.width()) + "x" +
                                    std::to_string(pan.height()) + ", expected LMS dimensions x " +
                                    std::to_string(cfg.ratio));
}

inline FusionResult plain_result(MultiBandRaster fused, MultiBandRaster up)
{
    FusionResult r;
    r.fused = std::move(fused);
    r.upsampled = std::move(up);
    r.sites = r.fused.band_size();
    return r;
}

struct MeanStd {
    double mean = 0.0, sd = 0.0;
};

inline MeanStd mean_std(std::span<const double> v)
{
    MeanStd m;
    for (double x : v) m.mean += x;
    m.mean /= double(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(s / double(v.size()));
    return m;
}

/// Affine match of `src` to the mean and standard deviation of `target`.
inline std::vector<double> match_moments(std::span<const double> src, MeanStd target)
{
    const MeanStd s = mean_std(src);
    std::vector<double> out(src.size());
    const double g = s.sd > 0.0 ? target.sd / s.sd : 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = target.mean + g * (src[i] - s.mean);
    return out;
}

} // namespace detail

inline MultiBandRaster upsample_lms(const MultiBandRaster& lms, const FusionConfig& cfg)
{
    return upsample(lms, ResamplingSpec{cfg.ratio, cfg.kernel});
}

/// LMS interpolated onto the PAN grid, no injection.
inline FusionResult fuse_upsample(const MultiBandRaster& pan, const MultiBandRaster& lms, const FusionConfig& cfg)
{
    detail::check_pair(pan, lms, cfg, "fuse_upsample");
    auto up = upsample_lms(lms, cfg);
    return detail::plain_result(up, up);
}

/// Additive wavelet injection: every band receives the PAN details of the
/// missing levels unchanged.
inline FusionResult fuse_aw(const MultiBandRaster& pan, const MultiBandRaster& lms, const FusionConfig& cfg)
{
    detail::check_pair(pan, lms, cfg, "fuse_aw");
    auto up = upsample_lms(lms, cfg);
    const int l = cfg.missing_levels();
    if (l == 0) return detail::plain_result(up, up);
    const auto pp = decompose(pan.band_plane(0), l, FilterBank{cfg.filter_bank});
    Plane inject(pan.width(), pan.height());
    for (const auto& d : pp.details) inject += d;
    std::vector<Plane> out;
    for (int b = 0; b < up.bands(); ++b) out.push_back(up.band_plane(b) + inject);
    FusionResult r = detail::plain_result(MultiBandRaster::from_planes(out, lms.labels()), up);
    for (const auto& d : pp.details) r.details.push_back(MultiBandRaster::from_plane(d));
    return r;
}

/// Linear IHS: I = band mean, PAN matched to I, difference added to each band.
inline FusionResult fuse_ihs(const MultiBandRaster& pan, const MultiBandRaster& lms, const FusionConfig& cfg)
{
    detail::check_pair(pan, lms, cfg, "fuse_ihs");
    if (lms.bands() != 3) throw std::invalid_argument("fuse_ihs: needs exactly 3 bands");
    auto up = upsample_lms(lms, cfg);
    if (cfg.ratio == 1) return detail::plain_result(up, up);
    const std::size_t n = up.band_size();
    std::vector<double> intensity(n, 0.0);
    for (int b = 0; b < 3; ++b) {
        const auto s = up.band(b);
        for (std::size_t i = 0; i < n; ++i) intensity[i] += s[i] / 3.0;
    }
    const auto matched = detail::match_moments(pan.band(0), detail::mean_std(intensity));
    std::vector<double> s(up.samples());
    for (int b = 0; b < 3; ++b)
        for (std::size_t i = 0; i < n; ++i) s[n * b + i] += matched[i] - intensity[i];
    return detail::plain_result({up.width(), up.height(), 3, std::move(s), lms.labels()}, up);
}

/// Principal-component substitution. PC1 (largest variance, sign chosen so
/// its loadings sum positive) is replaced by the PAN matched to it.
inline FusionResult fuse_pca(const MultiBandRaster& pan, const MultiBandRaster& lms, const FusionConfig& cfg)
{
    detail::check_pair(pan, lms, cfg, "fuse_pca");
    const int k = lms.bands();
    if (k < 2) throw std::invalid_argument("fuse_pca: needs at least 2 bands");
    auto up = upsample_lms(lms, cfg);
    if (cfg.ratio == 1) return detail::plain_result(up, up);
    const auto n = static_cast<Eigen::Index>(up.band_size());
    Eigen::Map<const Eigen::MatrixXd> x(up.samples().data(), n, k);
    const Eigen::RowVectorXd mu = x.colwise().mean();
    const Eigen::MatrixXd c = x.rowwise() - mu;
    const Eigen::MatrixXd cov = (c.transpose() * c) / double(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success || !(es.eigenvalues()[k - 1] > 0.0))
        throw NumericalError("fuse_pca: degenerate band covariance");
    Eigen::MatrixXd v = es.eigenvectors().rowwise().reverse();  // descending variance
    if (v.col(0).sum() < 0.0) v.col(0) = -v.col(0);
    Eigen::MatrixXd pcs = c * v;
    const std::vector<double> pc1(pcs.col(0).data(), pcs.col(0).data() + n);
    const auto matched = detail::match_moments(pan.band(0), detail::mean_std(pc1));
    pcs.col(0) = Eigen::Map<const Eigen::VectorXd>(matched.data(), n);
    const Eigen::MatrixXd y = (pcs * v.transpose()).rowwise() + mu;
    std::vector<double> s(y.data(), y.data() + y.size());
    return detail::plain_result({up.width(), up.height(), k, std::move(s), lms.labels()}, up);
}

/// High-pass modulation: fused = up * PAN / PAN_low, PAN_low the B3
/// approximation after log2(ratio) levels, guarded at 1e-6 * mean(PAN).
inline FusionResult fuse_hpm(const MultiBandRaster& pan, const MultiBandRaster& lms, const FusionConfig& cfg)
{
    detail::check_pair(pan, lms, cfg, "fuse_hpm");
    auto up = upsample_lms(lms, cfg);
    const int l = cfg.missing_levels();
    if (l == 0) return detail::plain_result(up, up);
    const Plane p = pan.band_plane(0);
    const Plane low = atrous_lowpass(p, kB3SplineTaps, l);
    const double eps = 1e-6 * std::abs(p.mean());
    const std::size_t n = up.band_size();
    std::vector<double> s(up.samples());
    for (std::size_t i = 0; i < n; ++i) {
        const double ratio = p.data[i] / std::max(low.data[i], eps);
        for (int b = 0; b < up.bands(); ++b) s[n * b + i] *= ratio;
    }
    return detail::plain_result({up.width(), up.height(), up.bands(), std::move(s), lms.labels()}, up);
}

namespace detail {

/// Per-level filter inputs: model plus the observation planes.
struct WkpfLevel {
    int level = 0;
    bool training = false;
    ssm::LevelModel model;
    const Plane* pan = nullptr;
    std::vector<const Plane*> hdms;
};

template <int D, int M>
kpf::StateSpaceStep<D, M> to_step(const ssm::LevelModel& lm)
{
    kpf::StateSpaceStep<D, M> s;
    s.transition = lm.transition.asDiagonal();
    s.measurement = lm.measurement;
    s.process_cov = lm.process_cov;
    s.observation_cov = lm.observation_cov;
    return s;
}

/// Runs one filter per site over the level sequence. Returns the per-level
/// MMSE detail estimates (coarse to fine) and the diagnostics.
template <int D, int M>
void run_site_filters(const std::vector<WkpfLevel>& levels, const Eigen::VectorXd& prior_mean,
                      const Eigen::MatrixXd& prior_cov, const FusionConfig& cfg, int bands,
                      std::vector<std::vector<Plane>>& estimates, FusionResult& result)
{
    using StateVec = Eigen::Matrix<double, D, 1>;
    using StateMat = Eigen::Matrix<double, D, D>;
    using ObsVec = Eigen::Matrix<double, M, 1>;
    const int w = levels.front().pan->width, h = levels.front().pan->height;
    const std::size_t sites = static_cast<std::size_t>(w) * h;

    std::vector<kpf::PreparedStep<D, M>> prepared;
    for (const auto& l : levels) prepared.emplace_back(to_step<D, M>(l.model));

    estimates.assign(levels.size(), std::vector<Plane>(static_cast<std::size_t>(bands), Plane(w, h)));
    std::vector<double> ess_sum(levels.size(), 0.0), resample_count(levels.size(), 0.0);
    const StateVec mu = prior_mean;
    const StateMat p0 = prior_cov;
    ObsVec obs(bands + 1);

    for (std::size_t site = 0; site < sites; ++site) {
        auto set = kpf::ParticleSet<D>::from_gaussian(static_cast<std::size_t>(cfg.particles), mu, p0, p0,
                                                      kpf::derive_seed(cfg.seed, site));
        bool diverged = false;
        std::vector<StateVec> est(levels.size());
        for (std::size_t li = 0; li < levels.size() && !diverged; ++li) {
            const auto& l = levels[li];
            obs[0] = l.pan->data[site];
            for (int b = 0; b < bands; ++b) obs[b + 1] = l.hdms[static_cast<std::size_t>(b)]->data[site];
            try {
                kpf::pf_step_inplace(set, prepared[li], obs, cfg.resample_threshold);
                est[li] = set.estimate;
                ess_sum[li] += set.effective_sample_size / double(cfg.particles);
                resample_count[li] += set.resampled ? 1.0 : 0.0;
            } catch (const NumericalError&) {
                diverged = true;
            }
        }
        if (diverged) {
            // Exact Kalman filter of the same linear-Gaussian model.
            ++result.diverged_sites;
            kpf::KalmanFilter<D, M> kf(mu, p0);
            for (std::size_t li = 0; li < levels.size(); ++li) {
                const auto& l = levels[li];
                obs[0] = l.pan->data[site];
                for (int b = 0; b < bands; ++b) obs[b + 1] = l.hdms[static_cast<std::size_t>(b)]->data[site];
                kf.step(prepared[li].step(), obs);
                est[li] = kf.mean();
            }
        }
        for (std::size_t li = 0; li < levels.size(); ++li)
            for (int b = 0; b < bands; ++b) estimates[li][static_cast<std::size_t>(b)].data[site] = est[li][b];
    }
    for (std::size_t li = 0; li < levels.size(); ++li) {
        LevelDiagnostics d;
        d.level = levels[li].level;
        d.training = levels[li].training;
        d.mean_ess = ess_sum[li] / double(sites);
        d.resample_rate = resample_count[li] / double(sites);
        result.levels.push_back(d);
    }
    result.sites = sites;
}

inline double jitter_scale(const Eigen::MatrixXd& m)
{
    return m.diagonal().cwiseAbs().mean();
}

/// Symmetrises and lifts the spectrum of a covariance to at least
/// `rel` times its mean diagonal, and never below `floor_abs`, so that it
/// can be factored.
inline Eigen::MatrixXd regularise(const Eigen::MatrixXd& m, double rel, double floor_abs)
{
    Eigen::MatrixXd s = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    const double lo = std::max(rel * jitter_scale(s), floor_abs);
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(lo);
    s = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (s + s.transpose());
}

} // namespace detail

/// Wavelet Kalman particle filter fusion.
///
/// Levels L+1..J (L = log2 ratio) hold MS details from the interpolated LMS
/// and serve for training; levels 1..L are estimated. The observation at
/// level k is [dP_k; dHDMS_k]. At the estimated levels dHDMS is the detail
/// of the interpolated LMS. At training levels the same relationship is
/// reproduced one resolution step down: dHDMS comes from the LMS degraded
/// and re-interpolated by the ratio, and dP from the PAN passed through the
/// same degrade / interpolate chain as the MS, so that both sides of every
/// training fit see the same transfer function.
inline FusionResult fuse_wkpf(const MultiBandRaster& pan, const MultiBandRaster& lms, const FusionConfig& cfg)
{
    detail::check_pair(pan, lms, cfg, "fuse_wkpf");
    const int k = lms.bands();
    const int r = cfg.ratio;
    auto up = upsample_lms(lms, cfg);
    const int l_miss = cfg.missing_levels();
    if (l_miss == 0) return detail::plain_result(up, up);
    const int j_levels = cfg.resolved_levels();
    const FilterBank bank{cfg.filter_bank};
    const int w = pan.width(), h = pan.height();
    if (w < bank.support(j_levels) || h < bank.support(j_levels))
        throw std::invalid_argument("fuse_wkpf: image too small for " + std::to_string(j_levels) + " levels");
    if (lms.width() % r != 0 || lms.height() % r != 0)
        throw std::invalid_argument("fuse_wkpf: LMS dimensions must be divisible by the ratio");

    const ResamplingSpec rs{r, cfg.kernel};
    const Plane pan_plane = pan.band_plane(0);
    const auto pan_pyr = decompose(pan_plane, j_levels, bank);
    const auto pan_matched_pyr = decompose(upsample(degrade(pan_plane, rs), rs), j_levels, bank);
    const auto ms_pyr = decompose(up, j_levels, bank);
    const auto coarse_up = upsample(upsample(degrade(lms, rs), rs), rs);
    const auto hd_train_pyr = decompose(coarse_up, j_levels, bank);

    std::vector<int> train_levels;  // coarse to fine
    for (int lv = j_levels; lv > l_miss; --lv) train_levels.push_back(lv);
    std::vector<int> miss_levels;
    for (int lv = l_miss; lv >= 1; --lv) miss_levels.push_back(lv);

    const int margin = std::min(bank.support(j_levels) / 2, std::min(w, h) / 2 - 1);
    const auto tensor = ssm::make_training_tensor(ms_pyr, pan_matched_pyr, hd_train_pyr, train_levels, margin);

    FusionResult result;
    result.upsampled = up;
    double mean_dp2 = 0.0;
    std::size_t cnt = 0;
    for (const auto& tl : tensor.levels)
        for (double v : tl.dp) {
            mean_dp2 += v * v;
            ++cnt;
        }
    mean_dp2 /= double(std::max<std::size_t>(cnt, 1));
    const double gamma = cfg.gamma ? *cfg.gamma : 1e3 * mean_dp2;
    result.gamma = gamma;

    // Mixing coefficients and noise per training level.
    ssm::ScaleStateModel model;
    model.bands = k;
    std::vector<std::vector<double>> pan_mix(static_cast<std::size_t>(k)), hd_mix(static_cast<std::size_t>(k));
    for (const auto& tl : tensor.levels) {
        const auto pm = ssm::fit_pan_mixing(tl.dm, tl.dp, gamma);
        std::vector<double> hm(static_cast<std::size_t>(k));
        for (int b = 0; b < k; ++b)
            hm[b] = std::max(ssm::fit_hdms_mixing(tl.dm[b], tl.dhdms[b], gamma).coeffs[0], 0.0);
        ssm::LevelModel lm;
        lm.level = tl.level;
        lm.training = true;
        std::vector<double> pmc(pm.coeffs);
        for (double& v : pmc) v = std::max(v, 0.0);
        lm.measurement = ssm::measurement_matrix(pmc, hm);
        lm.observation_cov = ssm::fit_observation_noise(tl, lm.measurement);
        result.kurtosis.push_back(ssm::residual_kurtosis(tl, lm.measurement));
        for (int b = 0; b < k; ++b) {
            pan_mix[b].push_back(pmc[b]);
            hd_mix[b].push_back(hm[b]);
        }
        model.levels.push_back(std::move(lm));
    }

    // AR(1) over scale from the training walk.
    Eigen::VectorXd a_tr(k), ru(k);
    for (int b = 0; b < k; ++b) {
        std::vector<std::vector<double>> seq;
        double energy = 0.0;
        for (std::size_t li = 0; li < tensor.levels.size(); ++li) {
            seq.push_back(tensor.levels[li].dm[b]);
            if (li + 1 < tensor.levels.size())
                for (double v : seq.back()) energy += v * v;
        }
        // A band without detail at the lagged training levels stays at zero.
        const auto f = energy > 0.0 ? ssm::fit_ar1(seq) : ssm::Ar1Fit{};
        a_tr[b] = f.a;
        ru[b] = f.noise_var;
    }

    // Extrapolated measurement rows for the estimated levels.
    std::vector<std::vector<double>> pan_x(static_cast<std::size_t>(k)), hd_x(static_cast<std::size_t>(k));
    for (int b = 0; b < k; ++b) {
        pan_x[b] = ssm::extrapolate_mixing(train_levels, pan_mix[b], miss_levels).values;
        hd_x[b] = ssm::extrapolate_mixing(train_levels, hd_mix[b], miss_levels).values;
    }
    const Eigen::MatrixXd rw_fine = model.levels.back().observation_cov;
    for (std::size_t i = 0; i < miss_levels.size(); ++i) {
        ssm::LevelModel lm;
        lm.level = miss_levels[i];
        lm.extrapolated = true;
        std::vector<double> pm(static_cast<std::size_t>(k)), hm(static_cast<std::size_t>(k));
        for (int b = 0; b < k; ++b) {
            pm[b] = pan_x[b][i];
            hm[b] = hd_x[b][i];
        }
        lm.measurement = ssm::measurement_matrix(pm, hm);
        lm.observation_cov = rw_fine;
        model.levels.push_back(std::move(lm));
    }
    // Process noise: covariance of the AR(1) residual vectors across bands.
    Eigen::MatrixXd ru_cov = Eigen::MatrixXd::Zero(k, k);
    std::size_t nres = 0;
    for (std::size_t li = 1; li < tensor.levels.size(); ++li) {
        const auto& cur = tensor.levels[li];
        const auto& prev = tensor.levels[li - 1];
        Eigen::VectorXd e(k);
        for (std::size_t s = 0; s < cur.sites(); ++s) {
            for (int b = 0; b < k; ++b) e[b] = cur.dm[b][s] - a_tr[b] * prev.dm[b][s];
            ru_cov.noalias() += e * e.transpose();
            ++nres;
        }
    }
    ru_cov /= double(std::max<std::size_t>(nres, 1));
    if (!cfg.full_process_cov) ru_cov = Eigen::MatrixXd(ru.asDiagonal());
    ru_cov = detail::regularise(ru_cov, 1e-9, 1e-300);
    for (auto& lm : model.levels) {
        lm.transition = a_tr;
        lm.process_cov = ru_cov;
        lm.observation_cov = detail::regularise(lm.observation_cov, 1e-6, 1e-12);
    }
    model.validate();

    // Prior from the coarsest training level.
    const auto& coarse = tensor.levels.front();
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(k);
    Eigen::MatrixXd c0 = Eigen::MatrixXd::Zero(k, k);
    const double ns = double(coarse.sites());
    for (int b = 0; b < k; ++b) {
        for (double v : coarse.dm[b]) mu[b] += v;
        mu[b] /= ns;
    }
    for (std::size_t s = 0; s < coarse.sites(); ++s)
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) c0(i, j) += (coarse.dm[i][s] - mu[i]) * (coarse.dm[j][s] - mu[j]);
    c0 /= std::max(ns - 1.0, 1.0);
    const Eigen::MatrixXd prior = detail::regularise(cfg.prior_inflation * c0, 1e-9, 1e-12);

    std::vector<detail::WkpfLevel> seq;
    for (const auto& lm : model.levels) {
        detail::WkpfLevel wl;
        wl.level = lm.level;
        wl.training = lm.training;
        wl.model = lm;
        if (lm.training) {
            wl.pan = &pan_matched_pyr.detail(lm.level);
            for (int b = 0; b < k; ++b) wl.hdms.push_back(&hd_train_pyr[b].detail(lm.level));
        } else {
            wl.pan = &pan_pyr.detail(lm.level);
            for (int b = 0; b < k; ++b) wl.hdms.push_back(&ms_pyr[b].detail(lm.level));
        }
        seq.push_back(std::move(wl));
    }

    std::vector<std::vector<Plane>> est;
    switch (k) {
    case 1: detail::run_site_filters<1, 2>(seq, mu, prior, cfg, k, est, result); break;
    case 2: detail::run_site_filters<2, 3>(seq, mu, prior, cfg, k, est, result); break;
    case 3: detail::run_site_filters<3, 4>(seq, mu, prior, cfg, k, est, result); break;
    case 4: detail::run_site_filters<4, 5>(seq, mu, prior, cfg, k, est, result); break;
    default:
        detail::run_site_filters<Eigen::Dynamic, Eigen::Dynamic>(seq, mu, prior, cfg, k, est, result);
        break;
    }
    if (result.diverged_sites * 100 > result.sites)
        throw NumericalError("fuse_wkpf: filter divergence at " + std::to_string(result.diverged_sites) + " of " +
                             std::to_string(result.sites) + " sites");

    // Reconstruction: true details at training levels, estimates below.
    std::vector<Plane> bands_out;
    result.details.assign(static_cast<std::size_t>(j_levels), MultiBandRaster());
    std::vector<std::vector<Plane>> per_level(static_cast<std::size_t>(j_levels));
    for (std::size_t li = 0; li < seq.size(); ++li) {
        const int lv = seq[li].level;
        for (int b = 0; b < k; ++b)
            per_level[lv - 1].push_back(seq[li].training ? ms_pyr[b].detail(lv) : est[li][b]);
    }
    for (int lv = 1; lv <= j_levels; ++lv) result.details[lv - 1] = MultiBandRaster::from_planes(per_level[lv - 1]);
    for (int b = 0; b < k; ++b) {
        Plane out = ms_pyr[b].approximation;
        for (int lv = 1; lv <= j_levels; ++lv) out += per_level[lv - 1][b];
        bands_out.push_back(std::move(out));
    }
    result.fused = MultiBandRaster::from_planes(bands_out, lms.labels());
    result.model = std::move(model);
    return result;
}

inline FusionResult fuse(FusionMethod m, const MultiBandRaster& pan, const MultiBandRaster& lms,
                         const FusionConfig& cfg)
{
    switch (m) {
    case FusionMethod::wkpf: return fuse_wkpf(pan, lms, cfg);
    case FusionMethod::aw: return fuse_aw(pan, lms, cfg);
    case FusionMethod::ihs: return fuse_ihs(pan, lms, cfg);
    case FusionMethod::pca: return fuse_pca(pan, lms, cfg);
    case FusionMethod::hpm: return fuse_hpm(pan, lms, cfg);
    case FusionMethod::upsample: return fuse_upsample(pan, lms, cfg);
    }
    throw std::invalid_argument("fuse: unknown method");
}

/// Reduced-resolution evaluation: both inputs are degraded by the ratio, the
/// degraded pair is fused, and the result is scored against `ms_reference`.
inline metrics::QualityReport wald_protocol(const MultiBandRaster& ms_reference, const MultiBandRaster& pan_reference,
                                            FusionMethod method, const FusionConfig& cfg, FusionResult* fused = nullptr)
{
    cfg.validate();
    const ResamplingSpec rs{cfg.ratio, cfg.kernel};
    const auto lms = degrade(ms_reference, rs);
    const auto pan = degrade(pan_reference, rs);
    auto res = fuse(method, pan, lms, cfg);
    auto report = metrics::evaluate(res.fused, ms_reference, cfg.ratio);
    if (fused) *fused = std::move(res);
    return report;
}

} // namespace pansharp
