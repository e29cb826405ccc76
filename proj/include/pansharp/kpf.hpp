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

// Particle filter for linear-Gaussian state-space models
//
//   s_k = A_k s_{k-1} + u_k,   u_k ~ N(0, R_u)
//   x_k = H_k s_k     + w_k,   w_k ~ N(0, R_w)
//
// with a per-particle Kalman update as the importance proposal and residual
// resampling. Weights are handled in log space.
//
// The dimension template arguments let hot loops use fixed-size Eigen types;
// Eigen::Dynamic (the default) works for any size.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "pansharp/error.hpp"

namespace pansharp::kpf {

using Engine = std::mt19937_64;

/// splitmix64 finaliser; derives independent stream seeds from (base, index).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept
{
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

template <int D = Eigen::Dynamic, int M = Eigen::Dynamic>
struct StateSpaceStep {
    using StateVec = Eigen::Matrix<double, D, 1>;
    using ObsVec = Eigen::Matrix<double, M, 1>;
    using StateMat = Eigen::Matrix<double, D, D>;
    using ObsMat = Eigen::Matrix<double, M, D>;
    using ObsCov = Eigen::Matrix<double, M, M>;

    StateMat transition;       // A_k
    ObsMat measurement;        // H_k
    StateMat process_cov;      // R_u
    ObsCov observation_cov;    // R_w

    Eigen::Index state_dim() const { return transition.rows(); }
    Eigen::Index obs_dim() const { return measurement.rows(); }

    void validate() const
    {
        const auto d = transition.rows();
        const auto m = measurement.rows();
        if (transition.cols() != d || measurement.cols() != d || process_cov.rows() != d ||
            process_cov.cols() != d || observation_cov.rows() != m || observation_cov.cols() != m)
            throw std::invalid_argument("StateSpaceStep: inconsistent dimensions");
        auto symmetric = [](const auto& m) {
            return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, m.cwiseAbs().maxCoeff());
        };
        if (!symmetric(process_cov) || !symmetric(observation_cov))
            throw std::invalid_argument("StateSpaceStep: covariances must be symmetric");
    }
};

template <int D = Eigen::Dynamic>
struct Particle {
    using StateVec = Eigen::Matrix<double, D, 1>;
    using StateMat = Eigen::Matrix<double, D, D>;

    StateVec state;       // current sample
    StateVec prev_state;  // sample it was propagated from
    StateVec mean;        // proposal mean
    StateMat cov;         // proposal covariance (carried as P_{k-1} into the next step)
    double weight = 1.0;
};

namespace detail {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

template <typename Mat>
Eigen::LLT<Mat> checked_llt(const Mat& m, const char* what)
{
    Eigen::LLT<Mat> llt(m);
    if (llt.info() != Eigen::Success) throw NumericalError(std::string(what) + " is not positive definite");
    return llt;
}

template <typename LLT>
double half_log_det(const LLT& llt)
{
    return llt.matrixLLT().diagonal().array().log().sum();
}

/// log N(r; 0, S) given the Cholesky factor of S.
template <typename LLT, typename Vec>
double log_gauss(const LLT& llt, const Vec& r)
{
    const Vec z = llt.matrixL().solve(r);
    return -0.5 * z.squaredNorm() - half_log_det(llt) - 0.5 * double(r.size()) * kLog2Pi;
}

/// Kalman quantities that depend only on the incoming covariance.
template <int D, int M>
struct ProposalMoments {
    Eigen::Matrix<double, D, M> gain;
    Eigen::Matrix<double, D, D> cov;
    Eigen::Matrix<double, D, D> chol;
    double half_log_det = 0.0;
};

template <int D, int M>
ProposalMoments<D, M> proposal_moments(const Eigen::Matrix<double, D, D>& prev_cov, const StateSpaceStep<D, M>& s)
{
    ProposalMoments<D, M> out;
    const Eigen::Matrix<double, D, D> pred = s.transition * prev_cov * s.transition.transpose() + s.process_cov;
    const Eigen::Matrix<double, M, M> innov =
        s.observation_cov + s.measurement * pred * s.measurement.transpose();
    Eigen::LLT<Eigen::Matrix<double, M, M>> llt(innov);
    if (llt.info() != Eigen::Success) throw NumericalError("kalman_propose: singular innovation covariance");
    // K = P H^T S^-1, with S = L L^T.
    const Eigen::Matrix<double, D, M> pht = pred * s.measurement.transpose();
    out.gain = llt.solve(pht.transpose()).transpose();
    Eigen::Matrix<double, D, D> post = pred - out.gain * s.measurement * pred;
    post = 0.5 * (post + post.transpose()).eval();
    out.cov = post;
    Eigen::LLT<Eigen::Matrix<double, D, D>> pl(post);
    if (pl.info() != Eigen::Success) throw NumericalError("kalman_propose: proposal covariance is singular");
    out.chol = pl.matrixL();
    out.half_log_det = half_log_det(pl);
    return out;
}

} // namespace detail

/// Step quantities reused by every particle: the step itself and Cholesky
/// factors of both noise covariances.
template <int D = Eigen::Dynamic, int M = Eigen::Dynamic>
class PreparedStep {
public:
    using Step = StateSpaceStep<D, M>;

    explicit PreparedStep(Step step)
        : step_(validated(std::move(step))),
          obs_llt_(detail::checked_llt(step_.observation_cov, "R_w")),
          proc_llt_(detail::checked_llt(step_.process_cov, "R_u"))
    {
    }

    const Step& step() const noexcept { return step_; }
    const Eigen::LLT<typename Step::ObsCov>& obs_llt() const noexcept { return obs_llt_; }
    const Eigen::LLT<typename Step::StateMat>& proc_llt() const noexcept { return proc_llt_; }

private:
    static Step validated(Step s)
    {
        s.validate();
        return s;
    }

    Step step_;
    Eigen::LLT<typename Step::ObsCov> obs_llt_;
    Eigen::LLT<typename Step::StateMat> proc_llt_;
};

template <int D = Eigen::Dynamic>
struct ParticleSet {
    using StateVec = Eigen::Matrix<double, D, 1>;
    using StateMat = Eigen::Matrix<double, D, D>;

    std::vector<Particle<D>> particles;
    std::uint64_t rng_seed = 0;
    Engine rng;
    std::normal_distribution<double> normal{0.0, 1.0};
    double effective_sample_size = 0.0;  // before the last resampling decision
    StateVec estimate;                   // weighted mean before the last resampling decision
    bool resampled = false;

    std::size_t size() const noexcept { return particles.size(); }

    /// N particles drawn from N(mean, cov), each carrying `particle_cov` as
    /// its initial Kalman covariance, weights 1/N.
    static ParticleSet from_gaussian(std::size_t n, const StateVec& mean, const StateMat& cov,
                                     const StateMat& particle_cov, std::uint64_t seed)
    {
        if (n == 0) throw std::invalid_argument("ParticleSet: need at least one particle");
        ParticleSet set;
        set.rng_seed = seed;
        set.rng.seed(seed);
        Eigen::LLT<StateMat> llt(cov);
        StateMat l;
        if (llt.info() == Eigen::Success) {
            l = llt.matrixL();
        } else {
            // Semi-definite prior: symmetric square root through the eigendecomposition.
            Eigen::SelfAdjointEigenSolver<StateMat> es(cov);
            l = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
        }
        set.particles.resize(n);
        for (auto& p : set.particles) {
            StateVec z(mean.size());
            for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = set.normal(set.rng);
            p.state = mean + l * z;
            p.prev_state = p.state;
            p.mean = p.state;
            p.cov = particle_cov;
            p.weight = 1.0 / double(n);
        }
        set.effective_sample_size = double(n);
        set.estimate = mean;
        return set;
    }
};

/// Kalman update of one particle followed by a draw from N(mean, cov).
template <int D, int M>
Particle<D> kalman_propose(const Particle<D>& p, const StateSpaceStep<D, M>& step,
                           const typename StateSpaceStep<D, M>::ObsVec& obs, Engine& rng,
                           std::normal_distribution<double>& normal)
{
    const auto mom = detail::proposal_moments(p.cov, step);
    Particle<D> out;
    out.prev_state = p.state;
    const typename Particle<D>::StateVec pred = step.transition * p.state;
    out.mean = pred + mom.gain * (obs - step.measurement * pred);
    out.cov = mom.cov;
    typename Particle<D>::StateVec z(pred.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
    out.state = out.mean + mom.chol * z;
    out.weight = p.weight;
    return out;
}

template <int D, int M>
Particle<D> kalman_propose(const Particle<D>& p, const StateSpaceStep<D, M>& step,
                           const typename StateSpaceStep<D, M>::ObsVec& obs, Engine& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    return kalman_propose(p, step, obs, rng, normal);
}

/// log of w_prev * N(x; H s, R_w) * N(s; A s_prev, R_u) / N(s; mean, cov).
template <int D, int M>
double log_importance_weight(const Particle<D>& p, const StateSpaceStep<D, M>& step,
                             const typename StateSpaceStep<D, M>::ObsVec& obs)
{
    const auto obs_llt = detail::checked_llt(step.observation_cov, "R_w");
    const auto proc_llt = detail::checked_llt(step.process_cov, "R_u");
    Eigen::LLT<typename Particle<D>::StateMat> q(p.cov);
    if (q.info() != Eigen::Success) throw NumericalError("importance_weight: proposal covariance is singular");
    const double lik = detail::log_gauss(obs_llt, (obs - step.measurement * p.state).eval());
    const double prior = detail::log_gauss(proc_llt, (p.state - step.transition * p.prev_state).eval());
    const double prop = detail::log_gauss(q, (p.state - p.mean).eval());
    return std::log(p.weight) + lik + prior - prop;
}

template <int D, int M>
double importance_weight(const Particle<D>& p, const StateSpaceStep<D, M>& step,
                         const typename StateSpaceStep<D, M>::ObsVec& obs)
{
    return std::exp(log_importance_weight(p, step, obs));
}

inline double effective_sample_size(const std::vector<double>& w)
{
    double s = 0.0;
    for (double v : w) s += v * v;
    return s > 0.0 ? 1.0 / s : 0.0;
}

/// Residual resampling: floor(N w_i) copies of particle i, the remaining
/// slots drawn from the normalised fractional parts. Output weights are 1/N.
template <int D>
ParticleSet<D> residual_resample(const ParticleSet<D>& set)
{
    ParticleSet<D> out = set;
    const std::size_t n = set.size();
    std::vector<std::size_t> pick;
    pick.reserve(n);
    std::vector<double> resid(n);
    double resid_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double nw = double(n) * set.particles[i].weight;
        const auto copies = static_cast<std::size_t>(std::floor(nw));
        for (std::size_t c = 0; c < copies && pick.size() < n; ++c) pick.push_back(i);
        resid[i] = std::max(nw - double(copies), 0.0);
        resid_sum += resid[i];
    }
    if (pick.size() < n) {
        std::vector<double> cdf(n);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += resid_sum > 0.0 ? resid[i] : 1.0;
            cdf[i] = acc;
        }
        std::uniform_real_distribution<double> uni(0.0, acc);
        while (pick.size() < n) {
            const double u = uni(out.rng);
            auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
            std::size_t idx = static_cast<std::size_t>(it - cdf.begin());
            if (idx >= n) idx = n - 1;
            // Skip zero-residual entries that upper_bound can land on at ties.
            while (resid_sum > 0.0 && resid[idx] == 0.0 && idx + 1 < n) ++idx;
            pick.push_back(idx);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        out.particles[i] = set.particles[pick[i]];
        out.particles[i].weight = 1.0 / double(n);
    }
    out.resampled = true;
    return out;
}

/// Weighted particle mean.
template <int D>
typename ParticleSet<D>::StateVec mmse_estimate(const ParticleSet<D>& set)
{
    typename ParticleSet<D>::StateVec m = set.particles.front().state * set.particles.front().weight;
    for (std::size_t i = 1; i < set.size(); ++i) m += set.particles[i].weight * set.particles[i].state;
    return m;
}

/// One filter step in place: propose every particle with its Kalman update,
/// weight, normalise, record ESS and the weighted mean, then resample when
/// ESS < threshold * N.
template <int D, int M>
void pf_step_inplace(ParticleSet<D>& set, const PreparedStep<D, M>& prepared,
                     const typename StateSpaceStep<D, M>::ObsVec& obs, double resample_threshold)
{
    const auto& step = prepared.step();
    const std::size_t n = set.size();
    if (n == 0) throw std::invalid_argument("pf_step: empty particle set");
    if (obs.size() != step.obs_dim()) throw std::invalid_argument("pf_step: observation dimension mismatch");

    std::vector<double> logw(n);
    detail::ProposalMoments<D, M> mom;
    const typename Particle<D>::StateMat* cached = nullptr;
    typename Particle<D>::StateMat cached_cov;
    const Eigen::Index d = step.state_dim();
    typename Particle<D>::StateVec z(d), pred(d);

    for (std::size_t i = 0; i < n; ++i) {
        Particle<D>& p = set.particles[i];
        // Particles that share an incoming covariance share the Kalman gain.
        if (cached == nullptr || !(p.cov.array() == cached_cov.array()).all()) {
            mom = detail::proposal_moments(p.cov, step);
            cached_cov = p.cov;
            cached = &cached_cov;
        }
        p.prev_state = p.state;
        pred.noalias() = step.transition * p.state;
        p.mean = pred + mom.gain * (obs - step.measurement * pred);
        p.cov = mom.cov;
        for (Eigen::Index k = 0; k < d; ++k) z[k] = set.normal(set.rng);
        p.state = p.mean + mom.chol * z;

        // log q(s) follows from the standard-normal draw directly.
        const double log_q = -0.5 * z.squaredNorm() - mom.half_log_det - 0.5 * double(d) * detail::kLog2Pi;
        const double lik = detail::log_gauss(prepared.obs_llt(), (obs - step.measurement * p.state).eval());
        const double prior = detail::log_gauss(prepared.proc_llt(), (p.state - pred).eval());
        logw[i] = std::log(p.weight) + lik + prior - log_q;
    }

    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logw)
        if (v > mx) mx = v;
    if (!std::isfinite(mx)) throw NumericalError("pf_step: filter divergence (all weights vanished)");
    double sum = 0.0;
    for (double& v : logw) {
        v = std::isnan(v) ? 0.0 : std::exp(v - mx);
        sum += v;
    }
    for (std::size_t i = 0; i < n; ++i) set.particles[i].weight = logw[i] / sum;
    for (double& v : logw) v /= sum;

    set.effective_sample_size = effective_sample_size(logw);
    set.estimate = mmse_estimate(set);
    set.resampled = false;
    if (set.effective_sample_size < resample_threshold * double(n)) set = residual_resample(set);
}

template <int D, int M>
ParticleSet<D> pf_step(ParticleSet<D> set, const StateSpaceStep<D, M>& step,
                       const typename StateSpaceStep<D, M>::ObsVec& obs, double resample_threshold = 0.5)
{
    const PreparedStep<D, M> prepared(step);
    pf_step_inplace(set, prepared, obs, resample_threshold);
    return set;
}

/// Exact Kalman filter over the same model, used as the reference trajectory.
template <int D = Eigen::Dynamic, int M = Eigen::Dynamic>
class KalmanFilter {
public:
    using StateVec = Eigen::Matrix<double, D, 1>;
    using StateMat = Eigen::Matrix<double, D, D>;

    KalmanFilter(StateVec mean, StateMat cov) : mean_(std::move(mean)), cov_(std::move(cov)) {}

    void step(const StateSpaceStep<D, M>& s, const typename StateSpaceStep<D, M>::ObsVec& obs)
    {
        const StateVec pm = s.transition * mean_;
        const StateMat pp = s.transition * cov_ * s.transition.transpose() + s.process_cov;
        const auto innov = (s.observation_cov + s.measurement * pp * s.measurement.transpose()).eval();
        Eigen::LLT<std::decay_t<decltype(innov)>> llt(innov);
        if (llt.info() != Eigen::Success) throw NumericalError("KalmanFilter: singular innovation covariance");
        const auto gain = llt.solve(s.measurement * pp).transpose().eval();
        mean_ = pm + gain * (obs - s.measurement * pm);
        cov_ = pp - gain * s.measurement * pp;
        cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
    }

    const StateVec& mean() const noexcept { return mean_; }
    const StateMat& cov() const noexcept { return cov_; }

private:
    StateVec mean_;
    StateMat cov_;
};

} // namespace pansharp::kpf
