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
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "pansharp/atwt.hpp"
#include "pansharp/error.hpp"
#include "pansharp/ssm.hpp"
#include "test_util.hpp"

using namespace pansharp;
using namespace pansharp::ssm;

namespace {

std::vector<double> gaussian(std::size_t n, std::mt19937_64& rng, double sd = 1.0)
{
    std::normal_distribution<double> g(0.0, sd);
    std::vector<double> v(n);
    for (double& x : v) x = g(rng);
    return v;
}

// sequences[k][s]: stationary AR(1) walk over `levels` steps at `sites` sites.
std::vector<std::vector<double>> ar1_walk(double a, double noise_sd, int levels, std::size_t sites, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<std::vector<double>> seq(levels, std::vector<double>(sites));
    for (std::size_t s = 0; s < sites; ++s) {
        seq[0][s] = g(rng) * noise_sd / std::sqrt(1.0 - a * a);
        for (int k = 1; k < levels; ++k) seq[k][s] = a * seq[k - 1][s] + noise_sd * g(rng);
    }
    return seq;
}

TrainingLevel level_from(std::vector<std::vector<double>> dm, std::vector<double> dp,
                         std::vector<std::vector<double>> dh)
{
    TrainingLevel t;
    t.level = 3;
    t.dm = std::move(dm);
    t.dp = std::move(dp);
    t.dhdms = std::move(dh);
    return t;
}

} // namespace

TEST(FitAr1, WhiteNoiseHasNoMemory)
{
    const auto seq = ar1_walk(0.0, 1.0, 2, 10000, 1);
    EXPECT_LT(std::abs(fit_ar1(seq).a), 0.05);
}

TEST(FitAr1, RecoversSyntheticProcess)
{
    const auto seq = ar1_walk(0.8, 1.0, 2, 10000, 2);
    const auto f = fit_ar1(seq);
    EXPECT_NEAR(f.a, 0.8, 0.05);
    EXPECT_NEAR(f.noise_var, 1.0, 0.1);
}

TEST(FitAr1, NoiselessRatioIsExact)
{
    std::mt19937_64 rng(3);
    std::vector<std::vector<double>> seq{gaussian(500, rng)};
    for (int k = 1; k < 4; ++k) {
        seq.push_back(seq.back());
        for (double& v : seq.back()) v *= 0.5;
    }
    const auto f = fit_ar1(seq);
    EXPECT_NEAR(f.a, 0.5, 1e-9);
    EXPECT_NEAR(f.noise_var, 0.0, 1e-20);
}

TEST(FitAr1, ClampsAndRejects)
{
    std::mt19937_64 rng(4);
    std::vector<std::vector<double>> seq{gaussian(100, rng)};
    seq.push_back(seq.back());
    for (double& v : seq.back()) v *= 3.0;
    EXPECT_EQ(fit_ar1(seq).a, 0.999);
    EXPECT_THROW(fit_ar1({std::vector<double>(10, 1.0)}), std::invalid_argument);
    EXPECT_THROW(fit_ar1({std::vector<double>(10, 0.0), std::vector<double>(10, 1.0)}), NumericalError);
}

TEST(FitPanMixing, ExactTwoBandFit)
{
    std::mt19937_64 rng(5);
    const std::vector<std::vector<double>> dm{gaussian(2000, rng), gaussian(2000, rng)};
    std::vector<double> dp(2000);
    for (std::size_t s = 0; s < dp.size(); ++s) dp[s] = dm[0][s] + 2.0 * dm[1][s];
    const auto f = fit_pan_mixing(dm, dp, 1e3);
    EXPECT_NEAR(f.coeffs[0], 1.0, 1e-6);
    EXPECT_NEAR(f.coeffs[1], 2.0, 1e-6);
    EXPECT_FALSE(f.rank_deficient);
}

TEST(FitPanMixing, SingleBandIdentity)
{
    std::mt19937_64 rng(6);
    const std::vector<std::vector<double>> dm{gaussian(100, rng)};
    const auto f = fit_pan_mixing(dm, dm[0], 0.0);
    EXPECT_NEAR(f.coeffs[0], 1.0, 1e-12);
}

TEST(FitPanMixing, PenaltyPushesTowardZero)
{
    std::mt19937_64 rng(7);
    const std::vector<std::vector<double>> dm{gaussian(500, rng)};
    std::vector<double> dp(dm[0]);
    for (double& v : dp) v = -v;
    double prev = -1.0;
    for (double gamma : {1e2, 1e4, 1e6, 1e8}) {
        const auto f = fit_pan_mixing(dm, dp, gamma);
        EXPECT_LT(f.coeffs[0], 0.0);
        EXPECT_GT(f.coeffs[0], prev);
        prev = f.coeffs[0];
        EXPECT_NEAR(f.objective, test::grid_minimum(dm, dp, gamma, {-0.5}, 1.0), 1e-6);
        EXPECT_NEAR(f.objective, test::mixing_objective(dm, dp, f.coeffs, gamma), 1e-9 * f.objective);
    }
    EXPECT_GT(prev, -1e-4);
}

TEST(FitPanMixing, MatchesUnconstrainedSolutionWhenNonNegative)
{
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t k = 2 + trial % 3;
        std::vector<std::vector<double>> dm;
        std::vector<double> truth;
        for (std::size_t j = 0; j < k; ++j) {
            dm.push_back(gaussian(400, rng));
            truth.push_back(u(rng));
        }
        std::vector<double> dp(400, 0.0);
        for (std::size_t s = 0; s < dp.size(); ++s)
            for (std::size_t j = 0; j < k; ++j) dp[s] += truth[j] * dm[j][s];
        const auto f = fit_pan_mixing(dm, dp, 10.0);
        for (std::size_t j = 0; j < k; ++j) EXPECT_NEAR(f.coeffs[j], truth[j], 1e-6);
    }
}

TEST(FitPanMixing, PenalisedInstancesMatchGridOracle)
{
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<std::vector<double>> dm{gaussian(200, rng), gaussian(200, rng)};
        for (std::size_t s = 0; s < 200; ++s) dm[1][s] += 0.5 * dm[0][s];
        std::vector<double> dp(200);
        const auto noise = gaussian(200, rng, 0.3);
        for (std::size_t s = 0; s < dp.size(); ++s) dp[s] = 0.8 * dm[0][s] - 0.6 * dm[1][s] + noise[s];
        const double gamma = 50.0 * (trial + 1);
        const auto f = fit_pan_mixing(dm, dp, gamma);
        EXPECT_LT(std::min(f.coeffs[0], f.coeffs[1]), 0.0);
        EXPECT_NEAR(f.objective, test::grid_minimum(dm, dp, gamma, {0.0, 0.0}, 3.0), 1e-6);
    }
}

TEST(FitPanMixing, MinCoefficientNonDecreasingInGamma)
{
    std::mt19937_64 rng(10);
    const std::vector<std::vector<double>> dm{gaussian(300, rng), gaussian(300, rng), gaussian(300, rng)};
    std::vector<double> dp(300);
    for (std::size_t s = 0; s < dp.size(); ++s) dp[s] = 1.0 * dm[0][s] - 0.7 * dm[1][s] - 0.2 * dm[2][s];
    double prev = -std::numeric_limits<double>::infinity();
    for (double gamma : {0.0, 1.0, 10.0, 100.0, 1e3, 1e4, 1e5}) {
        const auto f = fit_pan_mixing(dm, dp, gamma);
        const double m = *std::min_element(f.coeffs.begin(), f.coeffs.end());
        EXPECT_GE(m, prev - 1e-12);
        prev = m;
    }
}

TEST(FitPanMixing, RankDeficientIsFlagged)
{
    std::mt19937_64 rng(11);
    const auto d = gaussian(100, rng);
    const std::vector<std::vector<double>> dm{d, d};
    const auto f = fit_pan_mixing(dm, d, 0.0);
    EXPECT_TRUE(f.rank_deficient);
    EXPECT_NEAR(f.coeffs[0], 0.5, 1e-9);
    EXPECT_NEAR(f.coeffs[1], 0.5, 1e-9);
}

TEST(FitHdmsMixing, Examples)
{
    std::mt19937_64 rng(12);
    const auto dm = gaussian(1000, rng);
    std::vector<double> half(dm);
    for (double& v : half) v *= 0.5;
    EXPECT_NEAR(fit_hdms_mixing(dm, half, 1e3).coeffs[0], 0.5, 1e-9);

    const std::vector<double> x = {1, -1, 1, -1}, y = {1, 1, -1, -1};
    EXPECT_EQ(fit_hdms_mixing(x, y, 1e3).coeffs[0], 0.0);

    std::vector<double> neg(dm);
    const auto noise = gaussian(neg.size(), rng);
    for (std::size_t s = 0; s < neg.size(); ++s) neg[s] = -0.7 * dm[s] + noise[s];
    const auto f = fit_hdms_mixing(dm, neg, 1e3);
    const auto grid = test::grid_minimum({dm}, neg, 1e3, {-0.5}, 1.0);
    EXPECT_NEAR(f.objective, grid, 1e-6);
    double best_a = 0.0, best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 1000000; ++i) {
        const double a = -1.0 + i * 1e-6;
        if (const double v = test::mixing_objective({dm}, neg, {a}, 1e3); v < best) {
            best = v;
            best_a = a;
        }
        if (a > 0) break;
    }
    EXPECT_NEAR(f.coeffs[0], best_a, 1e-6);
}

TEST(Extrapolate, AffineThroughTwoPoints)
{
    const std::vector<int> lv{4, 3}, targets{2, 1};
    const auto e = extrapolate_mixing(lv, std::vector<double>{0.4, 0.6}, targets);
    EXPECT_NEAR(e.values[0], 0.8, 1e-12);
    EXPECT_NEAR(e.values[1], 1.0, 1e-12);
    EXPECT_FALSE(e.constant);
}

TEST(Extrapolate, ConstantStaysConstant)
{
    const std::vector<int> lv{5, 4, 3}, targets{2, 1};
    const auto e = extrapolate_mixing(lv, std::vector<double>{0.3, 0.3, 0.3}, targets);
    EXPECT_NEAR(e.values[0], 0.3, 1e-12);
    EXPECT_NEAR(e.values[1], 0.3, 1e-12);
}

TEST(Extrapolate, ClampsAtZero)
{
    const std::vector<int> lv{4, 3}, targets{2, 1};
    const auto e = extrapolate_mixing(lv, std::vector<double>{1.0, 0.4}, targets);
    EXPECT_EQ(e.values[0], 0.0);
    EXPECT_EQ(e.values[1], 0.0);
}

TEST(Extrapolate, ExactOnAffineData)
{
    const std::vector<int> lv{6, 5, 4, 3}, targets{2, 1};
    std::vector<double> v;
    for (int l : lv) v.push_back(0.1 + 0.05 * (7 - l));
    const auto e = extrapolate_mixing(lv, v, targets);
    EXPECT_NEAR(e.values[0], 0.35, 1e-12);
    EXPECT_NEAR(e.values[1], 0.4, 1e-12);
}

TEST(Extrapolate, SingleLevelIsFlagged)
{
    const std::vector<int> lv{3}, targets{2, 1};
    const auto e = extrapolate_mixing(lv, std::vector<double>{0.7}, targets);
    EXPECT_TRUE(e.constant);
    EXPECT_EQ(e.values, (std::vector<double>{0.7, 0.7}));
}

TEST(MeasurementMatrix, Layout)
{
    const std::vector<double> pan{0.2, 0.3}, hd{0.9, 0.8};
    const auto h = measurement_matrix(pan, hd);
    ASSERT_EQ(h.rows(), 3);
    ASSERT_EQ(h.cols(), 2);
    EXPECT_EQ(h(0, 1), 0.3);
    EXPECT_EQ(h(1, 0), 0.9);
    EXPECT_EQ(h(1, 1), 0.0);
    EXPECT_EQ(h(2, 1), 0.8);
}

TEST(ObservationNoise, ZeroResidual)
{
    std::mt19937_64 rng(13);
    const auto m1 = gaussian(100, rng), m2 = gaussian(100, rng);
    std::vector<double> dp(100), h1(100), h2(100);
    for (std::size_t s = 0; s < 100; ++s) {
        dp[s] = 0.4 * m1[s] + 0.6 * m2[s];
        h1[s] = 0.5 * m1[s];
        h2[s] = 0.9 * m2[s];
    }
    const auto t = level_from({m1, m2}, dp, {h1, h2});
    const auto rw = fit_observation_noise(t, measurement_matrix(std::vector<double>{0.4, 0.6}, std::vector<double>{0.5, 0.9}));
    EXPECT_LT(rw.cwiseAbs().maxCoeff(), 1e-24);
}

TEST(ObservationNoise, IidResidualsGiveIdentity)
{
    std::mt19937_64 rng(14);
    const std::size_t n = 100000;
    const auto m = gaussian(n, rng);
    const auto dp = gaussian(n, rng), dh = gaussian(n, rng);
    const auto t = level_from({m}, dp, {dh});
    const auto rw = fit_observation_noise(t, Eigen::MatrixXd::Zero(2, 1));
    EXPECT_LT((rw - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff(), 0.03);
    EXPECT_LT((rw - rw.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(rw).eigenvalues().minCoeff(), 0.0);
}

TEST(ObservationNoise, CorrelatedResiduals)
{
    std::mt19937_64 rng(15);
    const std::size_t n = 20000;
    const auto m = gaussian(n, rng), e = gaussian(n, rng);
    std::vector<double> dp(n), dh(n);
    for (std::size_t s = 0; s < n; ++s) {
        dp[s] = 2.0 * e[s];
        dh[s] = 0.5 * e[s];
    }
    const auto rw = fit_observation_noise(level_from({m}, dp, {dh}), Eigen::MatrixXd::Zero(2, 1));
    EXPECT_NEAR(rw(0, 1), std::sqrt(rw(0, 0) * rw(1, 1)), 0.02 * std::sqrt(rw(0, 0) * rw(1, 1)));
}

TEST(ObservationNoise, TooFewSites)
{
    const auto t = level_from({{1, 2}, {3, 4}}, {1, 2}, {{1, 2}, {3, 4}});
    EXPECT_THROW(fit_observation_noise(t, Eigen::MatrixXd::Zero(3, 2)), NumericalError);
}

TEST(Kurtosis, GaussianLaplaceConstant)
{
    std::mt19937_64 rng(16);
    EXPECT_NEAR(kurtosis(gaussian(100000, rng)), 3.0, 0.1);
    std::exponential_distribution<double> ex;
    std::bernoulli_distribution coin;
    std::vector<double> lap(100000);
    for (double& v : lap) v = coin(rng) ? ex(rng) : -ex(rng);
    EXPECT_NEAR(kurtosis(lap), 6.0, 0.5);
    EXPECT_TRUE(std::isnan(kurtosis(std::vector<double>(50, 2.0))));
}

TEST(Kurtosis, ResidualReportFlagsDegenerate)
{
    std::mt19937_64 rng(17);
    const auto m = gaussian(1000, rng), dp = gaussian(1000, rng);
    std::vector<double> dh(m);
    const auto t = level_from({m}, dp, {dh});
    const auto r = residual_kurtosis(t, measurement_matrix(std::vector<double>{0.0}, std::vector<double>{1.0}));
    ASSERT_EQ(r.values.size(), 2u);
    EXPECT_NEAR(r.values[0], 3.0, 0.5);
    EXPECT_TRUE(std::isnan(r.values[1]));
    EXPECT_TRUE(r.degenerate);
    EXPECT_EQ(r.level, 3);
}

TEST(TrainingTensor, GathersInteriorSites)
{
    const auto ms = decompose(test::random_raster(32, 32, 2, 1), 3);
    const auto hd = decompose(test::random_raster(32, 32, 2, 2), 3);
    const auto pan = decompose(test::random_plane(32, 32, 3), 3);
    const std::vector<int> levels{3, 2};
    const auto t = make_training_tensor(ms, pan, hd, levels, 4);
    ASSERT_EQ(t.levels.size(), 2u);
    EXPECT_EQ(t.levels[0].level, 3);
    EXPECT_EQ(t.levels[0].sites(), 24u * 24u);
    EXPECT_EQ(t.levels[1].bands(), 2);
    EXPECT_EQ(t.levels[1].dm[1][0], ms[1].detail(2).at(4, 4));
    EXPECT_EQ(t.levels[0].dp.back(), pan.detail(3).at(27, 27));
    EXPECT_THROW(make_training_tensor(ms, pan, hd, levels, 16), std::invalid_argument);
}

TEST(ScaleStateModel, WriteReadRoundTrip)
{
    ScaleStateModel m;
    m.bands = 2;
    std::mt19937_64 rng(18);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int lv : {4, 3, 2, 1}) {
        LevelModel l;
        l.level = lv;
        l.training = lv > 2;
        l.extrapolated = !l.training;
        l.transition = Eigen::Vector2d(u(rng) * 0.9, u(rng) * 0.9);
        l.measurement = measurement_matrix(std::vector<double>{u(rng), u(rng)}, std::vector<double>{u(rng), u(rng)});
        Eigen::Matrix2d a = Eigen::Matrix2d::Random();
        l.process_cov = a * a.transpose();
        Eigen::Matrix3d b = Eigen::Matrix3d::Random();
        l.observation_cov = b * b.transpose() + Eigen::Matrix3d::Identity() / 3.0;
        m.levels.push_back(l);
    }
    EXPECT_NO_THROW(m.validate());
    std::stringstream ss;
    write_model(ss, m);
    const auto back = read_model(ss);
    ASSERT_EQ(back.levels.size(), m.levels.size());
    for (std::size_t i = 0; i < m.levels.size(); ++i) {
        EXPECT_EQ(back.levels[i].level, m.levels[i].level);
        EXPECT_EQ(back.levels[i].training, m.levels[i].training);
        EXPECT_EQ(back.levels[i].transition, m.levels[i].transition);
        EXPECT_EQ(back.levels[i].measurement, m.levels[i].measurement);
        EXPECT_EQ(back.levels[i].process_cov, m.levels[i].process_cov);
        EXPECT_EQ(back.levels[i].observation_cov, m.levels[i].observation_cov);
    }
    EXPECT_EQ(back.at_level(2).extrapolated, true);
    EXPECT_THROW(back.at_level(7), std::out_of_range);
}

TEST(ScaleStateModel, ValidateRejectsUnstableOrNegative)
{
    ScaleStateModel m;
    m.bands = 1;
    LevelModel l;
    l.level = 1;
    l.transition = Eigen::VectorXd::Constant(1, 1.0);
    l.measurement = measurement_matrix(std::vector<double>{0.5}, std::vector<double>{0.5});
    l.process_cov = Eigen::MatrixXd::Identity(1, 1);
    l.observation_cov = Eigen::MatrixXd::Identity(2, 2);
    m.levels.push_back(l);
    EXPECT_THROW(m.validate(), std::invalid_argument);
    m.levels[0].transition[0] = 0.5;
    EXPECT_NO_THROW(m.validate());
    m.levels[0].measurement(0, 0) = -0.1;
    EXPECT_THROW(m.validate(), std::invalid_argument);
}
