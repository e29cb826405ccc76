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

// pansharp command-line tool.
//
// Exit codes: 0 success, 1 usage or invalid configuration, 2 I/O failure,
// 3 numerical failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include "pansharp/config.hpp"
#include "pansharp/error.hpp"
#include "pansharp/fusion.hpp"
#include "pansharp/kpf.hpp"
#include "pansharp/metrics.hpp"
#include "pansharp/raster_io.hpp"
#include "pansharp/synthetic.hpp"
#include "pansharp/wavestats.hpp"

namespace fs = std::filesystem;
using namespace pansharp;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumerical = 3;

std::ofstream open_out(const fs::path& p)
{
    std::ofstream os(p, std::ios::binary);
    if (!os) throw IoError(IoError::Code::open_failed, "cannot open '" + p.string() + "' for writing");
    os.imbue(std::locale::classic());
    os << std::setprecision(17);
    return os;
}

void close_out(std::ofstream& os, const fs::path& p)
{
    os.close();
    if (!os) throw IoError(IoError::Code::write_failed, "failed writing '" + p.string() + "'");
}

// Every run echoes its resolved parameters as `key = value` lines.
void echo(const std::string& key, const auto& value) { std::cout << key << " = " << value << '\n'; }

// ---- fuse ------------------------------------------------------------------

struct FuseArgs {
    std::string pan, ms, out, config, diagnostics, dump_model, details_dir;
    std::optional<std::string> method, filter_bank, kernel, gamma, process_cov;
    std::optional<int> ratio, levels, particles;
    std::optional<double> resample_threshold, prior_inflation;
    std::optional<std::uint64_t> seed;
};

void write_diagnostics(const fs::path& path, const FusionResult& r, FusionMethod m)
{
    auto os = open_out(path);
    os << "method,level,training,extrapolated,mean_ess,resample_rate";
    const int k = r.fused.bands();
    for (int b = 0; b < k; ++b) os << ",pan_mix_b" << b + 1;
    for (int b = 0; b < k; ++b) os << ",hdms_mix_b" << b + 1;
    for (int b = 0; b < k; ++b) os << ",ar_b" << b + 1;
    os << '\n';
    if (r.model) {
        for (const auto& lm : r.model->levels) {
            const LevelDiagnostics* d = nullptr;
            for (const auto& x : r.levels)
                if (x.level == lm.level) d = &x;
            os << to_string(m) << ',' << lm.level << ',' << int(lm.training) << ',' << int(lm.extrapolated) << ','
               << (d ? d->mean_ess : 0.0) << ',' << (d ? d->resample_rate : 0.0);
            for (int b = 0; b < k; ++b) os << ',' << lm.measurement(0, b);
            for (int b = 0; b < k; ++b) os << ',' << lm.measurement(b + 1, b);
            for (int b = 0; b < k; ++b) os << ',' << lm.transition[b];
            os << '\n';
        }
    }
    close_out(os, path);
}

void write_kurtosis(const fs::path& path, const FusionResult& r)
{
    auto os = open_out(path);
    os << "level,row,kurtosis\n";
    for (const auto& kr : r.kurtosis)
        for (std::size_t i = 0; i < kr.values.size(); ++i) {
            os << kr.level << ',' << i << ',';
            if (std::isfinite(kr.values[i])) os << kr.values[i];
            os << '\n';
        }
    close_out(os, path);
}

int cmd_fuse(const FuseArgs& a)
{
    RunConfig rc;
    if (!a.config.empty()) {
        std::ifstream in(a.config);
        if (!in) throw IoError(IoError::Code::open_failed, "cannot open config '" + a.config + "'");
        read_config(in, rc);
    }
    if (a.method) set_config_value(rc, "method", *a.method);
    if (a.filter_bank) set_config_value(rc, "filter_bank", *a.filter_bank);
    if (a.kernel) set_config_value(rc, "kernel", *a.kernel);
    if (a.gamma) set_config_value(rc, "gamma", *a.gamma);
    if (a.process_cov) set_config_value(rc, "process_cov", *a.process_cov);
    if (a.ratio) rc.fusion.ratio = *a.ratio;
    if (a.levels) rc.fusion.levels = *a.levels;
    if (a.particles) rc.fusion.particles = *a.particles;
    if (a.resample_threshold) rc.fusion.resample_threshold = *a.resample_threshold;
    if (a.prior_inflation) rc.fusion.prior_inflation = *a.prior_inflation;
    if (a.seed) rc.fusion.seed = *a.seed;
    rc.fusion.validate();
    write_config(std::cout, rc);

    const auto pan = load_raster(a.pan);
    const auto lms = load_raster(a.ms);
    const auto res = fuse(rc.method, pan, lms, rc.fusion);
    save_raster(a.out, res.fused);

    const fs::path diag = a.diagnostics.empty() ? fs::path(a.out).replace_extension(".csv") : fs::path(a.diagnostics);
    write_diagnostics(diag, res, rc.method);
    if (rc.method == FusionMethod::wkpf) {
        fs::path kpath = diag;
        kpath.replace_filename(diag.stem().string() + "_kurtosis.csv");
        write_kurtosis(kpath, res);
    }
    if (!a.dump_model.empty()) {
        if (!res.model) throw std::invalid_argument("--dump-model needs method wkpf");
        auto os = open_out(a.dump_model);
        ssm::write_model(os, *res.model);
        close_out(os, a.dump_model);
    }
    if (!a.details_dir.empty()) {
        fs::create_directories(a.details_dir);
        for (std::size_t i = 0; i < res.details.size(); ++i)
            save_raster(fs::path(a.details_dir) / ("detail_" + std::to_string(i + 1) + ".pfras"), res.details[i]);
    }
    echo("output", a.out);
    echo("diagnostics", diag.string());
    if (rc.method == FusionMethod::wkpf) echo("diverged_sites", res.diverged_sites);
    return 0;
}

// ---- degrade ---------------------------------------------------------------

int cmd_degrade(const std::string& in, const std::string& out, int factor)
{
    echo("input", in);
    echo("factor", factor);
    save_raster(out, degrade(load_raster(in), ResamplingSpec{factor}));
    echo("output", out);
    return 0;
}

// ---- evaluate --------------------------------------------------------------

int cmd_evaluate(const std::string& fused_path, const std::string& ref_path, const std::string& pan_path,
                 const std::string& lms_path, int ratio, int window, const std::string& out)
{
    if (pan_path.empty() != lms_path.empty()) throw std::invalid_argument("QNR needs both --pan and --lms");
    echo("fused", fused_path);
    echo("ref", ref_path);
    echo("ratio", ratio);
    echo("window", window);
    const auto fused = load_raster(fused_path);
    const auto ref = load_raster(ref_path);
    auto q = metrics::evaluate(fused, ref, ratio, window);
    if (!pan_path.empty()) q.qnr = metrics::qnr(fused, load_raster(lms_path), load_raster(pan_path), window);

    std::ostringstream row;
    row << metrics::csv_header(q) << '\n' << metrics::csv_row(q) << '\n';
    if (!out.empty()) {
        auto os = open_out(out);
        os << row.str();
        close_out(os, out);
    }
    std::printf("%10s %10s %10s %10s %10s\n", "CC", "ERGAS", "UIQI", "Q4", "SAM");
    std::printf("%10.4f %10.4f %10.4f ", q.cc_mean, q.ergas, q.uiqi_mean);
    if (q.q4)
        std::printf("%10.4f ", *q.q4);
    else
        std::printf("%10s ", "-");
    std::printf("%10.4f\n", q.sam_deg);
    if (q.qnr) std::printf("QNR %.4f (D_lambda %.4f, D_s %.4f)\n", q.qnr->qnr, q.qnr->d_lambda, q.qnr->d_s);
    return 0;
}

// ---- analyze-stats ---------------------------------------------------------

int cmd_analyze(const std::string& in, int depth, int level, const std::string& bank_name, int restarts,
                const std::string& out, const std::string& profile)
{
    const FilterBankKind kind = parse_filter_bank(bank_name);
    if (depth < 1 || level < 1) throw std::invalid_argument("depth and level must be >= 1");
    echo("input", in);
    echo("depth", depth);
    echo("level", level);
    echo("filter_bank", to_string(kind));
    echo("restarts", restarts);
    const auto img = load_raster(in);
    const FilterBank bank{kind};
    const auto pyr = decompose(img.band_plane(0), level + depth, bank);
    const auto lin = wavestats::lineage_from_pyramid(pyr, bank, depth, level);
    wavestats::StatisticOptions opt;
    opt.restarts = restarts;
    const auto curve = wavestats::markov_order_curve(lin, depth, opt);

    auto os = open_out(out);
    os << "depth,mi";
    for (int i = 1; i <= depth; ++i) os << ",a" << i;
    os << '\n';
    for (std::size_t d = 0; d < curve.size(); ++d) {
        os << d + 1 << ',' << curve[d].mi;
        for (int i = 0; i < depth; ++i) {
            os << ',';
            if (std::size_t(i) < curve[d].weights.size()) os << curve[d].weights[i];
        }
        os << '\n';
    }
    close_out(os, out);

    if (!profile.empty()) {
        auto ps = open_out(profile);
        ps << "px,mean_x\n";
        for (const auto& b : wavestats::conditional_expectation_profile(lin.x, lin.predecessors[0]))
            if (b.mean) ps << b.center << ',' << *b.mean << '\n';
        close_out(ps, profile);
    }
    for (std::size_t d = 0; d < curve.size(); ++d) std::printf("depth %zu  I = %.6f nats\n", d + 1, curve[d].mi);
    return 0;
}

// ---- simulate-kpf ----------------------------------------------------------

struct SimArgs {
    int steps = 50;
    int particles = 1000;
    std::uint64_t seed = 1;
    double a = 0.9, h = 1.0, ru = 1.0, rw = 1.0, threshold = 0.5;
    std::string out;
};

int cmd_simulate(const SimArgs& s)
{
    if (s.steps < 1 || s.particles < 1) throw std::invalid_argument("steps and particles must be >= 1");
    if (!(s.ru > 0.0) || !(s.rw > 0.0)) throw std::invalid_argument("noise variances must be > 0");
    echo("steps", s.steps);
    echo("particles", s.particles);
    echo("seed", s.seed);
    echo("a", s.a);
    echo("h", s.h);
    echo("ru", s.ru);
    echo("rw", s.rw);
    echo("resample_threshold", s.threshold);

    kpf::StateSpaceStep<1, 1> step;
    step.transition << s.a;
    step.measurement << s.h;
    step.process_cov << s.ru;
    step.observation_cov << s.rw;
    const kpf::PreparedStep<1, 1> prepared(step);

    kpf::Engine truth_rng(kpf::derive_seed(s.seed, 0));
    std::normal_distribution<double> n01(0.0, 1.0);
    Eigen::Matrix<double, 1, 1> mean0, cov0;
    mean0 << 0.0;
    cov0 << 1.0;
    auto set = kpf::ParticleSet<1>::from_gaussian(std::size_t(s.particles), mean0, cov0, cov0, kpf::derive_seed(s.seed, 1));
    kpf::KalmanFilter<1, 1> kf(mean0, cov0);

    auto os = open_out(s.out);
    os << "step,true_state,observation,kalman_mean,pf_mean,ess,running_rms\n";
    double x = std::sqrt(cov0(0, 0)) * n01(truth_rng);
    double sq = 0.0;
    for (int k = 1; k <= s.steps; ++k) {
        x = s.a * x + std::sqrt(s.ru) * n01(truth_rng);
        Eigen::Matrix<double, 1, 1> obs;
        obs << s.h * x + std::sqrt(s.rw) * n01(truth_rng);
        kf.step(step, obs);
        kpf::pf_step_inplace(set, prepared, obs, s.threshold);
        const double d = set.estimate[0] - kf.mean()[0];
        sq += d * d;
        os << k << ',' << x << ',' << obs[0] << ',' << kf.mean()[0] << ',' << set.estimate[0] << ','
           << set.effective_sample_size << ',' << std::sqrt(sq / k) << '\n';
    }
    close_out(os, s.out);
    std::printf("rms(pf - kalman) = %.6f, kalman posterior sd = %.6f\n", std::sqrt(sq / s.steps),
                std::sqrt(kf.cov()(0, 0)));
    return 0;
}

// ---- make-synthetic --------------------------------------------------------

int cmd_make_synthetic(const SyntheticSpec& sp, const std::string& dir)
{
    echo("width", sp.width);
    echo("height", sp.height);
    echo("bands", sp.bands);
    echo("ratio", sp.ratio);
    echo("seed", sp.seed);
    echo("pan_noise", sp.pan_noise);
    const auto scene = make_synthetic_scene(sp);
    fs::create_directories(dir);
    save_raster(fs::path(dir) / "reference.pfras", scene.reference);
    save_raster(fs::path(dir) / "pan.pfras", scene.pan);
    save_raster(fs::path(dir) / "lms.pfras", scene.lms);
    echo("output_dir", dir);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"pansharp: wavelet Kalman particle filter pansharpening"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);
    std::function<int()> run;

    FuseArgs fa;
    auto* fuse_cmd = app.add_subcommand("fuse", "Fuse a PAN image with a low-resolution multispectral image");
    fuse_cmd->add_option("--pan", fa.pan, "PAN raster")->required();
    fuse_cmd->add_option("--ms", fa.ms, "Low-resolution multispectral raster")->required();
    fuse_cmd->add_option("--out", fa.out, "Output raster")->required();
    fuse_cmd->add_option("--config", fa.config, "key = value configuration file");
    fuse_cmd->add_option("--method", fa.method, "wkpf, aw, ihs, pca, hpm or upsample");
    fuse_cmd->add_option("--ratio", fa.ratio);
    fuse_cmd->add_option("--levels", fa.levels);
    fuse_cmd->add_option("--particles", fa.particles);
    fuse_cmd->add_option("--gamma", fa.gamma, "Penalty weight or 'auto'");
    fuse_cmd->add_option("--seed", fa.seed);
    fuse_cmd->add_option("--resample-threshold", fa.resample_threshold);
    fuse_cmd->add_option("--prior-inflation", fa.prior_inflation);
    fuse_cmd->add_option("--filter-bank", fa.filter_bank, "b3 or bior97");
    fuse_cmd->add_option("--kernel", fa.kernel, "nearest, bilinear or bicubic");
    fuse_cmd->add_option("--process-cov", fa.process_cov, "full or diagonal");
    fuse_cmd->add_option("--diagnostics", fa.diagnostics, "Diagnostics CSV (default: output path with .csv)");
    fuse_cmd->add_option("--dump-model", fa.dump_model, "Write the fitted scale-state model");
    fuse_cmd->add_option("--details-dir", fa.details_dir, "Write per-level detail rasters here");
    fuse_cmd->callback([&] { run = [&] { return cmd_fuse(fa); }; });

    std::string dg_in, dg_out;
    int dg_factor = 4;
    auto* dg = app.add_subcommand("degrade", "Anti-aliased decimation by an integer factor");
    dg->add_option("--in", dg_in)->required();
    dg->add_option("--out", dg_out)->required();
    dg->add_option("--factor", dg_factor)->capture_default_str();
    dg->callback([&] { run = [&] { return cmd_degrade(dg_in, dg_out, dg_factor); }; });

    std::string ev_fused, ev_ref, ev_pan, ev_lms, ev_out;
    int ev_ratio = 4, ev_window = 8;
    auto* ev = app.add_subcommand("evaluate", "Quality indices of a fused image against a reference");
    ev->add_option("--fused", ev_fused)->required();
    ev->add_option("--ref", ev_ref)->required();
    ev->add_option("--pan", ev_pan, "PAN for QNR");
    ev->add_option("--lms", ev_lms, "LMS for QNR");
    ev->add_option("--ratio", ev_ratio)->capture_default_str();
    ev->add_option("--window", ev_window)->capture_default_str();
    ev->add_option("--out", ev_out, "CSV output");
    ev->callback([&] { run = [&] { return cmd_evaluate(ev_fused, ev_ref, ev_pan, ev_lms, ev_ratio, ev_window, ev_out); }; });

    std::string as_in, as_out, as_profile, as_bank = "b3";
    int as_depth = 5, as_level = 1, as_restarts = 3;
    auto* as = app.add_subcommand("analyze-stats", "Mutual information of a coefficient and its predecessors");
    as->add_option("--in", as_in)->required();
    as->add_option("--out", as_out)->required();
    as->add_option("--profile", as_profile, "Conditional expectation CSV");
    as->add_option("--depth", as_depth)->capture_default_str();
    as->add_option("--level", as_level)->capture_default_str();
    as->add_option("--filter-bank", as_bank)->capture_default_str();
    as->add_option("--restarts", as_restarts)->capture_default_str();
    as->callback([&] { run = [&] { return cmd_analyze(as_in, as_depth, as_level, as_bank, as_restarts, as_out, as_profile); }; });

    SimArgs sa;
    auto* sim = app.add_subcommand("simulate-kpf", "Particle filter against the exact Kalman filter on a scalar model");
    sim->add_option("--out", sa.out)->required();
    sim->add_option("--steps", sa.steps)->capture_default_str();
    sim->add_option("--particles", sa.particles)->capture_default_str();
    sim->add_option("--seed", sa.seed)->capture_default_str();
    sim->add_option("--transition", sa.a, "AR coefficient a")->capture_default_str();
    sim->add_option("--gain", sa.h, "Measurement gain h")->capture_default_str();
    sim->add_option("--ru", sa.ru)->capture_default_str();
    sim->add_option("--rw", sa.rw)->capture_default_str();
    sim->add_option("--resample-threshold", sa.threshold)->capture_default_str();
    sim->callback([&] { run = [&] { return cmd_simulate(sa); }; });

    SyntheticSpec sp;
    std::string ms_dir;
    auto* ms = app.add_subcommand("make-synthetic", "Generate a synthetic PAN / LMS / reference scene");
    ms->add_option("--out-dir", ms_dir)->required();
    ms->add_option("--width", sp.width)->capture_default_str();
    ms->add_option("--height", sp.height)->capture_default_str();
    ms->add_option("--bands", sp.bands)->capture_default_str();
    ms->add_option("--ratio", sp.ratio)->capture_default_str();
    ms->add_option("--seed", sp.seed)->capture_default_str();
    ms->add_option("--pan-noise", sp.pan_noise)->capture_default_str();
    ms->callback([&] { run = [&] { return cmd_make_synthetic(sp, ms_dir); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        return run();
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}
