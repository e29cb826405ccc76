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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "pansharp/raster_io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "pansharp_cli_tests";

int run(const std::string& args)
{
    const std::string cmd = std::string(PANSHARP_CLI) + " " + args + " > " + (kWork / "stdout.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p)
{
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(cell);
        rows.push_back(row);
    }
    return rows;
}

std::string w(const std::string& name) { return (kWork / name).string(); }

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite()
    {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
        ASSERT_EQ(run("make-synthetic --out-dir " + w("scene") + " --width 64 --height 64 --seed 3"), 0);
    }
};

} // namespace

TEST_F(Cli, MakeSyntheticWritesScene)
{
    const auto lms = pansharp::load_raster(kWork / "scene" / "lms.pfras");
    EXPECT_EQ(lms.width(), 16);
    EXPECT_EQ(lms.bands(), 4);
    EXPECT_EQ(pansharp::load_raster(kWork / "scene" / "pan.pfras").bands(), 1);
}

TEST_F(Cli, UsageErrors)
{
    EXPECT_EQ(run(""), 1);
    EXPECT_EQ(run("fuse --ms a --out b"), 1);
    EXPECT_EQ(run("frobnicate"), 1);
    EXPECT_EQ(run("fuse --pan " + w("scene/pan.pfras") + " --ms " + w("scene/lms.pfras") + " --out " + w("x.pfras") +
                  " --particles 0"),
              1);
    EXPECT_EQ(run("fuse --pan " + w("scene/pan.pfras") + " --ms " + w("scene/lms.pfras") + " --out " + w("x.pfras") +
                  " --method brovey"),
              1);
}

TEST_F(Cli, MissingInputIsIoError)
{
    EXPECT_EQ(run("fuse --pan " + w("nope.pgm") + " --ms " + w("scene/lms.pfras") + " --out " + w("x.pfras")), 2);
    EXPECT_EQ(run("degrade --in " + w("nope.pgm") + " --out " + w("x.pgm")), 2);
}

TEST_F(Cli, FuseEchoesConfigAndIsReproducible)
{
    std::ofstream(kWork / "run.cfg") << "particles = 30\nseed = 5\n";
    const std::string base = "fuse --pan " + w("scene/pan.pfras") + " --ms " + w("scene/lms.pfras") + " --config " +
                             w("run.cfg") + " --seed 6 --dump-model " + w("model.txt");
    ASSERT_EQ(run(base + " --out " + w("a.pfras")), 0);
    const std::string echoed = slurp(kWork / "stdout.txt");
    EXPECT_NE(echoed.find("particles = 30"), std::string::npos);
    EXPECT_NE(echoed.find("seed = 6"), std::string::npos);
    EXPECT_NE(echoed.find("gamma = auto"), std::string::npos);
    ASSERT_EQ(run(base + " --out " + w("b.pfras")), 0);
    EXPECT_EQ(slurp(kWork / "a.pfras"), slurp(kWork / "b.pfras"));
    EXPECT_EQ(slurp(kWork / "a.csv"), slurp(kWork / "b.csv"));
    EXPECT_EQ(slurp(kWork / "a_kurtosis.csv"), slurp(kWork / "b_kurtosis.csv"));
    EXPECT_TRUE(fs::exists(kWork / "model.txt"));

    const auto diag = read_csv(kWork / "a.csv");
    ASSERT_EQ(diag.size(), 5u);
    EXPECT_EQ(diag[0][0], "method");
    EXPECT_EQ(diag[1].size(), diag[0].size());
    EXPECT_EQ(pansharp::load_raster(kWork / "a.pfras").width(), 64);
}

TEST_F(Cli, BaselineMethodsRun)
{
    for (const std::string m : {"aw", "pca", "hpm", "upsample"}) {
        EXPECT_EQ(run("fuse --method " + m + " --pan " + w("scene/pan.pfras") + " --ms " + w("scene/lms.pfras") +
                      " --out " + w(m + ".pfras")),
                  0)
            << m;
        EXPECT_FALSE(fs::exists(kWork / (m + "_kurtosis.csv")));
    }
    // IHS is defined for three bands only.
    EXPECT_EQ(run("fuse --method ihs --pan " + w("scene/pan.pfras") + " --ms " + w("scene/lms.pfras") + " --out " +
                  w("ihs.pfras")),
              1);
}

TEST_F(Cli, EvaluateAgainstItself)
{
    ASSERT_EQ(run("evaluate --fused " + w("scene/reference.pfras") + " --ref " + w("scene/reference.pfras") +
                  " --out " + w("eval.csv")),
              0);
    const auto rows = read_csv(kWork / "eval.csv");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0][0], "cc");
    EXPECT_EQ(rows[1][0], "1");
    EXPECT_EQ(rows[1][1], "0");
    EXPECT_EQ(rows[1][4], "0");
    EXPECT_EQ(run("evaluate --fused " + w("scene/reference.pfras") + " --ref " + w("scene/lms.pfras")), 1);
}

TEST_F(Cli, AnalyzeStatsCurve)
{
    ASSERT_EQ(run("analyze-stats --in " + std::string(PANSHARP_TEST_DATA) + "/camera.pgm --depth 3 --restarts 1 --out " +
                  w("mi.csv") + " --profile " + w("profile.csv")),
              0);
    const auto rows = read_csv(kWork / "mi.csv");
    ASSERT_EQ(rows.size(), 4u);
    double prev = -1.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double mi = std::stod(rows[i][1]);
        EXPECT_GE(mi, prev);
        prev = mi;
    }
    EXPECT_GT(read_csv(kWork / "profile.csv").size(), 3u);
}

TEST_F(Cli, SimulateKpfStaysNearKalman)
{
    ASSERT_EQ(run("simulate-kpf --steps 50 --particles 1000 --out " + w("sim.csv")), 0);
    const auto rows = read_csv(kWork / "sim.csv");
    ASSERT_EQ(rows.size(), 51u);
    EXPECT_EQ(rows[0].back(), "running_rms");
    EXPECT_LT(std::stod(rows.back().back()), 0.05 * 0.772);
}

TEST_F(Cli, DegradeShrinksByFactor)
{
    ASSERT_EQ(run("degrade --in " + w("scene/reference.pfras") + " --out " + w("small.pfras") + " --factor 2"), 0);
    const auto r = pansharp::load_raster(kWork / "small.pfras");
    EXPECT_EQ(r.width(), 32);
    EXPECT_EQ(r.bands(), 4);
    EXPECT_EQ(run("degrade --in " + w("scene/reference.pfras") + " --out " + w("bad.pfras") + " --factor 0"), 1);
}
