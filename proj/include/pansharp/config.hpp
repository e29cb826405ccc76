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

// Run configuration: plain-text `key = value` lines, '#' starts a comment.

#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "pansharp/fusion.hpp"

namespace pansharp {

struct RunConfig {
    FusionMethod method = FusionMethod::wkpf;
    FusionConfig fusion;
};

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text)
{
    T v{};
    const char* first = text.data();
    const char* last = first + text.size();
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last) throw std::invalid_argument("config: bad value for '" + key + "': '" + text + "'");
    return v;
}

inline ResamplingKernel parse_kernel(const std::string& s)
{
    if (s == "nearest") return ResamplingKernel::nearest;
    if (s == "bilinear") return ResamplingKernel::bilinear;
    if (s == "bicubic") return ResamplingKernel::bicubic;
    throw std::invalid_argument("unknown resampling kernel '" + s + "'");
}

inline std::string to_string(ResamplingKernel k)
{
    switch (k) {
    case ResamplingKernel::nearest: return "nearest";
    case ResamplingKernel::bilinear: return "bilinear";
    case ResamplingKernel::bicubic: return "bicubic";
    }
    return "?";
}

} // namespace detail

/// Applies one setting. Unknown keys and malformed values throw std::invalid_argument.
inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value)
{
    using detail::parse_number;
    auto& f = c.fusion;
    if (key == "method")
        c.method = parse_fusion_method(value);
    else if (key == "ratio")
        f.ratio = parse_number<int>(key, value);
    else if (key == "levels")
        f.levels = parse_number<int>(key, value);
    else if (key == "particles")
        f.particles = parse_number<int>(key, value);
    else if (key == "resample_threshold")
        f.resample_threshold = parse_number<double>(key, value);
    else if (key == "gamma") {
        if (value == "auto")
            f.gamma.reset();
        else
            f.gamma = parse_number<double>(key, value);
    } else if (key == "seed")
        f.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "filter_bank")
        f.filter_bank = parse_filter_bank(value);
    else if (key == "kernel")
        f.kernel = detail::parse_kernel(value);
    else if (key == "prior_inflation")
        f.prior_inflation = parse_number<double>(key, value);
    else if (key == "process_cov") {
        if (value != "full" && value != "diagonal")
            throw std::invalid_argument("config: process_cov must be 'full' or 'diagonal'");
        f.full_process_cov = value == "full";
    } else
        throw std::invalid_argument("config: unknown key '" + key + "'");
}

/// Reads `key = value` lines into `c`, leaving unset keys alone.
inline void read_config(std::istream& in, RunConfig& c)
{
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("config line " + std::to_string(n) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::invalid_argument("config line " + std::to_string(n) + ": empty key or value");
        set_config_value(c, key, value);
    }
}

inline RunConfig parse_config(const std::string& text)
{
    RunConfig c;
    std::istringstream is(text);
    read_config(is, c);
    return c;
}

/// The resolved configuration, one `key = value` per line, readable by read_config.
inline void write_config(std::ostream& os, const RunConfig& c)
{
    const auto& f = c.fusion;
    const auto old_precision = os.precision(17);
    os << "method = " << to_string(c.method) << '\n'
       << "ratio = " << f.ratio << '\n'
       << "levels = " << f.resolved_levels() << '\n'
       << "particles = " << f.particles << '\n'
       << "resample_threshold = " << f.resample_threshold << '\n'
       << "gamma = ";
    if (f.gamma)
        os << *f.gamma;
    else
        os << "auto";
    os << '\n'
       << "seed = " << f.seed << '\n'
       << "filter_bank = " << to_string(f.filter_bank) << '\n'
       << "kernel = " << detail::to_string(f.kernel) << '\n'
       << "prior_inflation = " << f.prior_inflation << '\n'
       << "process_cov = " << (f.full_process_cov ? "full" : "diagonal") << '\n';
    os.precision(old_precision);
}

} // namespace pansharp
