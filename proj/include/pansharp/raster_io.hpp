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

// Raster file formats.
//
//   PFRAS  "PFRAS <width> <height> <bands>\n" followed by width*height*bands
//          32-bit little-endian IEEE floats, band-sequential, rows top-down.
//   PGM    Netpbm P5, one band, maxval <= 65535 (16-bit samples big-endian).
//   PPM    Netpbm P6, three bands interleaved per pixel.

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pansharp/error.hpp"
#include "pansharp/raster.hpp"

namespace pansharp {

enum class RasterFormat { pfras, pgm, ppm };

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoError::Code::open_failed, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Cursor over the ASCII header of a binary image file.
class HeaderReader {
public:
    explicit HeaderReader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

    // Netpbm allows '#' comments anywhere in the header whitespace.
    void skip_space_and_comments()
    {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::string token()
    {
        std::string t;
        while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) t.push_back(static_cast<char>(bytes_[pos_++]));
        return t;
    }

    long positive_int(const char* what)
    {
        skip_space_and_comments();
        const std::string t = token();
        if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
            throw IoError(IoError::Code::malformed_header, std::string("bad ") + what + " in header");
        if (t.size() > 9) throw IoError(IoError::Code::malformed_header, std::string(what) + " too large");
        const long v = std::stol(t);
        if (v <= 0) throw IoError(IoError::Code::malformed_header, std::string(what) + " must be positive");
        return v;
    }

    /// Exactly one whitespace byte ends a binary header.
    void single_whitespace()
    {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
            throw IoError(IoError::Code::malformed_header, "header not terminated by whitespace");
        ++pos_;
    }

    std::size_t position() const noexcept { return pos_; }

private:
    std::span<const unsigned char> bytes_;
    std::size_t pos_ = 0;
};

inline float load_f32_le(const unsigned char* p) noexcept
{
    std::uint32_t u = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
                      (std::uint32_t(p[3]) << 24);
    return std::bit_cast<float>(u);
}

inline void store_f32_le(unsigned char* p, float f) noexcept
{
    const auto u = std::bit_cast<std::uint32_t>(f);
    p[0] = static_cast<unsigned char>(u);
    p[1] = static_cast<unsigned char>(u >> 8);
    p[2] = static_cast<unsigned char>(u >> 16);
    p[3] = static_cast<unsigned char>(u >> 24);
}

inline MultiBandRaster parse_pfras(std::span<const unsigned char> bytes)
{
    HeaderReader h(bytes);
    if (h.token() != "PFRAS") throw IoError(IoError::Code::unsupported_format, "missing PFRAS magic");
    const long w = h.positive_int("width");
    const long ht = h.positive_int("height");
    const long b = h.positive_int("bands");
    if (h.position() >= bytes.size() || bytes[h.position()] != '\n')
        throw IoError(IoError::Code::malformed_header, "PFRAS header must end with a newline");
    h.single_whitespace();

    const std::size_t count = static_cast<std::size_t>(w) * ht * b;
    const std::size_t payload = bytes.size() - h.position();
    if (payload < count * 4)
        throw IoError(IoError::Code::truncated_payload, "PFRAS payload holds " + std::to_string(payload / 4) +
                                                            " floats, header declares " + std::to_string(count));
    if (payload > count * 4) throw IoError(IoError::Code::malformed_header, "PFRAS payload longer than declared");

    std::vector<double> s(count);
    const unsigned char* p = bytes.data() + h.position();
    for (std::size_t i = 0; i < count; ++i) {
        const float f = load_f32_le(p + 4 * i);
        if (!std::isfinite(f)) throw IoError(IoError::Code::invalid_sample, "PFRAS payload holds a non-finite sample");
        s[i] = f;
    }
    return {static_cast<int>(w), static_cast<int>(ht), static_cast<int>(b), std::move(s)};
}

inline MultiBandRaster parse_netpbm(std::span<const unsigned char> bytes, int channels)
{
    HeaderReader h(bytes);
    h.token(); // magic already checked
    const long w = h.positive_int("width");
    const long ht = h.positive_int("height");
    const long maxval = h.positive_int("maxval");
    if (maxval > 65535) throw IoError(IoError::Code::malformed_header, "maxval above 65535");
    h.single_whitespace();

    const std::size_t bps = maxval < 256 ? 1 : 2;
    const std::size_t pixels = static_cast<std::size_t>(w) * ht;
    const std::size_t need = pixels * channels * bps;
    if (bytes.size() - h.position() < need) throw IoError(IoError::Code::truncated_payload, "Netpbm payload truncated");

    const std::size_t plane = pixels;
    std::vector<double> s(plane * channels);
    const unsigned char* p = bytes.data() + h.position();
    for (std::size_t i = 0; i < pixels; ++i) {
        for (int c = 0; c < channels; ++c) {
            const std::size_t k = (i * channels + c) * bps;
            const unsigned v = bps == 1 ? p[k] : (unsigned(p[k]) << 8) | p[k + 1];
            s[plane * c + i] = static_cast<double>(v);
        }
    }
    return {static_cast<int>(w), static_cast<int>(ht), channels, std::move(s)};
}

} // namespace detail

/// Reads a PFRAS, PGM (P5) or PPM (P6) file, detected from its magic bytes.
inline MultiBandRaster load_raster(const std::filesystem::path& path)
{
    const auto bytes = detail::read_file_bytes(path);
    const std::string_view head(reinterpret_cast<const char*>(bytes.data()), std::min<std::size_t>(bytes.size(), 6));
    if (head.starts_with("PFRAS")) return detail::parse_pfras(bytes);
    if (head.starts_with("P5")) return detail::parse_netpbm(bytes, 1);
    if (head.starts_with("P6")) return detail::parse_netpbm(bytes, 3);
    throw IoError(IoError::Code::unsupported_format, "unrecognised raster format: " + path.string());
}

inline std::vector<unsigned char> encode_pfras(const MultiBandRaster& r)
{
    const std::string header =
        "PFRAS " + std::to_string(r.width()) + " " + std::to_string(r.height()) + " " + std::to_string(r.bands()) + "\n";
    std::vector<unsigned char> out(header.begin(), header.end());
    const std::size_t off = out.size();
    out.resize(off + r.samples().size() * 4);
    for (std::size_t i = 0; i < r.samples().size(); ++i)
        detail::store_f32_le(out.data() + off + 4 * i, static_cast<float>(r.samples()[i]));
    return out;
}

/// Netpbm export: samples are rounded and clamped to [0, maxval].
inline std::vector<unsigned char> encode_netpbm(const MultiBandRaster& r, int maxval)
{
    if (r.bands() != 1 && r.bands() != 3)
        throw IoError(IoError::Code::unsupported_format, "Netpbm export needs 1 or 3 bands");
    if (maxval < 1 || maxval > 65535) throw IoError(IoError::Code::unsupported_format, "maxval out of range");
    const std::string header = std::string(r.bands() == 1 ? "P5" : "P6") + "\n" + std::to_string(r.width()) + " " +
                               std::to_string(r.height()) + "\n" + std::to_string(maxval) + "\n";
    std::vector<unsigned char> out(header.begin(), header.end());
    const std::size_t bps = maxval < 256 ? 1 : 2;
    const std::size_t pixels = r.band_size();
    for (std::size_t i = 0; i < pixels; ++i)
        for (int c = 0; c < r.bands(); ++c) {
            const double v = std::clamp(std::round(r.samples()[pixels * c + i]), 0.0, double(maxval));
            const auto u = static_cast<unsigned>(v);
            if (bps == 2) out.push_back(static_cast<unsigned char>(u >> 8));
            out.push_back(static_cast<unsigned char>(u & 0xFF));
        }
    return out;
}

inline RasterFormat format_for_path(const std::filesystem::path& path)
{
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".pgm") return RasterFormat::pgm;
    if (ext == ".ppm") return RasterFormat::ppm;
    return RasterFormat::pfras;
}

/// Writes PFRAS unless the extension is .pgm/.ppm. Netpbm output uses
/// `maxval` (255 or 65535 are the usual choices).
inline void save_raster(const std::filesystem::path& path, const MultiBandRaster& r, int maxval = 255)
{
    const RasterFormat fmt = format_for_path(path);
    const auto bytes = fmt == RasterFormat::pfras ? encode_pfras(r) : encode_netpbm(r, maxval);
    if (fmt == RasterFormat::ppm && r.bands() != 3)
        throw IoError(IoError::Code::unsupported_format, "PPM needs exactly 3 bands");
    if (fmt == RasterFormat::pgm && r.bands() != 1)
        throw IoError(IoError::Code::unsupported_format, "PGM needs exactly 1 band");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoError::Code::write_failed, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(IoError::Code::write_failed, "write failed: " + path.string());
}

} // namespace pansharp
