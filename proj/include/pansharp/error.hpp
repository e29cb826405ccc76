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

#include <stdexcept>
#include <string>

namespace pansharp {

/// Failure reading or writing a raster file. `code()` tells the cases apart.
class IoError : public std::runtime_error {
public:
    enum class Code {
        open_failed,
        malformed_header,
        truncated_payload,
        invalid_sample,
        unsupported_format,
        write_failed,
    };

    IoError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}

    Code code() const noexcept { return code_; }

private:
    Code code_;
};

/// A numerical procedure could not produce a result (singular system,
/// filter divergence, degenerate statistics).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace pansharp
