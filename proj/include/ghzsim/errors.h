// Copyright 2026 The ghzsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GHZSIM_ERRORS_H
#define GHZSIM_ERRORS_H

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ghzsim {

/// Caller passed an argument outside an operation's domain.
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A persisted file (time tags, counts CSV) could not be decoded.
struct FormatError : std::runtime_error {
    FormatError(const std::string &msg, uint64_t offset)
        : std::runtime_error(msg + " (at offset " + std::to_string(offset) + ")"), offset(offset) {
    }
    uint64_t offset;
};

/// Experiment configuration rejected during parsing or validation.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An iterative or linear-algebra routine could not produce a result.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ghzsim

#endif
