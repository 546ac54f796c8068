// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace egrpo {

enum class ErrorCode {
    FormatError,
    EmptyEntitySet,
    InvalidVerdict,
    ShapeMismatch,
    EmptyBatch,
    NonFiniteGradient,
    UnknownEntity,
    NotExpandable,
    NoUniqueAnswer,
    Unsolvable,
    Ambiguous,
    BadRequest,
    Io,
    InvalidArgument,
};

/// Stable machine-readable name, used by the CLI and the reward service.
std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace egrpo
