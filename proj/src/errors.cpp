// SPDX-License-Identifier: Apache-2.0
#include "egrpo/errors.hpp"

namespace egrpo {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::FormatError: return "format_error";
        case ErrorCode::EmptyEntitySet: return "empty_entity_set";
        case ErrorCode::InvalidVerdict: return "invalid_verdict";
        case ErrorCode::ShapeMismatch: return "shape_mismatch";
        case ErrorCode::EmptyBatch: return "empty_batch";
        case ErrorCode::NonFiniteGradient: return "non_finite_gradient";
        case ErrorCode::UnknownEntity: return "unknown_entity";
        case ErrorCode::NotExpandable: return "not_expandable";
        case ErrorCode::NoUniqueAnswer: return "no_unique_answer";
        case ErrorCode::Unsolvable: return "unsolvable";
        case ErrorCode::Ambiguous: return "ambiguous";
        case ErrorCode::BadRequest: return "bad_request";
        case ErrorCode::Io: return "io_error";
        case ErrorCode::InvalidArgument: return "invalid_argument";
    }
    return "unknown";
}

}  // namespace egrpo
