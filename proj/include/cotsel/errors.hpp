#pragma once

#include <stdexcept>
#include <string>

namespace cotsel {

// Machine-readable failure categories. Every Error carries exactly one.
enum class ErrorCode {
    parse_error,
    invariant_violation,
    kind_mismatch,
    empty_corpus,
    missing_caption,
    transport_exhausted,
    malformed_response,
    auth_failure,
    unknown_sample,
    unparseable_reply,
    evolution_stalled,
    pool_exhausted,
    missing_complexity,
    wrong_count,
    mixed_samples,
    duplicate_sample,
    unordered_groups,
    corruption,
    storage_failure,
    precondition,
    usage,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

} // namespace cotsel
