#pragma once

#include <stdexcept>
#include <string>

namespace tokinsight {

enum class ErrorCode {
    InvalidArgument = 1,
    ShapeMismatch,
    Io,
    BadMagic,
    Truncated,
    MalformedHeader,
    OverlappingRanges,
    DuplicateName,
    MissingKey,
    SchemaShape,
    UnsupportedFormat,
    DecodeFailure,
    InitialMisprediction,
    EmptyInput,
    Parse,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace tokinsight
