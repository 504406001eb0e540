#include "tokinsight/error.hpp"

namespace tokinsight {

const char* error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid argument";
        case ErrorCode::ShapeMismatch: return "shape mismatch";
        case ErrorCode::Io: return "i/o error";
        case ErrorCode::BadMagic: return "bad magic";
        case ErrorCode::Truncated: return "truncated";
        case ErrorCode::MalformedHeader: return "malformed header";
        case ErrorCode::OverlappingRanges: return "overlapping ranges";
        case ErrorCode::DuplicateName: return "duplicate name";
        case ErrorCode::MissingKey: return "missing key";
        case ErrorCode::SchemaShape: return "schema shape mismatch";
        case ErrorCode::UnsupportedFormat: return "unsupported format";
        case ErrorCode::DecodeFailure: return "decode failure";
        case ErrorCode::InitialMisprediction: return "initial misprediction";
        case ErrorCode::EmptyInput: return "empty input";
        case ErrorCode::Parse: return "parse error";
    }
    return "unknown error";
}

}  // namespace tokinsight
