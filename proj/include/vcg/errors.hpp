#pragma once

#include <stdexcept>
#include <string>

namespace vcg {

// Bad input data: malformed files, inconsistent records, unknown ids.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Command-line misuse (missing config, bad flag values).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Network / external-service failure (judge endpoint unreachable, bad status).
struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Judge response did not contain any known category token.
struct UnparseableVerdict : std::runtime_error {
    explicit UnparseableVerdict(std::string raw_response)
        : std::runtime_error("unparseable judge verdict: " + raw_response),
          raw(std::move(raw_response)) {}
    UnparseableVerdict(std::string raw_response, const std::string& message)
        : std::runtime_error(message), raw(std::move(raw_response)) {}
    std::string raw;
};

}  // namespace vcg
