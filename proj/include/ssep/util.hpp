// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef SSEP_UTIL_HPP
#define SSEP_UTIL_HPP

#include <stdexcept>
#include <string>

namespace ssep {

// Data or I/O problem (unreadable file, malformed CSV, layout mismatch).
// The CLI maps this to exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure (NaN loss and the like). CLI exit code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ssep

#endif
