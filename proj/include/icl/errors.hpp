#pragma once

#include <stdexcept>
#include <string>

namespace icl {

// Base error for everything the library throws.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad input data or configuration: malformed records, unknown labels,
// invalid config files, missing paths. The CLI maps these to exit code 1.
struct ValidationError : Error {
    using Error::Error;
};

// Failures at run time: transport errors after retries, unusable backend
// responses, unreadable artifacts mid-run. The CLI maps these to exit code 2.
struct BackendError : Error {
    using Error::Error;
};

}  // namespace icl
