#pragma once

#include <stdexcept>
#include <string>

namespace mtd {

// Error taxonomy shared across the library and the CLI. The CLI maps these
// onto process exit codes: usage -> 1, data/io/parse/checkpoint/shape -> 2,
// numeric failures -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct CheckpointError : Error {
    using Error::Error;
};

struct UsageError : Error {
    using Error::Error;
};

}  // namespace mtd
