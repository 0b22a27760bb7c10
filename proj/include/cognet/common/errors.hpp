#pragma once

#include <stdexcept>
#include <string>

namespace cognet {

// Bad shapes, out-of-range flags, malformed user input. CLI exit code 2.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Filesystem failures (missing files, unwritable directories). CLI exit code 2.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Unparseable documents (annotation JSON, checkpoints). CLI exit code 2.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite values during training or inference. CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, std::string last_good = {})
        : std::runtime_error(what), last_good_checkpoint(std::move(last_good)) {}

    std::string last_good_checkpoint;
};

}  // namespace cognet
