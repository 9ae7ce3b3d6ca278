#pragma once

#include <stdexcept>
#include <string>

namespace slimdet {

// Broad failure classes. The C API and the CLI exit codes map onto these.
enum class ErrorKind {
    parse,      // malformed cfg text, unknown layer kinds, bad references
    weights,    // weight file size/header mismatches, misaligned stores
    io,         // missing files, undecodable images
    invalid,    // contract violations: bad arguments, inconsistent masks
    runtime,    // divergence, shape conflicts during execution
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace slimdet
