#pragma once

#include <stdexcept>
#include <string>

namespace segpipe {

// Bad values: config fields out of range, shape mismatches, invariant
// violations. Maps to CLI exit code 1.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Missing/unreadable/unwritable files and malformed on-disk content.
// Maps to CLI exit code 2.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class NpyErrc {
    bad_magic,
    bad_version,
    bad_header,
    unsupported_dtype,
    fortran_order,
    unsupported_rank,
    shape_length_mismatch,
    io,
};

struct NpyError : IoError {
    NpyError(NpyErrc c, const std::string& msg) : IoError(msg), code_(c) {}
    NpyErrc code() const { return code_; }

  private:
    NpyErrc code_;
};

} // namespace segpipe
