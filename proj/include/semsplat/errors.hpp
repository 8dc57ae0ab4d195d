#pragma once

#include <stdexcept>
#include <string>

namespace semsplat {

// Filesystem-level failure: missing file, unwritable path, truncated stream.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or out-of-contract file content (bad magic, missing property,
// non-finite record, out-of-range label value).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape mismatch or violated call contract between in-memory objects.
class DimensionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace semsplat
