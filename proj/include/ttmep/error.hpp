#pragma once

#include <stdexcept>
#include <string>

namespace ttmep {

/// Inconsistent dimensions, ranks or indices.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Invalid user input (parameters, file contents).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation could not produce a trustworthy result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A dense fallback or enumeration would exceed its configured size cap.
class CapExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_shape(bool ok, const std::string& what) {
    if (!ok) throw ShapeError(what);
}

inline void require_valid(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}

} // namespace detail
} // namespace ttmep
