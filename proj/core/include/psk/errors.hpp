#pragma once

#include <stdexcept>
#include <string>

namespace psk {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A coefficient expression is not evaluable/analytic at the requested point
/// (zero denominator, negative radicand, nonpositive diffusion, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid truncation/derivative order.
class OrderError : public Error {
public:
    using Error::Error;
};

/// Series index outside the triangular index set.
class IndexError : public Error {
public:
    using Error::Error;
};

/// Binary series operation on series with different expansion points.
class CenterMismatch : public Error {
public:
    using Error::Error;
};

/// Division by a series with vanishing constant term.
class DivisionByZeroSeries : public Error {
public:
    using Error::Error;
};

/// Incompatible block/vector shapes during assembly.
class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// Square system whose factorization failed and whose least-squares
/// residual exceeds the tolerance.
class SingularSystem : public Error {
public:
    using Error::Error;
};

/// Invalid example parameters (e.g. transport speeds out of order).
class ParamError : public Error {
public:
    using Error::Error;
};

/// Malformed problem/sweep document; `path()` points at the offending field.
class SchemaError : public Error {
public:
    SchemaError(const std::string& path, const std::string& what)
        : Error(what + " (at " + path + ")"), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

} // namespace psk
