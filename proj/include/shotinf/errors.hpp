#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace shotinf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

/// A value or gradient became NaN or infinite.
class NonFinite : public Error {
public:
    using Error::Error;
};

class AllMasked : public Error {
public:
    using Error::Error;
};

class DecreasingTimestamps : public Error {
public:
    using Error::Error;
};

/// AUC requested on labels that contain only one class.
class SingleClass : public Error {
public:
    using Error::Error;
};

class TooFewMatches : public Error {
public:
    using Error::Error;
};

class InvalidConfig : public Error {
public:
    using Error::Error;
};

/// Raised by the BLSR readers. `row` is the 1-based line number in the
/// input text (the CSV header is line 1), `field` the offending column/key.
class ParseError : public Error {
public:
    enum class Kind {
        UnknownShotType,
        UnknownEndReason,
        AreaOutOfRange,
        MissingField,
        DuplicateShotIndex,
        InvalidValue,
        InconsistentRally,
    };

    ParseError(Kind kind, std::size_t row, std::string field, const std::string& detail)
        : Error(describe(kind, row, field, detail)), kind_(kind), row_(row), field_(std::move(field)) {}

    Kind kind() const noexcept { return kind_; }
    std::size_t row() const noexcept { return row_; }
    const std::string& field() const noexcept { return field_; }

    static const char* kind_name(Kind k) noexcept {
        switch (k) {
        case Kind::UnknownShotType: return "UnknownShotType";
        case Kind::UnknownEndReason: return "UnknownEndReason";
        case Kind::AreaOutOfRange: return "AreaOutOfRange";
        case Kind::MissingField: return "MissingField";
        case Kind::DuplicateShotIndex: return "DuplicateShotIndex";
        case Kind::InvalidValue: return "InvalidValue";
        case Kind::InconsistentRally: return "InconsistentRally";
        }
        return "ParseError";
    }

private:
    static std::string describe(Kind k, std::size_t row, const std::string& field, const std::string& detail) {
        std::string msg = std::string(kind_name(k)) + " at row " + std::to_string(row) + ", field '" + field + "'";
        if (!detail.empty()) msg += ": " + detail;
        return msg;
    }

    Kind kind_;
    std::size_t row_;
    std::string field_;
};

} // namespace shotinf
