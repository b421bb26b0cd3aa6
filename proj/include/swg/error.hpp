#pragma once

#include <stdexcept>
#include <string>

namespace swg {

// Caller passed something outside an operation's domain (empty vector,
// length mismatch, bad flag value).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Decoding would run past ModelConfig::max_seq.
class SequenceTooLong : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A file did not match its documented layout. `field()` names the offending
// header field or tensor.
class FormatError : public std::runtime_error {
public:
    FormatError(std::string field, const std::string & what)
        : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

    const std::string & field() const { return field_; }

private:
    std::string field_;
};

// Covariance not positive definite after projection.
class DegenerateInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace swg
