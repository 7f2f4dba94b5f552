#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dxr {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input text; message carries line/field context.
class ParseError : public Error {
public:
    using Error::Error;
};

struct Violation {
    std::string node;  // offending node id, or "kb" for whole-model rules
    std::string rule;
    std::string detail;

    bool operator==(const Violation&) const = default;
};

class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<Violation> violations);
    const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
    std::vector<Violation> violations_;
};

// Findings that the model assigns probability zero.
class ZeroLikelihoodError : public Error {
public:
    using Error::Error;
};

// An exact method was asked to work past its configured size limit.
class CapExceededError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Threshold table computed for a different knowledge base.
class StaleThresholdsError : public Error {
public:
    using Error::Error;
};

}  // namespace dxr
