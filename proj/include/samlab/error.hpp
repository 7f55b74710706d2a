#pragma once

#include <stdexcept>
#include <string>

namespace samlab {

// Base of every error the library throws. Callers that only care about
// "something in samlab failed" catch this one.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes do not fit the op. Message names the op and both shapes.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A forward or backward value became NaN/Inf, or external input was not finite.
class NumericError : public Error {
public:
    using Error::Error;
};

// API called out of order, e.g. backward() before a loss was recorded.
class UsageError : public Error {
public:
    using Error::Error;
};

// Two flat vectors were combined with different segment maps.
class SegmentMismatch : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Input file problems. what() always carries "path:line: ".
class ParseError : public Error {
public:
    using Error::Error;
};

// Cosine of a zero vector.
class UndefinedSimilarity : public Error {
public:
    using Error::Error;
};

} // namespace samlab
