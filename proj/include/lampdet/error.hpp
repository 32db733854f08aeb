#ifndef LAMPDET_ERROR_HPP
#define LAMPDET_ERROR_HPP

#include <stdexcept>
#include <string>

namespace lampdet
{

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error
{
public:
    using Error::Error;
};

/// Rotation angle too close to pi for a unique logarithm.
class AmbiguousRotation : public Error
{
public:
    using Error::Error;
};

/// A point projected with non-positive depth.
class BehindCamera : public Error
{
public:
    using Error::Error;
};

class ParseError : public Error
{
public:
    ParseError(const std::string& what, long line = -1)
        : Error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what), line_(line)
    {}
    long line() const noexcept { return line_; }

private:
    long line_;
};

class NotFound : public Error
{
public:
    using Error::Error;
};

class InsufficientData : public Error
{
public:
    using Error::Error;
};

/// Camera ray parallel to the projection plane.
class ParallelRay : public Error
{
public:
    using Error::Error;
};

class ConfigError : public Error
{
public:
    using Error::Error;
};

} // namespace lampdet

#endif // LAMPDET_ERROR_HPP
