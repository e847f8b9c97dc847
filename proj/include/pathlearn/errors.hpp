#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pathlearn {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error { using Error::Error; };
class CyclicMachine : public Error { using Error::Error; };
class ZeroTotalMass : public Error { using Error::Error; };
class NotStochastic : public Error { using Error::Error; };
class TooManyPaths : public Error { using Error::Error; };
class NotAccepting : public Error { using Error::Error; };
class GainExceedsCap : public Error { using Error::Error; };
class NoConvergence : public Error { using Error::Error; };
class NotInPolytope : public Error { using Error::Error; };
class ZeroFlow : public Error { using Error::Error; };
class MissingSize : public Error { using Error::Error; };
class RegimeMismatch : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace pathlearn
