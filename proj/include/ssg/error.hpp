#pragma once

#include <stdexcept>
#include <string>

namespace ssg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class IndexError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class StructuralError : public Error { using Error::Error; };
class EngineError : public Error { using Error::Error; };
class DegenerateError : public Error { using Error::Error; };
class KindError : public Error { using Error::Error; };

/// Raised when a run is refused up-front because it would exhaust memory.
class RefusedError : public Error { using Error::Error; };

}  // namespace ssg
