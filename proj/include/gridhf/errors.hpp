#pragma once
#include <stdexcept>
#include <string>

namespace gridhf {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidGridError : Error { using Error::Error; };
struct InfeasibleGridError : Error { using Error::Error; };
struct UnachievableAccuracyError : Error { using Error::Error; };
struct SingularSpectrumError : Error { using Error::Error; };
struct UnsupportedBasisError : Error { using Error::Error; };
struct StagnationError : Error { using Error::Error; };
struct DimensionError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

} // namespace gridhf
