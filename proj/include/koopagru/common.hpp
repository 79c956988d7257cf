#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace koopagru {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Eigen::Index;

inline constexpr const char* kVersion = "0.3.0";

// Error hierarchy. Every failure the library reports derives from Error so
// callers can map categories onto exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : Error { using Error::Error; };
struct DatasetDimensionError : Error { using Error::Error; };
struct DataQualityError : Error { using Error::Error; };
struct WindowingError : Error { using Error::Error; };
struct UnstableSystemError : Error { using Error::Error; };
struct SpecError : Error { using Error::Error; };
struct SpectralError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct NumericalError : Error { using Error::Error; };
struct TrainError : Error { using Error::Error; };
struct CalibrationError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace koopagru
