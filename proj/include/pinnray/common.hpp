#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace pinnray {

using Vec2 = Eigen::Vector2d;

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EvalError : Error {
  using Error::Error;
};
struct TapeError : Error {
  using Error::Error;
};
struct GeometryError : Error {
  using Error::Error;
};
struct MeshParseError : Error {
  using Error::Error;
};
struct FemError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

}  // namespace pinnray
