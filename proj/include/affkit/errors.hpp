#pragma once

#include <stdexcept>
#include <string>

namespace affkit {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Frame matrix with non-positive determinant or non-finite entries.
struct DegenerateFrame : Error {
  using Error::Error;
};

// Homography maps a point to infinity or behind the camera.
struct ReprojectionError : Error {
  using Error::Error;
};

// File could not be read or written.
struct IoError : Error {
  IoError(const std::string& path, const std::string& reason)
      : Error(path + ": " + reason), path(path), reason(reason) {}
  std::string path;
  std::string reason;
};

// Sampling frame lies entirely outside the image.
struct OutOfBounds : Error {
  using Error::Error;
};

// Descriptor kinds or lengths do not agree.
struct KindMismatch : Error {
  using Error::Error;
};

// Batch too small for in-batch negative mining or a ratio to exist.
struct BatchTooSmall : Error {
  using Error::Error;
};

// A documented precondition was violated by the caller.
struct PreconditionError : Error {
  using Error::Error;
};

// No features survived filtering; the experiment has nothing to run on.
struct EmptyExperiment : Error {
  using Error::Error;
};

}  // namespace affkit
