// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace scd {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raster or tensor dimensions disagree.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// Invalid configuration value or argument range.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A cutout would not fit inside the target image.
class PlacementError : public Error {
public:
  using Error::Error;
};

/// A required file is missing, truncated or unreadable.
class LoadError : public Error {
public:
  using Error::Error;
};

/// A file parsed but its content violates the expected format.
class FormatError : public Error {
public:
  using Error::Error;
};

/// Writing to disk failed.
class IoError : public Error {
public:
  using Error::Error;
};

/// A file was written by an incompatible format version.
class VersionError : public Error {
public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class NumericalError : public Error {
public:
  NumericalError(const std::string& what, long iteration, std::vector<std::size_t> batch)
      : Error(what), iteration_(iteration), batch_(std::move(batch)) {}

  long iteration() const noexcept { return iteration_; }
  const std::vector<std::size_t>& batch_indices() const noexcept { return batch_; }

private:
  long iteration_;
  std::vector<std::size_t> batch_;
};

} // namespace scd
