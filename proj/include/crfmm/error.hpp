#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace crfmm {

// Malformed or inconsistent user input (files, flags, configs).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Network geometry or topology that violates a structural invariant.
class NetworkError : public InputError {
 public:
  using InputError::InputError;
};

// An observation has no road segment within the candidate cutoff.
class OffMapError : public InputError {
 public:
  OffMapError(std::size_t point_index, double distance)
      : InputError("point " + std::to_string(point_index) +
                   " is off the map (nearest segment " +
                   std::to_string(distance) + " m away)"),
        point_index_(point_index) {}

  std::size_t point_index() const noexcept { return point_index_; }

 private:
  std::size_t point_index_;
};

}  // namespace crfmm
