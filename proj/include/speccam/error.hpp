#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace speccam {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Container sizes that must agree do not.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A point lands at or behind the image plane.
class BehindCameraError : public std::runtime_error {
 public:
  BehindCameraError(std::size_t point_index, double depth, long frame = -1)
      : std::runtime_error(make_message(point_index, depth, frame)),
        point_index_(point_index),
        frame_(frame),
        depth_(depth) {}

  std::size_t point_index() const { return point_index_; }
  long frame() const { return frame_; }
  double depth() const { return depth_; }

 private:
  static std::string make_message(std::size_t index, double depth, long frame) {
    std::string msg = "point " + std::to_string(index);
    if (frame >= 0) msg += " of frame " + std::to_string(frame);
    return msg + " is behind the camera (z=" + std::to_string(depth) + ")";
  }

  std::size_t point_index_;
  long frame_;
  double depth_;
};

/// Geometrically degenerate input, e.g. coincident points for alignment.
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed external input (JSON schema violations and the like).
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace speccam
