#pragma once

#include <stdexcept>
#include <string>

namespace tilin {

/// Malformed model or input file. The message carries the file/field context.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes that do not chain. `layer_index` is -1 when no layer is involved.
class DimensionError : public std::runtime_error {
 public:
  DimensionError(const std::string& what, int layer_index = -1)
      : std::runtime_error(layer_index >= 0
                               ? "layer " + std::to_string(layer_index) + ": " + what
                               : what),
        layer_index_(layer_index) {}

  int layer_index() const { return layer_index_; }

 private:
  int layer_index_;
};

}  // namespace tilin
