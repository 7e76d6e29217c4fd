#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "tilin/activation.hpp"
#include "tilin/errors.hpp"

namespace tilin {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Row-major tensor as read from input files. Flattened to a Vector before
/// it reaches a network.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  /// Throws DimensionError on a shape/size mismatch and ParseError on NaN/Inf.
  void validate() const;
  Vector flat() const;
};

struct Affine {
  Matrix weight;  // [n_out x n_in]
  Vector bias;    // [n_out]
};

/// 2-D convolution over a CHW input. Kernel layout is OIHW, row-major.
struct Conv2D {
  std::size_t in_channels = 0;
  std::size_t in_height = 0;
  std::size_t in_width = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_height = 0;
  std::size_t kernel_width = 0;
  std::size_t stride_height = 1;
  std::size_t stride_width = 1;
  std::size_t pad_height = 0;
  std::size_t pad_width = 0;
  std::vector<double> kernel;
  Vector bias;  // [out_channels]

  std::size_t out_height() const;
  std::size_t out_width() const;
  std::size_t input_size() const { return in_channels * in_height * in_width; }
  std::size_t output_size() const { return out_channels * out_height() * out_width(); }
  double weight(std::size_t o, std::size_t c, std::size_t kh, std::size_t kw) const {
    return kernel[((o * in_channels + c) * kernel_height + kh) * kernel_width + kw];
  }
};

struct Activation {
  ActivationKind kind;
};

/// Each output is the max over one group of input indices. Groups may overlap.
struct MaxPool {
  std::size_t input_dim = 0;
  std::vector<std::vector<std::size_t>> windows;
};

/// Inference-mode batch normalization, one entry per neuron.
struct BatchNorm {
  Vector scale;
  Vector shift;
  Vector mean;
  Vector variance;
  double epsilon = 1e-5;
};

using Layer = std::variant<Affine, Conv2D, Activation, MaxPool, BatchNorm>;

/// Output width of `layer` when fed `input_dim` values.
std::size_t layer_output_dim(const Layer& layer, std::size_t input_dim, int layer_index = -1);

std::string layer_type_name(const Layer& layer);

/// Ordered layer list with a checked dimension chain. Immutable once built.
class Network {
 public:
  Network(std::size_t input_dim, std::vector<Layer> layers);

  std::size_t input_dim() const { return widths_.front(); }
  std::size_t output_dim() const { return widths_.back(); }
  /// widths()[0] is the input width, widths()[k] the output width of layer k.
  const std::vector<std::size_t>& widths() const { return widths_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t num_layers() const { return layers_.size(); }

  /// True when only Affine, Activation and MaxPool layers remain.
  bool is_normalized() const;

 private:
  std::vector<Layer> layers_;
  std::vector<std::size_t> widths_;
};

/// Evaluates one layer.
Vector apply_layer(const Layer& layer, const Vector& x);

Vector forward(const Network& net, const Vector& x);

/// All intermediate values: entry 0 is x, entry k the output of layer k.
std::vector<Vector> forward_trace(const Network& net, const Vector& x);

/// Index of the largest entry; the lowest index wins ties.
std::size_t argmax(const Vector& v);

/// Dense matrix equal to the sliding-window convolution.
Affine conv_to_affine(const Conv2D& conv);

/// Merges every BatchNorm into the preceding Affine, or replaces it by a
/// diagonal Affine when no Affine precedes it.
Network fold_batchnorm(const Network& net);

/// Expands convolutions and folds batch norms.
Network normalize(const Network& net);

/// Index groups for a size/stride pool over a CHW volume (no padding).
std::vector<std::vector<std::size_t>> pool_windows(std::size_t channels, std::size_t height,
                                                   std::size_t width, std::size_t pool_height,
                                                   std::size_t pool_width, std::size_t stride_height,
                                                   std::size_t stride_width);

Network parse_network(const nlohmann::json& doc);
Network load_network(const std::filesystem::path& path);
nlohmann::json network_to_json(const Network& net);

}  // namespace tilin
