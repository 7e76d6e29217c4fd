#include "tilin/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tilin {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::size_t conv_extent(std::size_t in, std::size_t pad, std::size_t kernel, std::size_t stride) {
  const std::size_t padded = in + 2 * pad;
  if (kernel == 0 || stride == 0 || padded < kernel) return 0;
  return (padded - kernel) / stride + 1;
}

}  // namespace

void Tensor::validate() const {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor shape has a zero extent");
    n *= d;
  }
  if (n != values.size()) {
    throw DimensionError("tensor shape holds " + std::to_string(n) + " values but " +
                         std::to_string(values.size()) + " were given");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw ParseError("tensor contains a non-finite value");
  }
}

Vector Tensor::flat() const {
  validate();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::size_t Conv2D::out_height() const {
  return conv_extent(in_height, pad_height, kernel_height, stride_height);
}

std::size_t Conv2D::out_width() const {
  return conv_extent(in_width, pad_width, kernel_width, stride_width);
}

std::string layer_type_name(const Layer& layer) {
  return std::visit(Overloaded{
                        [](const Affine&) { return std::string("affine"); },
                        [](const Conv2D&) { return std::string("conv2d"); },
                        [](const Activation&) { return std::string("activation"); },
                        [](const MaxPool&) { return std::string("maxpool"); },
                        [](const BatchNorm&) { return std::string("batchnorm"); },
                    },
                    layer);
}

std::size_t layer_output_dim(const Layer& layer, std::size_t input_dim, int layer_index) {
  return std::visit(
      Overloaded{
          [&](const Affine& a) -> std::size_t {
            if (static_cast<std::size_t>(a.weight.cols()) != input_dim) {
              throw DimensionError("affine weight has " + std::to_string(a.weight.cols()) +
                                       " columns, expected " + std::to_string(input_dim),
                                   layer_index);
            }
            if (a.bias.size() != a.weight.rows()) {
              throw DimensionError("affine bias length " + std::to_string(a.bias.size()) +
                                       " does not match " + std::to_string(a.weight.rows()) +
                                       " weight rows",
                                   layer_index);
            }
            if (a.weight.rows() == 0) throw DimensionError("affine layer has no outputs", layer_index);
            return static_cast<std::size_t>(a.weight.rows());
          },
          [&](const Conv2D& c) -> std::size_t {
            if (c.input_size() != input_dim) {
              throw DimensionError("conv2d input shape holds " + std::to_string(c.input_size()) +
                                       " values, expected " + std::to_string(input_dim),
                                   layer_index);
            }
            if (c.kernel.size() !=
                c.out_channels * c.in_channels * c.kernel_height * c.kernel_width) {
              throw DimensionError("conv2d kernel size does not match its declared shape",
                                   layer_index);
            }
            if (static_cast<std::size_t>(c.bias.size()) != c.out_channels) {
              throw DimensionError("conv2d bias length does not match output channels",
                                   layer_index);
            }
            if (c.output_size() == 0) {
              throw DimensionError("conv2d produces an empty output", layer_index);
            }
            return c.output_size();
          },
          [&](const Activation&) -> std::size_t { return input_dim; },
          [&](const MaxPool& p) -> std::size_t {
            if (p.input_dim != input_dim) {
              throw DimensionError("maxpool expects " + std::to_string(p.input_dim) +
                                       " inputs, got " + std::to_string(input_dim),
                                   layer_index);
            }
            if (p.windows.empty()) throw DimensionError("maxpool has no windows", layer_index);
            for (const auto& w : p.windows) {
              if (w.empty()) throw DimensionError("maxpool window is empty", layer_index);
              for (std::size_t i : w) {
                if (i >= input_dim) {
                  throw DimensionError("maxpool index " + std::to_string(i) + " out of range",
                                       layer_index);
                }
              }
            }
            return p.windows.size();
          },
          [&](const BatchNorm& b) -> std::size_t {
            const auto n = static_cast<Eigen::Index>(input_dim);
            if (b.scale.size() != n || b.shift.size() != n || b.mean.size() != n ||
                b.variance.size() != n) {
              throw DimensionError("batchnorm parameters must have length " +
                                       std::to_string(input_dim),
                                   layer_index);
            }
            if ((b.variance.array() + b.epsilon <= 0.0).any()) {
              throw DimensionError("batchnorm variance + epsilon must be positive", layer_index);
            }
            return input_dim;
          },
      },
      layer);
}

Network::Network(std::size_t input_dim, std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (input_dim == 0) throw DimensionError("network input dimension must be positive");
  widths_.reserve(layers_.size() + 1);
  widths_.push_back(input_dim);
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    widths_.push_back(layer_output_dim(layers_[k], widths_.back(), static_cast<int>(k)));
  }
}

bool Network::is_normalized() const {
  return std::all_of(layers_.begin(), layers_.end(), [](const Layer& l) {
    return !std::holds_alternative<Conv2D>(l) && !std::holds_alternative<BatchNorm>(l);
  });
}

namespace {

Vector conv_forward(const Conv2D& c, const Vector& x) {
  const std::size_t oh = c.out_height();
  const std::size_t ow = c.out_width();
  Vector y(static_cast<Eigen::Index>(c.output_size()));
  for (std::size_t o = 0; o < c.out_channels; ++o) {
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t s = 0; s < ow; ++s) {
        double acc = c.bias[static_cast<Eigen::Index>(o)];
        for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
          for (std::size_t kh = 0; kh < c.kernel_height; ++kh) {
            const auto row = static_cast<long>(r * c.stride_height + kh) -
                             static_cast<long>(c.pad_height);
            if (row < 0 || row >= static_cast<long>(c.in_height)) continue;
            for (std::size_t kw = 0; kw < c.kernel_width; ++kw) {
              const auto col = static_cast<long>(s * c.stride_width + kw) -
                               static_cast<long>(c.pad_width);
              if (col < 0 || col >= static_cast<long>(c.in_width)) continue;
              const std::size_t idx =
                  (ch * c.in_height + static_cast<std::size_t>(row)) * c.in_width +
                  static_cast<std::size_t>(col);
              acc += c.weight(o, ch, kh, kw) * x[static_cast<Eigen::Index>(idx)];
            }
          }
        }
        y[static_cast<Eigen::Index>((o * oh + r) * ow + s)] = acc;
      }
    }
  }
  return y;
}

}  // namespace

Vector apply_layer(const Layer& layer, const Vector& x) {
  return std::visit(
      Overloaded{
          [&](const Affine& a) -> Vector { return a.weight * x + a.bias; },
          [&](const Conv2D& c) -> Vector { return conv_forward(c, x); },
          [&](const Activation& act) -> Vector {
            return x.unaryExpr([&](double v) { return activation_value(act.kind, v); });
          },
          [&](const MaxPool& p) -> Vector {
            Vector y(static_cast<Eigen::Index>(p.windows.size()));
            for (std::size_t w = 0; w < p.windows.size(); ++w) {
              double best = x[static_cast<Eigen::Index>(p.windows[w].front())];
              for (std::size_t i : p.windows[w]) best = std::max(best, x[static_cast<Eigen::Index>(i)]);
              y[static_cast<Eigen::Index>(w)] = best;
            }
            return y;
          },
          [&](const BatchNorm& b) -> Vector {
            return (b.scale.array() * (x - b.mean).array() /
                        (b.variance.array() + b.epsilon).sqrt() +
                    b.shift.array())
                .matrix();
          },
      },
      layer);
}

std::vector<Vector> forward_trace(const Network& net, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != net.input_dim()) {
    throw DimensionError("input has length " + std::to_string(x.size()) + ", network expects " +
                         std::to_string(net.input_dim()));
  }
  std::vector<Vector> trace;
  trace.reserve(net.num_layers() + 1);
  trace.push_back(x);
  for (const Layer& layer : net.layers()) trace.push_back(apply_layer(layer, trace.back()));
  return trace;
}

Vector forward(const Network& net, const Vector& x) { return forward_trace(net, x).back(); }

std::size_t argmax(const Vector& v) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(i);
  }
  return best;
}

Affine conv_to_affine(const Conv2D& c) {
  const std::size_t oh = c.out_height();
  const std::size_t ow = c.out_width();
  if (c.output_size() == 0) throw DimensionError("conv2d produces an empty output");
  if (c.kernel.size() != c.out_channels * c.in_channels * c.kernel_height * c.kernel_width ||
      static_cast<std::size_t>(c.bias.size()) != c.out_channels) {
    throw DimensionError("conv2d kernel or bias does not match its declared shape");
  }
  Affine a;
  a.weight = Matrix::Zero(static_cast<Eigen::Index>(c.output_size()),
                          static_cast<Eigen::Index>(c.input_size()));
  a.bias.resize(static_cast<Eigen::Index>(c.output_size()));
  for (std::size_t o = 0; o < c.out_channels; ++o) {
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t s = 0; s < ow; ++s) {
        const auto out = static_cast<Eigen::Index>((o * oh + r) * ow + s);
        a.bias[out] = c.bias[static_cast<Eigen::Index>(o)];
        for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
          for (std::size_t kh = 0; kh < c.kernel_height; ++kh) {
            const auto row = static_cast<long>(r * c.stride_height + kh) -
                             static_cast<long>(c.pad_height);
            if (row < 0 || row >= static_cast<long>(c.in_height)) continue;
            for (std::size_t kw = 0; kw < c.kernel_width; ++kw) {
              const auto col = static_cast<long>(s * c.stride_width + kw) -
                               static_cast<long>(c.pad_width);
              if (col < 0 || col >= static_cast<long>(c.in_width)) continue;
              const auto in = static_cast<Eigen::Index>(
                  (ch * c.in_height + static_cast<std::size_t>(row)) * c.in_width +
                  static_cast<std::size_t>(col));
              a.weight(out, in) += c.weight(o, ch, kh, kw);
            }
          }
        }
      }
    }
  }
  return a;
}

Network fold_batchnorm(const Network& net) {
  std::vector<Layer> out;
  out.reserve(net.num_layers());
  for (const Layer& layer : net.layers()) {
    const auto* bn = std::get_if<BatchNorm>(&layer);
    if (bn == nullptr) {
      out.push_back(layer);
      continue;
    }
    // y = s * x + t
    const Vector s = (bn->scale.array() / (bn->variance.array() + bn->epsilon).sqrt()).matrix();
    const Vector t = (bn->shift.array() - s.array() * bn->mean.array()).matrix();
    if (!out.empty()) {
      if (auto* prev = std::get_if<Affine>(&out.back())) {
        prev->weight = s.asDiagonal() * prev->weight;
        prev->bias = (s.array() * prev->bias.array() + t.array()).matrix();
        continue;
      }
    }
    out.push_back(Affine{Matrix(s.asDiagonal()), t});
  }
  return Network(net.input_dim(), std::move(out));
}

Network normalize(const Network& net) {
  std::vector<Layer> expanded;
  expanded.reserve(net.num_layers());
  for (const Layer& layer : net.layers()) {
    if (const auto* conv = std::get_if<Conv2D>(&layer)) {
      expanded.emplace_back(conv_to_affine(*conv));
    } else {
      expanded.push_back(layer);
    }
  }
  return fold_batchnorm(Network(net.input_dim(), std::move(expanded)));
}

std::vector<std::vector<std::size_t>> pool_windows(std::size_t channels, std::size_t height,
                                                   std::size_t width, std::size_t pool_height,
                                                   std::size_t pool_width, std::size_t stride_height,
                                                   std::size_t stride_width) {
  if (pool_height == 0 || pool_width == 0 || stride_height == 0 || stride_width == 0 ||
      pool_height > height || pool_width > width) {
    throw DimensionError("invalid pool size/stride for a " + std::to_string(height) + "x" +
                         std::to_string(width) + " input");
  }
  const std::size_t oh = (height - pool_height) / stride_height + 1;
  const std::size_t ow = (width - pool_width) / stride_width + 1;
  std::vector<std::vector<std::size_t>> windows;
  windows.reserve(channels * oh * ow);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t s = 0; s < ow; ++s) {
        std::vector<std::size_t> w;
        w.reserve(pool_height * pool_width);
        for (std::size_t i = 0; i < pool_height; ++i) {
          for (std::size_t j = 0; j < pool_width; ++j) {
            w.push_back((c * height + r * stride_height + i) * width + s * stride_width + j);
          }
        }
        windows.push_back(std::move(w));
      }
    }
  }
  return windows;
}

}  // namespace tilin
