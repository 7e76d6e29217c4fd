#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tilin/model.hpp"

namespace tilin {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ParseError(where + ": " + what);
}

const json& field(const json& obj, const std::string& key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(where, "missing field '" + key + "'");
  return *it;
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(where, "non-finite number");
  return d;
}

std::size_t count(const json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<long long>() < 0) fail(where, "expected a non-negative integer");
  return v.get<std::size_t>();
}

Vector vector_of(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where, "expected an array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = number(v[i], where + "[" + std::to_string(i) + "]");
  }
  return out;
}

Matrix matrix_of(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) fail(where, "expected a non-empty array of rows");
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  Matrix m(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < v.size(); ++r) {
    const std::string row_where = where + "[" + std::to_string(r) + "]";
    if (!v[r].is_array() || v[r].size() != cols) fail(row_where, "ragged matrix row");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          number(v[r][c], row_where + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

/// Accepts either a scalar or a [height, width] pair.
std::pair<std::size_t, std::size_t> pair_of(const json& v, const std::string& where) {
  if (v.is_array()) {
    if (v.size() != 2) fail(where, "expected two entries");
    return {count(v[0], where + "[0]"), count(v[1], where + "[1]")};
  }
  const std::size_t n = count(v, where);
  return {n, n};
}

std::array<std::size_t, 3> chw_of(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) fail(where, "expected [channels, height, width]");
  return {count(v[0], where + "[0]"), count(v[1], where + "[1]"), count(v[2], where + "[2]")};
}

Conv2D parse_conv(const json& j, const std::string& where) {
  Conv2D c;
  const auto shape = chw_of(field(j, "input_shape", where), where + ".input_shape");
  c.in_channels = shape[0];
  c.in_height = shape[1];
  c.in_width = shape[2];
  const json& k = field(j, "kernel", where);
  const std::string kw = where + ".kernel";
  if (!k.is_array() || k.empty()) fail(kw, "expected a 4-D array [out][in][h][w]");
  c.out_channels = k.size();
  if (!k[0].is_array() || k[0].size() != c.in_channels) fail(kw + "[0]", "input channel mismatch");
  if (!k[0][0].is_array() || k[0][0].empty()) fail(kw + "[0][0]", "expected kernel rows");
  c.kernel_height = k[0][0].size();
  c.kernel_width = k[0][0][0].is_array() ? k[0][0][0].size() : 0;
  c.kernel.reserve(c.out_channels * c.in_channels * c.kernel_height * c.kernel_width);
  for (std::size_t o = 0; o < c.out_channels; ++o) {
    if (!k[o].is_array() || k[o].size() != c.in_channels) {
      fail(kw + "[" + std::to_string(o) + "]", "input channel mismatch");
    }
    for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
      const Matrix plane = matrix_of(k[o][ch], kw + "[" + std::to_string(o) + "][" + std::to_string(ch) + "]");
      if (static_cast<std::size_t>(plane.rows()) != c.kernel_height ||
          static_cast<std::size_t>(plane.cols()) != c.kernel_width) {
        fail(kw, "kernel planes must share one shape");
      }
      for (Eigen::Index r = 0; r < plane.rows(); ++r) {
        for (Eigen::Index s = 0; s < plane.cols(); ++s) c.kernel.push_back(plane(r, s));
      }
    }
  }
  c.bias = j.contains("bias") ? vector_of(j["bias"], where + ".bias")
                              : Vector::Zero(static_cast<Eigen::Index>(c.out_channels));
  if (j.contains("stride")) {
    std::tie(c.stride_height, c.stride_width) = pair_of(j["stride"], where + ".stride");
  }
  if (j.contains("padding")) {
    std::tie(c.pad_height, c.pad_width) = pair_of(j["padding"], where + ".padding");
  }
  if (c.stride_height == 0 || c.stride_width == 0) fail(where + ".stride", "must be positive");
  return c;
}

MaxPool parse_maxpool(const json& j, std::size_t input_dim, const std::string& where) {
  MaxPool p;
  p.input_dim = input_dim;
  if (j.contains("windows")) {
    const json& w = j["windows"];
    if (!w.is_array()) fail(where + ".windows", "expected an array of index groups");
    for (std::size_t g = 0; g < w.size(); ++g) {
      const std::string gw = where + ".windows[" + std::to_string(g) + "]";
      if (!w[g].is_array()) fail(gw, "expected an array of indices");
      std::vector<std::size_t> group;
      for (std::size_t i = 0; i < w[g].size(); ++i) {
        group.push_back(count(w[g][i], gw + "[" + std::to_string(i) + "]"));
      }
      p.windows.push_back(std::move(group));
    }
    return p;
  }
  const auto shape = chw_of(field(j, "input_shape", where), where + ".input_shape");
  const auto [ph, pw] = pair_of(field(j, "size", where), where + ".size");
  auto [sh, sw] = std::pair{ph, pw};
  if (j.contains("stride")) std::tie(sh, sw) = pair_of(j["stride"], where + ".stride");
  try {
    p.windows = pool_windows(shape[0], shape[1], shape[2], ph, pw, sh, sw);
  } catch (const DimensionError& e) {
    fail(where, e.what());
  }
  return p;
}

/// Per-neuron arrays, or per-channel arrays broadcast over contiguous CHW blocks.
Vector expand_channels(const Vector& v, std::size_t width, const std::string& where) {
  const auto n = static_cast<std::size_t>(v.size());
  if (n == width) return v;
  if (n == 0 || width % n != 0) {
    fail(where, "length " + std::to_string(n) + " neither matches nor divides width " +
                    std::to_string(width));
  }
  const std::size_t block = width / n;
  Vector out(static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < width; ++i) {
    out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(i / block)];
  }
  return out;
}

BatchNorm parse_batchnorm(const json& j, std::size_t width, const std::string& where) {
  BatchNorm b;
  const std::string var_key = j.contains("variance") ? "variance" : "var";
  b.mean = expand_channels(vector_of(field(j, "mean", where), where + ".mean"), width, where + ".mean");
  b.variance = expand_channels(vector_of(field(j, var_key, where), where + "." + var_key), width,
                               where + "." + var_key);
  b.scale = j.contains("scale")
                ? expand_channels(vector_of(j["scale"], where + ".scale"), width, where + ".scale")
                : Vector::Ones(static_cast<Eigen::Index>(width));
  b.shift = j.contains("shift")
                ? expand_channels(vector_of(j["shift"], where + ".shift"), width, where + ".shift")
                : Vector::Zero(static_cast<Eigen::Index>(width));
  if (j.contains("epsilon")) b.epsilon = number(j["epsilon"], where + ".epsilon");
  return b;
}

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

}  // namespace

Network parse_network(const json& doc) {
  if (!doc.is_object()) fail("network", "top level must be an object");
  const std::size_t input_dim = count(field(doc, "input_dim", "network"), "input_dim");
  const json& layers = field(doc, "layers", "network");
  if (!layers.is_array()) fail("layers", "expected an array");

  std::vector<Layer> parsed;
  std::size_t width = input_dim;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const std::string where = "layers[" + std::to_string(k) + "]";
    const json& j = layers[k];
    if (!j.is_object()) fail(where, "expected an object");
    const json& type = field(j, "type", where);
    if (!type.is_string()) fail(where + ".type", "expected a string");
    const std::string t = type.get<std::string>();
    Layer layer;
    if (t == "affine" || t == "dense" || t == "linear") {
      Affine a{matrix_of(field(j, "weight", where), where + ".weight"), Vector()};
      a.bias = j.contains("bias") ? vector_of(j["bias"], where + ".bias")
                                  : Vector::Zero(a.weight.rows());
      layer = std::move(a);
    } else if (t == "conv2d") {
      layer = parse_conv(j, where);
    } else if (t == "activation") {
      const json& kind = field(j, "kind", where);
      if (!kind.is_string()) fail(where + ".kind", "expected a string");
      try {
        layer = Activation{parse_activation(kind.get<std::string>())};
      } catch (const std::invalid_argument& e) {
        fail(where + ".kind", e.what());
      }
    } else if (t == "relu" || t == "sigmoid" || t == "tanh" || t == "arctan") {
      layer = Activation{parse_activation(t)};
    } else if (t == "maxpool") {
      layer = parse_maxpool(j, width, where);
    } else if (t == "batchnorm") {
      layer = parse_batchnorm(j, width, where);
    } else {
      fail(where + ".type", "unknown layer type '" + t + "'");
    }
    width = layer_output_dim(layer, width, static_cast<int>(k));
    parsed.push_back(std::move(layer));
  }
  return Network(input_dim, std::move(parsed));
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into line/column.
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) +
                     ": " + e.what());
  }
  try {
    return parse_network(doc);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

json network_to_json(const Network& net) {
  json layers = json::array();
  for (const Layer& layer : net.layers()) {
    json j;
    if (const auto* a = std::get_if<Affine>(&layer)) {
      j["type"] = "affine";
      json rows = json::array();
      for (Eigen::Index r = 0; r < a->weight.rows(); ++r) rows.push_back(vector_json(a->weight.row(r)));
      j["weight"] = std::move(rows);
      j["bias"] = vector_json(a->bias);
    } else if (const auto* act = std::get_if<Activation>(&layer)) {
      j["type"] = "activation";
      j["kind"] = to_string(act->kind);
    } else if (const auto* p = std::get_if<MaxPool>(&layer)) {
      j["type"] = "maxpool";
      j["windows"] = p->windows;
    } else if (const auto* c = std::get_if<Conv2D>(&layer)) {
      j["type"] = "conv2d";
      j["input_shape"] = {c->in_channels, c->in_height, c->in_width};
      json kernel = json::array();
      for (std::size_t o = 0; o < c->out_channels; ++o) {
        json per_out = json::array();
        for (std::size_t ch = 0; ch < c->in_channels; ++ch) {
          json plane = json::array();
          for (std::size_t r = 0; r < c->kernel_height; ++r) {
            json row = json::array();
            for (std::size_t s = 0; s < c->kernel_width; ++s) row.push_back(c->weight(o, ch, r, s));
            plane.push_back(std::move(row));
          }
          per_out.push_back(std::move(plane));
        }
        kernel.push_back(std::move(per_out));
      }
      j["kernel"] = std::move(kernel);
      j["bias"] = vector_json(c->bias);
      j["stride"] = {c->stride_height, c->stride_width};
      j["padding"] = {c->pad_height, c->pad_width};
    } else if (const auto* b = std::get_if<BatchNorm>(&layer)) {
      j["type"] = "batchnorm";
      j["scale"] = vector_json(b->scale);
      j["shift"] = vector_json(b->shift);
      j["mean"] = vector_json(b->mean);
      j["variance"] = vector_json(b->variance);
      j["epsilon"] = b->epsilon;
    }
    layers.push_back(std::move(j));
  }
  return json{{"input_dim", net.input_dim()}, {"layers", std::move(layers)}};
}

}  // namespace tilin
