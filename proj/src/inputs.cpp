#include "tilin/inputs.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace tilin {

namespace {

std::string lower_ext(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

InputFormat parse_format(const std::string& name) {
  if (name == "json") return InputFormat::Json;
  if (name == "csv") return InputFormat::Csv;
  if (name == "idx") return InputFormat::Idx;
  throw ParseError("unknown input format '" + name + "' (expected json|csv|idx)");
}

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw ParseError(path.string() + ": truncated IDX header");
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

Tensor row_tensor(std::vector<double> values) {
  Tensor t{{values.size()}, std::move(values)};
  t.validate();
  return t;
}

}  // namespace

InputSource InputSource::parse(const std::string& spec) {
  InputSource src;
  const auto colon = spec.rfind(':');
  if (colon != std::string::npos && colon + 1 < spec.size()) {
    const std::string suffix = spec.substr(colon + 1);
    if (suffix == "json" || suffix == "csv" || suffix == "idx") {
      src.path = spec.substr(0, colon);
      src.format = parse_format(suffix);
      return src;
    }
  }
  src.path = spec;
  const std::string ext = lower_ext(src.path);
  const std::string name = src.path.filename().string();
  if (ext == ".csv") {
    src.format = InputFormat::Csv;
  } else if (ext == ".idx" || ext == ".idx3-ubyte" || name.find("-ubyte") != std::string::npos) {
    src.format = InputFormat::Idx;
  } else {
    src.format = InputFormat::Json;
  }
  return src;
}

std::vector<Tensor> read_json_inputs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  auto to_row = [&](const nlohmann::json& arr, std::size_t idx) {
    if (!arr.is_array()) throw ParseError(path.string() + ": input " + std::to_string(idx) + " is not an array");
    std::vector<double> values;
    for (const auto& v : arr) {
      if (!v.is_number()) {
        throw ParseError(path.string() + ": input " + std::to_string(idx) + " holds a non-number");
      }
      values.push_back(v.get<double>());
    }
    return row_tensor(std::move(values));
  };
  if (!doc.is_array() || doc.empty()) throw ParseError(path.string() + ": expected a non-empty array");
  std::vector<Tensor> out;
  if (doc[0].is_array()) {
    for (std::size_t i = 0; i < doc.size(); ++i) out.push_back(to_row(doc[i], i));
  } else {
    out.push_back(to_row(doc, 0));
  }
  return out;
}

std::vector<Tensor> read_csv_inputs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  std::vector<Tensor> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> values;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (out.empty() && line_no == 1) continue;  // header
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": non-numeric cell");
    }
    try {
      out.push_back(row_tensor(std::move(values)));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.empty()) throw ParseError(path.string() + ": no input rows");
  return out;
}

std::vector<Tensor> read_idx_images(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  const std::uint32_t magic = read_be32(in, path);
  if (magic != 0x00000803) {
    std::ostringstream msg;
    msg << path.string() << ": bad IDX image magic 0x" << std::hex << magic;
    throw ParseError(msg.str());
  }
  const std::uint32_t count = read_be32(in, path);
  const std::uint32_t rows = read_be32(in, path);
  const std::uint32_t cols = read_be32(in, path);
  const std::size_t pixels = std::size_t{rows} * cols;
  std::vector<Tensor> out;
  out.reserve(count);
  std::vector<unsigned char> buf(pixels);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels))) {
      throw ParseError(path.string() + ": truncated IDX data at image " + std::to_string(i));
    }
    Tensor t{{rows, cols}, std::vector<double>(pixels)};
    for (std::size_t p = 0; p < pixels; ++p) t.values[p] = static_cast<double>(buf[p]) / 255.0;
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<std::size_t> read_idx_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  if (read_be32(in, path) != 0x00000801) throw ParseError(path.string() + ": bad IDX label magic");
  const std::uint32_t count = read_be32(in, path);
  std::vector<unsigned char> buf(count);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count))) {
    throw ParseError(path.string() + ": truncated IDX labels");
  }
  return {buf.begin(), buf.end()};
}

std::vector<Tensor> load_inputs(const InputSource& source) {
  switch (source.format) {
    case InputFormat::Json:
      return read_json_inputs(source.path);
    case InputFormat::Csv:
      return read_csv_inputs(source.path);
    case InputFormat::Idx:
      return read_idx_images(source.path);
  }
  throw ParseError("unknown input format");
}

std::vector<std::size_t> parse_indices(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string part;
  auto to_index = [&](const std::string& s) -> std::size_t {
    std::size_t used = 0;
    long long v = -1;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || v < 0) throw std::invalid_argument("bad index '" + s + "' in '" + text + "'");
    return static_cast<std::size_t>(v);
  };
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(to_index(part));
      continue;
    }
    const std::size_t a = to_index(part.substr(0, dots));
    const std::size_t b = to_index(part.substr(dots + 2));
    if (b < a) throw std::invalid_argument("descending range '" + part + "'");
    for (std::size_t i = a; i <= b; ++i) out.push_back(i);
  }
  if (out.empty()) throw std::invalid_argument("empty index selection '" + text + "'");
  return out;
}

}  // namespace tilin
