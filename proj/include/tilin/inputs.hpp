#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "tilin/model.hpp"

namespace tilin {

enum class InputFormat { Json, Csv, Idx };

/// "path" or "path:format"; the format otherwise comes from the extension
/// (.json, .csv, .idx / -ubyte).
struct InputSource {
  std::filesystem::path path;
  InputFormat format = InputFormat::Json;

  static InputSource parse(const std::string& spec);
};

/// JSON: one array of numbers, or an array of such arrays.
std::vector<Tensor> read_json_inputs(const std::filesystem::path& path);

/// CSV: one input per non-empty row; a non-numeric first row is skipped as a header.
std::vector<Tensor> read_csv_inputs(const std::filesystem::path& path);

/// IDX image file (magic 0x00000803, big-endian dimensions); bytes are
/// scaled to [0, 1] by division by 255.
std::vector<Tensor> read_idx_images(const std::filesystem::path& path);

/// IDX label file (magic 0x00000801).
std::vector<std::size_t> read_idx_labels(const std::filesystem::path& path);

std::vector<Tensor> load_inputs(const InputSource& source);

/// "3", "0..9" (inclusive), "0,4,7" or combinations such as "0..2,5".
std::vector<std::size_t> parse_indices(const std::string& text);

}  // namespace tilin
