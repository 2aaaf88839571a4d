#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

// Model checkpoint file: a one-line magic, a JSON header with the tensor
// dimension table and model metadata, then raw little-endian 64-bit floats
// in header order.
namespace sqlink {

struct NamedTensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  const double* data = nullptr;
};

void save_checkpoint(const std::string& path, const std::string& kind,
                     const nlohmann::json& meta,
                     const std::vector<NamedTensor>& tensors);

struct LoadedTensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
};

struct LoadedCheckpoint {
  std::string kind;
  nlohmann::json meta;
  std::map<std::string, LoadedTensor> tensors;

  const LoadedTensor& require(const std::string& name, std::size_t rows,
                              std::size_t cols) const;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace sqlink
