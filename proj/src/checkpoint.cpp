#include "sqlink/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "sqlink/error.hpp"

namespace sqlink {

namespace {

constexpr const char* kMagic = "SQLINKCKPT1";

void write_le_doubles(std::ofstream& out, const double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &data[i], sizeof(bits));
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) {
      bytes[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xff);
    }
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
}

void read_le_doubles(std::ifstream& in, double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (!in) throw IoError("checkpoint truncated");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    }
    std::memcpy(&data[i], &bits, sizeof(bits));
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& kind,
                     const nlohmann::json& meta,
                     const std::vector<NamedTensor>& tensors) {
  nlohmann::json header;
  header["kind"] = kind;
  header["meta"] = meta;
  header["tensors"] = nlohmann::json::array();
  for (const auto& t : tensors) {
    header["tensors"].push_back(
        {{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << kMagic << "\n" << header.dump() << "\n";
  for (const auto& t : tensors) {
    write_le_doubles(out, t.data, t.rows * t.cols);
  }
  if (!out) throw IoError("checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string magic;
  std::getline(in, magic);
  if (magic != kMagic) throw IoError("not a checkpoint file: " + path);
  std::string header_line;
  std::getline(in, header_line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("checkpoint header malformed: " + std::string(e.what()));
  }

  LoadedCheckpoint out;
  out.kind = header.at("kind").get<std::string>();
  out.meta = header.value("meta", nlohmann::json::object());
  for (const auto& spec : header.at("tensors")) {
    LoadedTensor t;
    t.rows = spec.at("rows").get<std::size_t>();
    t.cols = spec.at("cols").get<std::size_t>();
    t.data.resize(t.rows * t.cols);
    read_le_doubles(in, t.data.data(), t.data.size());
    out.tensors[spec.at("name").get<std::string>()] = std::move(t);
  }
  return out;
}

const LoadedTensor& LoadedCheckpoint::require(const std::string& name,
                                              std::size_t rows,
                                              std::size_t cols) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw IoError("checkpoint missing tensor '" + name + "'");
  }
  if (it->second.rows != rows || it->second.cols != cols) {
    throw IoError("checkpoint tensor '" + name + "' has dimensions " +
                  std::to_string(it->second.rows) + "x" +
                  std::to_string(it->second.cols) + ", expected " +
                  std::to_string(rows) + "x" + std::to_string(cols));
  }
  return it->second;
}

}  // namespace sqlink
