#pragma once

// Named-tensor container with a version header. Layout, all little-endian:
//   magic "MVPARCH\0", u32 version, u64 entry count,
//   per entry: u8 kind, u32 name length, name bytes, then
//     kind 0 (tensor): u32 rank, u64 dims[rank], f64 values
//     kind 1 (text):   u64 length, bytes
//   u64 FNV-1a checksum of everything before it.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvp/nn.hpp"

namespace mvp::nn {

inline constexpr std::uint32_t kArchiveVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Archive {
 public:
  void put(const std::string& name, Tensor t);
  void put_text(const std::string& name, std::string text);
  // Every tensor of `params`, named prefix + parameter name.
  void put_params(const std::string& prefix, const ParamSet& params);

  bool has(const std::string& name) const;
  // Throw CheckpointError when missing.
  const Tensor& tensor(const std::string& name) const;
  const std::string& text(const std::string& name) const;
  // Copies tensors named prefix + name into a params of the same layout;
  // throws CheckpointError on a missing tensor or shape mismatch.
  void get_params(const std::string& prefix, ParamSet& params) const;
  std::vector<std::string> names() const;

  void write(std::ostream& out) const;
  static Archive read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static Archive load(const std::filesystem::path& path);

 private:
  std::map<std::string, Tensor> tensors_;
  std::map<std::string, std::string> texts_;
};

}  // namespace mvp::nn
