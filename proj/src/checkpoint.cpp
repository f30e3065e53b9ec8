#include "mvp/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mvp::nn {

namespace {

constexpr char kMagic[8] = {'M', 'V', 'P', 'A', 'R', 'C', 'H', '\0'};
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;
constexpr std::uint64_t kMaxRank = 8;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) hash_ = (hash_ ^ c[i]) * kFnvPrime;
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  template <typename T>
  void le(T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, sizeof(T));
  }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  std::uint64_t hash() const { return hash_; }

 private:
  std::ostream& out_;
  std::uint64_t hash_ = kFnvOffset;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw CheckpointError("checkpoint truncated");
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) hash_ = (hash_ ^ c[i]) * kFnvPrime;
  }
  template <typename T>
  T le() {
    unsigned char buf[sizeof(T)];
    bytes(buf, sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  std::string str(std::size_t n) {
    if (n > (1ULL << 32)) throw CheckpointError("checkpoint string too long");
    std::string s(n, '\0');
    if (n) bytes(s.data(), n);
    return s;
  }
  std::uint64_t hash() const { return hash_; }

 private:
  std::istream& in_;
  std::uint64_t hash_ = kFnvOffset;
};

}  // namespace

void Archive::put(const std::string& name, Tensor t) {
  if (texts_.count(name)) throw std::invalid_argument("archive entry '" + name + "' already holds text");
  tensors_[name] = std::move(t);
}

void Archive::put_text(const std::string& name, std::string text) {
  if (tensors_.count(name)) throw std::invalid_argument("archive entry '" + name + "' already holds a tensor");
  texts_[name] = std::move(text);
}

void Archive::put_params(const std::string& prefix, const ParamSet& params) {
  for (std::size_t i = 0; i < params.size(); ++i) put(prefix + params.name(i), params[i]);
}

bool Archive::has(const std::string& name) const { return tensors_.count(name) || texts_.count(name); }

const Tensor& Archive::tensor(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw CheckpointError("checkpoint has no tensor '" + name + "'");
  return it->second;
}

const std::string& Archive::text(const std::string& name) const {
  auto it = texts_.find(name);
  if (it == texts_.end()) throw CheckpointError("checkpoint has no entry '" + name + "'");
  return it->second;
}

void Archive::get_params(const std::string& prefix, ParamSet& params) const {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = tensor(prefix + params.name(i));
    if (t.shape != params[i].shape)
      throw CheckpointError("checkpoint tensor '" + prefix + params.name(i) + "' has shape " +
                            shape_string(t.shape) + ", expected " + shape_string(params[i].shape));
    params[i] = t;
  }
}

std::vector<std::string> Archive::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : tensors_) out.push_back(k);
  for (const auto& [k, v] : texts_) out.push_back(k);
  std::sort(out.begin(), out.end());
  return out;
}

void Archive::write(std::ostream& out) const {
  Writer w(out);
  w.bytes(kMagic, sizeof(kMagic));
  w.le<std::uint32_t>(kArchiveVersion);
  w.le<std::uint64_t>(tensors_.size() + texts_.size());
  for (const auto& [name, t] : tensors_) {
    w.le<std::uint8_t>(0);
    w.le<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.le<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) w.le<std::uint64_t>(d);
    for (double v : t.values) w.f64(v);
  }
  for (const auto& [name, s] : texts_) {
    w.le<std::uint8_t>(1);
    w.le<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.le<std::uint64_t>(s.size());
    w.bytes(s.data(), s.size());
  }
  const std::uint64_t h = w.hash();
  w.le<std::uint64_t>(h);
  if (!out) throw CheckpointError("failed to write checkpoint");
}

Archive Archive::read(std::istream& in) {
  Reader r(in);
  char magic[sizeof(kMagic)];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw CheckpointError("not a checkpoint file");
  const auto version = r.le<std::uint32_t>();
  if (version != kArchiveVersion)
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kArchiveVersion) + ")");
  Archive a;
  const auto count = r.le<std::uint64_t>();
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto kind = r.le<std::uint8_t>();
    const std::string name = r.str(r.le<std::uint32_t>());
    if (a.has(name)) throw CheckpointError("duplicate checkpoint entry '" + name + "'");
    if (kind == 0) {
      const auto rank = r.le<std::uint32_t>();
      if (rank > kMaxRank) throw CheckpointError("corrupt tensor rank for '" + name + "'");
      std::vector<std::size_t> dims(rank);
      std::uint64_t count_values = 1;
      for (auto& d : dims) {
        d = r.le<std::uint64_t>();
        if (d > (1ULL << 32)) throw CheckpointError("corrupt tensor dimension for '" + name + "'");
        count_values *= d;
      }
      if (count_values > (1ULL << 34)) throw CheckpointError("corrupt tensor size for '" + name + "'");
      Tensor t(dims);
      for (double& v : t.values) v = r.f64();
      a.tensors_[name] = std::move(t);
    } else if (kind == 1) {
      a.texts_[name] = r.str(r.le<std::uint64_t>());
    } else {
      throw CheckpointError("corrupt entry kind for '" + name + "'");
    }
  }
  const std::uint64_t expected = r.hash();
  const auto stored = r.le<std::uint64_t>();
  if (stored != expected) throw CheckpointError("checkpoint checksum mismatch");
  return a;
}

void Archive::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  write(out);
}

Archive Archive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  return read(in);
}

}  // namespace mvp::nn
