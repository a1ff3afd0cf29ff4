#include "musedance/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "musedance/common.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace musedance::checkpoint {

namespace {

constexpr char kMagic[4] = {'M', 'D', 'C', 'K'};

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (in.gcount() != sizeof(T)) throw DataError("truncated checkpoint: " + path.string());
  return v;
}

void write_string(std::ofstream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in, const std::filesystem::path& path) {
  auto n = read_pod<std::uint32_t>(in, path);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (in.gcount() != static_cast<std::streamsize>(n))
    throw DataError("truncated checkpoint: " + path.string());
  return s;
}

}  // namespace

void Checkpoint::put(const std::string& name, std::vector<std::int64_t> shape,
                     std::vector<double> data) {
  std::size_t expect = 1;
  for (auto d : shape) expect *= static_cast<std::size_t>(d);
  if (expect != data.size())
    throw ConfigError("tensor '" + name + "' shape does not match its data size");
  tensors.push_back({name, std::move(shape), std::move(data)});
}

const NamedTensor& Checkpoint::get(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw DataError("checkpoint tensor missing: " + name);
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return true;
  return false;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, 4);
  write_pod<std::uint32_t>(out, ckpt.version);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    write_string(out, k);
    write_string(out, v);
  }
  write_pod<std::uint64_t>(out, ckpt.tensors.size());
  for (const auto& t : ckpt.tensors) {
    write_string(out, t.name);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) write_pod<std::int64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
  if (!out) throw DataError("short write on checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("not a checkpoint file: " + path.string());

  Checkpoint ckpt;
  ckpt.version = read_pod<std::uint32_t>(in, path);
  if (ckpt.version != 1)
    throw DataError("unsupported checkpoint version " + std::to_string(ckpt.version));
  auto nmeta = read_pod<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::string k = read_string(in, path);
    ckpt.meta[k] = read_string(in, path);
  }
  auto ntens = read_pod<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < ntens; ++i) {
    NamedTensor t;
    t.name = read_string(in, path);
    auto ndim = read_pod<std::uint32_t>(in, path);
    std::size_t total = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      t.shape.push_back(read_pod<std::int64_t>(in, path));
      total *= static_cast<std::size_t>(t.shape.back());
    }
    t.data.resize(total);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(total * sizeof(double)))
      throw DataError("truncated checkpoint: " + path.string());
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

}  // namespace musedance::checkpoint
