#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace musedance::checkpoint {

struct NamedTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<double> data;
};

// Versioned binary container: string metadata plus named float64 tensors.
// Holds branch parameters (including batch-norm running statistics),
// optimizer state, the linear CCA model, the target frame id and config hash.
struct Checkpoint {
  std::uint32_t version = 1;
  std::map<std::string, std::string> meta;
  std::vector<NamedTensor> tensors;

  void put(const std::string& name, std::vector<std::int64_t> shape,
           std::vector<double> data);
  const NamedTensor& get(const std::string& name) const;
  bool has(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace musedance::checkpoint
