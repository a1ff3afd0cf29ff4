#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace musedance {

// Maps to CLI exit code 1.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: non-finite loss, covariance not positive definite, ...
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IncompleteTrack : public DataError {
 public:
  using DataError::DataError;
};

class NotPositiveDefinite : public NumericError {
 public:
  using NumericError::NumericError;
};

class DegenerateGeometry : public NumericError {
 public:
  using NumericError::NumericError;
};

void log_warn(const std::string& msg);
void log_info(const std::string& msg);
void set_log_quiet(bool quiet);

// Deterministic RNG used by every seeded component. The mt19937_64 engine is
// fully specified by the standard; std:: distributions are not, so sampling
// is done by hand to keep streams identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller, one spare value cached.
  double normal();

  std::uint64_t below(std::uint64_t n) { return engine_() % n; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

// FNV-1a, used for config hashes and cache freshness checks.
std::uint64_t fnv1a64(const void* data, std::size_t n,
                      std::uint64_t h = 1469598103934665603ull);
std::uint64_t fnv1a64(const std::string& s);
std::string hex64(std::uint64_t v);
std::uint64_t hash_file(const std::filesystem::path& p);

}  // namespace musedance
