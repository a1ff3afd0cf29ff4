#pragma once

#include <Eigen/Core>
#include <filesystem>

namespace musedance {

// Feature cache file: ASCII header line "rows cols\n" followed by rows*cols
// little-endian IEEE-754 binary32 values in row-major order. Reload is
// bit-exact with respect to the stored float32 payload.
void write_matrix_f32(const std::filesystem::path& path, const Eigen::MatrixXf& m);
Eigen::MatrixXf read_matrix_f32(const std::filesystem::path& path);

}  // namespace musedance
