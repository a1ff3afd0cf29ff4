#include "musedance/matio.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "musedance/common.hpp"

static_assert(std::endian::native == std::endian::little,
              "feature cache format assumes a little-endian host");

namespace musedance {

void write_matrix_f32(const std::filesystem::path& path, const Eigen::MatrixXf& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open cache file for writing: " + path.string());
  out << m.rows() << " " << m.cols() << "\n";
  std::vector<float> row(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw DataError("short write on cache file: " + path.string());
}

Eigen::MatrixXf read_matrix_f32(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open cache file: " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw DataError("missing cache header: " + path.string());
  long rows = -1, cols = -1;
  if (std::sscanf(header.c_str(), "%ld %ld", &rows, &cols) != 2 || rows < 0 || cols < 0)
    throw DataError("malformed cache header '" + header + "' in " + path.string());
  Eigen::MatrixXf m(rows, cols);
  std::vector<float> row(static_cast<std::size_t>(cols));
  for (long r = 0; r < rows; ++r) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(row.size() * sizeof(float)))
      throw DataError("truncated cache file: " + path.string());
    for (long c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

}  // namespace musedance
