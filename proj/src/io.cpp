#include "cohflow/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cohflow {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::runtime_error("io: " + what);
}

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

}  // namespace

void write_binary_array(const std::filesystem::path& path, const Eigen::MatrixXd& data) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "cannot open " + path.string());
  os.write("COHFARR1", 8);
  put<std::uint64_t>(os, 2);
  put<std::uint64_t>(os, static_cast<std::uint64_t>(data.rows()));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(data.cols()));
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    for (Eigen::Index j = 0; j < data.cols(); ++j) put<double>(os, data(i, j));
  require(os.good(), "write failed for " + path.string());
}

Eigen::MatrixXd read_binary_array(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  require(is.good() && std::memcmp(magic, "COHFARR1", 8) == 0,
          "bad magic in " + path.string());
  const auto rank = get<std::uint64_t>(is);
  require(rank == 2, "unsupported rank in " + path.string());
  const auto rows = get<std::uint64_t>(is);
  const auto cols = get<std::uint64_t>(is);
  Eigen::MatrixXd data(rows, cols);
  for (std::uint64_t i = 0; i < rows; ++i)
    for (std::uint64_t j = 0; j < cols; ++j) data(i, j) = get<double>(is);
  require(is.good(), "truncated array in " + path.string());
  return data;
}

void write_triplets_text(const std::filesystem::path& path, const SparseMat& m) {
  std::ofstream os(path);
  require(os.good(), "cannot open " + path.string());
  os.precision(17);
  for (Index k = 0; k < m.outerSize(); ++k)
    for (SparseMat::InnerIterator it(m, k); it; ++it)
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
  require(os.good(), "write failed for " + path.string());
}

void write_matrix_binary(const std::filesystem::path& path, const SparseMat& m) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "cannot open " + path.string());
  os.write("COHFSPM1", 8);
  put<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(m.nonZeros()));
  for (Index k = 0; k < m.outerSize(); ++k)
    for (SparseMat::InnerIterator it(m, k); it; ++it) put<std::int64_t>(os, it.row());
  for (Index k = 0; k < m.outerSize(); ++k)
    for (SparseMat::InnerIterator it(m, k); it; ++it) put<std::int64_t>(os, it.col());
  for (Index k = 0; k < m.outerSize(); ++k)
    for (SparseMat::InnerIterator it(m, k); it; ++it) put<double>(os, it.value());
  require(os.good(), "write failed for " + path.string());
}

SparseMat read_matrix_binary(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  require(is.good() && std::memcmp(magic, "COHFSPM1", 8) == 0,
          "bad magic in " + path.string());
  const auto rows = get<std::uint64_t>(is);
  const auto cols = get<std::uint64_t>(is);
  const auto nnz = get<std::uint64_t>(is);
  std::vector<std::int64_t> ri(nnz), ci(nnz);
  std::vector<double> vv(nnz);
  for (auto& v : ri) v = get<std::int64_t>(is);
  for (auto& v : ci) v = get<std::int64_t>(is);
  for (auto& v : vv) v = get<double>(is);
  require(is.good(), "truncated matrix in " + path.string());
  std::vector<Triplet> trips;
  trips.reserve(nnz);
  for (std::uint64_t i = 0; i < nnz; ++i)
    trips.emplace_back(static_cast<Index>(ri[i]), static_cast<Index>(ci[i]), vv[i]);
  SparseMat m(rows, cols);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

std::pair<double, double> write_pgm(const std::filesystem::path& path,
                                    const Eigen::MatrixXd& values) {
  const double lo = values.minCoeff(), hi = values.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "cannot open " + path.string());
  os << "P5\n" << values.cols() << ' ' << values.rows() << "\n255\n";
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      const double t = (values(i, j) - lo) / span;
      os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
    }
  require(os.good(), "write failed for " + path.string());
  return {lo, hi};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  require(os.good(), "cannot open " + path.string());
  os << text;
  require(os.good(), "write failed for " + path.string());
}

std::string file_checksum(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "cannot open " + path.string());
  std::uint64_t hash = 0xcbf29ce484222325ull;
  char buf[65536];
  while (is.good()) {
    is.read(buf, sizeof(buf));
    const std::streamsize got = is.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001b3ull;
    }
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(hash));
  return out;
}

Eigen::MatrixXd fiber_grid(const SpaceTimeGrid& grid, const Eigen::VectorXd& vec, int slab) {
  if (grid.spatial_dims() != 2)
    throw std::invalid_argument("fiber_grid: requires a 2-D spatial grid");
  if (vec.size() != grid.dim())
    throw std::invalid_argument("fiber_grid: vector does not match the grid");
  const int nx = grid.boxes(0), ny = grid.boxes(1);
  Eigen::MatrixXd img(ny, nx);
  for (int ix = 0; ix < nx; ++ix)
    for (int iy = 0; iy < ny; ++iy) {
      const Index sp = grid.spatial_flatten({ix, iy});
      img(ny - 1 - iy, ix) = vec[grid.flatten(slab, sp)];
    }
  return img;
}

}  // namespace cohflow
