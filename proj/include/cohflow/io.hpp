#ifndef COHFLOW_IO_HPP
#define COHFLOW_IO_HPP

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "cohflow/generator.hpp"

namespace cohflow {

// Binary array: magic "COHFARR1", u64 rank, u64 dims[rank], f64 payload,
// all little-endian.
void write_binary_array(const std::filesystem::path& path, const Eigen::MatrixXd& data);
Eigen::MatrixXd read_binary_array(const std::filesystem::path& path);

// Sparse matrix, triplet text: "row col value" per line.
void write_triplets_text(const std::filesystem::path& path, const SparseMat& m);

// Sparse matrix, binary: magic "COHFSPM1", u64 rows/cols/nnz, then i64 row
// indices, i64 col indices, f64 values (little-endian triplets).
void write_matrix_binary(const std::filesystem::path& path, const SparseMat& m);
SparseMat read_matrix_binary(const std::filesystem::path& path);

// 8-bit PGM with linear value mapping; returns the (min, max) used.
std::pair<double, double> write_pgm(const std::filesystem::path& path,
                                    const Eigen::MatrixXd& values);

void write_text(const std::filesystem::path& path, const std::string& text);

// FNV-1a 64-bit content hash, hex encoded.
std::string file_checksum(const std::filesystem::path& path);

// One augmented vector as per-slab spatial grids: rows y (descending), cols x.
Eigen::MatrixXd fiber_grid(const SpaceTimeGrid& grid, const Eigen::VectorXd& vec, int slab);

}  // namespace cohflow

#endif
