#ifndef COHFLOW_TYPES_HPP
#define COHFLOW_TYPES_HPP

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <complex>

namespace cohflow {

// Spatial points and velocity vectors; dynamic size, stack storage up to d=3.
using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;

using Complex = std::complex<double>;
using SparseMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Index = SparseMat::StorageIndex;

}  // namespace cohflow

#endif
