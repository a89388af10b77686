#ifndef COHFLOW_SPECTRAL_HPP
#define COHFLOW_SPECTRAL_HPP

#include <Eigen/Dense>
#include <optional>

#include "cohflow/generator.hpp"

namespace cohflow {

enum class Ordering { SmallestMagnitude, LargestReal };

struct SpectrumOptions {
  int count = 6;
  Ordering ordering = Ordering::SmallestMagnitude;
  // Shift for the shift-invert transform; by default -gamma with
  // gamma = shift_gamma_rel * max |diagonal| (the assembly is singular at 0).
  std::optional<double> shift;
  double shift_gamma_rel = 1e-3;
  int subspace = 0;         // 0 -> max(4 * count, 40)
  int max_restarts = 50;
  double arnoldi_tol = 1e-10;  // inverse-operator residual estimate
  double residual_tol = 0.0;   // on the original matrix; 0 -> 1e-9 * max(1, scale)
};

struct SpectrumResult {
  Eigen::VectorXcd eigenvalues;
  Eigen::MatrixXcd right_vectors;   // columns, indexed (slab-major, box)
  Eigen::MatrixXcd left_vectors;    // empty unless left/right pairs requested
  Eigen::VectorXd residual_norms;   // ||G w - mu w|| / ||w|| per right pair
  Complex shift{0.0, 0.0};
  Ordering ordering = Ordering::SmallestMagnitude;

  int count() const { return static_cast<int>(eigenvalues.size()); }
};

// Dominant eigenpairs by shift-invert Arnoldi: sparse LU at the shift,
// restarted Arnoldi with locking on the inverse action, Rayleigh-quotient
// back-transform, residuals verified against the original matrix.
SpectrumResult leading_spectrum(const GeneratorMatrix& G, const SpectrumOptions& opts = {});

// Right and left eigenpairs at matching eigenvalues, normalized so that
// <f, f> = 1 (Hermitian) and <g, f> = 1 (bilinear) in the volume-weighted
// space-time inner product. Requires the target eigenvalues to be simple.
SpectrumResult left_right_pairs(const GeneratorMatrix& G, const SpectrumOptions& opts = {});

// Discrete space-time L2 weight of one box (volume x slab width for the
// augmented layout, plain volume for a spatial slab vector).
double inner_weight(const SpaceTimeGrid& grid, Index vector_dim);

// sigma = exp(tau Re mu) cos(tau Im mu); real for genuine modes where
// Im mu = k pi / tau.
double to_singular_value(Complex mu, double tau);

// Lattice shift mu^(k) = (1 - omega^k) / h, omega = exp(2 pi i h / (2 tau)).
Complex companion_shift(int k, double h, double tau);

// Correlation <psi_k w_m, w_n> / (||psi_k w_m|| ||w_n||) with psi_k the
// temporal phase exp(2 pi i k t_s / (2 tau)) applied per slab fiber.
Complex companion_correlation(const Eigen::VectorXcd& wm, const Eigen::VectorXcd& wn, int k,
                              const SpaceTimeGrid& grid);

struct TrackResult {
  int index = -1;
  double correlation = 0.0;
};

// Index of the spectrum column best correlated with the reference vector.
// Throws if the best |correlation| falls below the threshold.
TrackResult track_eigenpair(const Eigen::VectorXcd& reference, const SpectrumResult& spectrum,
                            double threshold = 0.5);

}  // namespace cohflow

#endif
