#ifndef COHFLOW_COHERENT_HPP
#define COHFLOW_COHERENT_HPP

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "cohflow/grid.hpp"
#include "cohflow/velocity.hpp"

namespace cohflow {

// Box-resolved family of sets {A_t} for t in [0, tau], one boolean mask per
// slab boundary 0, h, ..., tau (n_time/2 + 1 masks over the spatial boxes).
struct BoxFamily {
  SpaceTimeGrid grid;
  // rows: boundary index 0..n_time/2, cols: spatial boxes
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> membership;

  int boundaries() const { return static_cast<int>(membership.rows()); }
  bool member(int boundary, Index box) const { return membership(boundary, box) != 0; }
  // Nearest-boundary mask lookup for t in [0, tau].
  int boundary_of_time(double t) const;
  Eigen::Index count_at(int boundary) const;
};

// Level-set family A_t = { +/- f(t, .) >= 0 } from an augmented eigenvector,
// restricted to the slabs covering [0, tau]. Boundary j takes slab j's fiber
// (boundary n/2 takes the first second-half fiber).
BoxFamily level_set_family(const SpaceTimeGrid& grid, const Eigen::VectorXd& eigvec, int sign);

// Sparse basis extracted from a set of eigenvectors by soft-thresholded
// orthogonal rotation; columns are max-normalized.
struct SparseBasis {
  Eigen::MatrixXd vectors;
  Eigen::MatrixXd rotation;
  double threshold = 0.0;
  int iterations = 0;
  bool converged = true;
};

struct SebaOptions {
  double rotation_tol = 1e-12;
  int max_iterations = 5000;
};

SparseBasis seba(const Eigen::MatrixXd& vectors, const SebaOptions& opts = {});

struct ContributionResult {
  Eigen::VectorXd alphas;          // adjusted coefficients
  std::vector<int> zeroed;         // indices whose contribution was negative
  Eigen::VectorXd contributions;   // s_i before adjustment
};

// Zeroes every coefficient whose signed contribution over the slab-tau
// positive part is negative: s_i = alpha_i * sum_{A_tau^+} f_i(tau, .) vol.
ContributionResult contribution_check(const Eigen::VectorXd& alphas,
                                      const Eigen::MatrixXd& eigvecs, const BoxFamily& family);

// Lower bound e^{mu tau} / (||f(0,.)||_inf |A_0|) on the coherence ratio of
// the level-set family, after rescaling f so the slab-tau fiber has discrete
// L1 norm 2.
double coherence_bound(double mu, const Eigen::VectorXd& eigvec, int sign,
                       const SpaceTimeGrid& grid);

// Moving-boundary family given by a parameterization a(t, r) of the boundary
// of A_t; b = da/dt and tangent = da/dr are analytic. The parameterization
// runs counterclockwise so the outward normal is (tangent.y, -tangent.x).
struct ParamFamily {
  double tau = 0.0;
  double r_lo = 0.0, r_hi = 1.0;
  std::function<Eigen::Vector2d(double t, double r)> position;
  std::function<Eigen::Vector2d(double t, double r)> velocity;  // da/dt
  std::function<Eigen::Vector2d(double t, double r)> tangent;   // da/dr
};

// Circle of the given radius around a moving center (counterclockwise).
ParamFamily translating_disk(double tau, std::function<Eigen::Vector2d(double)> center,
                             std::function<Eigen::Vector2d(double)> center_velocity,
                             double radius);

// Family mirrored onto [0, 2 tau] in synchrony with the reflected field.
ParamFamily reflect_family(const ParamFamily& family, double tau);

struct FluxOptions {
  int time_nodes = 200;
  int boundary_nodes = 200;
};

// Integral over [0, tau] x boundary of <v - b, n>^+ dS dt (positive part),
// or of |<v - b, n>| when positive_part is false.
template <typename Field>
double cumulative_outflux(const ParamFamily& family, const Field& field, bool positive_part,
                          const FluxOptions& opts = {});

// The same flux computed as an instantaneous surface integral over the
// augmented (space-time) lateral boundary, with the augmented normal built
// from (-<b, n>, n); the flat caps at t = 0, tau carry no flux.
template <typename Field>
double augmented_flux(const ParamFamily& family, const Field& field, bool absolute,
                      const FluxOptions& opts = {});

}  // namespace cohflow

#endif
