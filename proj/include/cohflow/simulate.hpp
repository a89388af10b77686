#ifndef COHFLOW_SIMULATE_HPP
#define COHFLOW_SIMULATE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "cohflow/coherent.hpp"
#include "cohflow/generator.hpp"
#include "cohflow/velocity.hpp"

namespace cohflow {

enum class Scheme { EulerMaruyama, Rk4Maruyama };

struct ParticleEnsemble {
  Eigen::MatrixXd positions;     // d x N
  std::vector<std::uint8_t> alive;
  double time = 0.0;
  std::uint64_t seed = 0;        // stream ids derive from (seed, particle id)

  Eigen::Index count() const { return positions.cols(); }
};

// N particles seeded uniformly over the spatial rectangle of the grid.
ParticleEnsemble seed_uniform(const SpaceTimeGrid& grid, Eigen::Index n, std::uint64_t seed);

// N particles seeded uniformly inside the slab-0 members of the family.
ParticleEnsemble seed_in_family(const BoxFamily& family, Eigen::Index n, std::uint64_t seed);

// Advance the SDE dx = v dt + eps dW from t0 to t1 in steps of dt: the drift
// moves by the chosen scheme, noise is added once per step, and positions are
// reflected / wrapped / killed according to the grid's boundary conditions.
void integrate_ensemble(const VelocityField& field, double epsilon, ParticleEnsemble& ensemble,
                        double t0, double t1, double dt, Scheme scheme,
                        const SpaceTimeGrid& grid);

struct CoherenceEstimate {
  double ratio = 0.0;
  double stderror = 0.0;
  Eigen::Index stayed = 0;
  Eigen::Index total = 0;
  double check_interval = 0.0;
};

// Monte Carlo estimate of the coherence ratio: the fraction of particles
// seeded uniformly in the slab-0 family that remain inside the family mask at
// every integrator step over [0, tau]. Membership is looked up at the nearest
// slab boundary. With uniform seeding the measure factors cancel, so the
// estimate is the stay probability with binomial standard error.
CoherenceEstimate coherence_ratio_mc(const BoxFamily& family, const VelocityField& field,
                                     double epsilon, Eigen::Index n, double dt,
                                     std::uint64_t seed,
                                     Scheme scheme = Scheme::Rk4Maruyama);

// y ~= exp(t A) v through an Arnoldi approximation with adaptive substepping.
Eigen::VectorXd krylov_expmv(const SparseMat& A, const Eigen::VectorXd& v, double t,
                             int subspace = 30, double tol = 1e-10);

// Applies exp(h G_s) for each generator in `slices`, in the order given.
Eigen::VectorXd propagate_density(const std::vector<const GeneratorMatrix*>& slices,
                                  const Eigen::VectorXd& f0, double h, int subspace = 30,
                                  double tol = 1e-10);

}  // namespace cohflow

#endif
