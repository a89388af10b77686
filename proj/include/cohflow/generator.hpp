#ifndef COHFLOW_GENERATOR_HPP
#define COHFLOW_GENERATOR_HPP

#include "cohflow/grid.hpp"
#include "cohflow/velocity.hpp"

namespace cohflow {

enum class GeneratorKind { FullAugmented, SpatialSlab, PerturbationDrift };

// Sparse rate matrix in row convention: entry (i, j) is the rate from box i
// to box j; the diagonal balances so rows sum to zero under reflecting
// boundaries (and to the negative loss under outflow). Densities evolve by
// the transpose.
struct GeneratorMatrix {
  SparseMat matrix;
  SpaceTimeGrid grid;
  double epsilon = 0.0;
  GeneratorKind kind = GeneratorKind::FullAugmented;

  Index dim() const { return static_cast<Index>(matrix.rows()); }
};

struct AssemblyOptions {
  // Quadrature nodes per transverse face axis: 1 (midpoint) or 3 (Gauss).
  int face_quadrature = 1;
  // Reuse signed face integrals of the first half for the mirrored slabs.
  bool mirror_reuse = false;
};

// Drift rates from face fluxes of the reflected field, per slab:
// rate(i->j) = (1/vol) * integral over the shared face of max(<v, n>, 0).
GeneratorMatrix assemble_drift(const SpaceTimeGrid& grid, const ReflectedField& field,
                               const AssemblyOptions& opts = {});

// Diffusive exchange eps^2 / (2 delta^2) between spatial face neighbors.
GeneratorMatrix assemble_diffusion(const SpaceTimeGrid& grid, double epsilon);

// Full augmented generator: per-slab drift + diffusion plus the cyclic
// time-advance rate 1/h between consecutive slabs.
GeneratorMatrix assemble_augmented(const SpaceTimeGrid& grid, const ReflectedField& field,
                                   double epsilon, const AssemblyOptions& opts = {});

// Spatial block of one slab (drift + diffusion at that slab's midpoint time),
// with the time-coupling rates removed.
GeneratorMatrix slice_generator(const GeneratorMatrix& augmented, int slab);

// Drift-only rate matrix of a (reflected) perturbation field, assembled with
// the same face quadrature as assemble_drift. Used as the linearized
// generator response E_l; warns if the field is not divergence free.
GeneratorMatrix perturbation_generator(const SpaceTimeGrid& grid, const ReflectedField& phi,
                                       const AssemblyOptions& opts = {});

double max_abs_diagonal(const SparseMat& m);

}  // namespace cohflow

#endif
