#include "cohflow/generator.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

namespace cohflow {

namespace {

struct FaceNode {
  Point offset;   // relative to the face center, zero along the face axis
  double weight;  // carries the transverse surface measure
};

// Tensor-product quadrature nodes on a face orthogonal to `axis`.
std::vector<FaceNode> face_nodes(const SpaceTimeGrid& grid, int axis, int n1d) {
  const int d = grid.spatial_dims();
  std::vector<std::pair<double, double>> base;  // (relative offset, weight) on [-1/2, 1/2]
  if (n1d == 1) {
    base = {{0.0, 1.0}};
  } else if (n1d == 3) {
    const double s = 0.5 * std::sqrt(3.0 / 5.0);
    base = {{-s, 5.0 / 18.0}, {0.0, 8.0 / 18.0}, {s, 5.0 / 18.0}};
  } else {
    throw std::invalid_argument("face_quadrature must be 1 or 3");
  }
  std::vector<FaceNode> nodes;
  Point zero = Point::Zero(d);
  nodes.push_back({zero, 1.0});
  for (int b = 0; b < d; ++b) {
    if (b == axis) continue;
    std::vector<FaceNode> next;
    for (const auto& n : nodes)
      for (const auto& [pos, w] : base) {
        FaceNode fn = n;
        fn.offset[b] += pos * grid.spacing(b);
        fn.weight *= w * grid.spacing(b);
        next.push_back(fn);
      }
    nodes = std::move(next);
  }
  return nodes;
}

struct TripletSink {
  std::vector<Triplet> trips;
  std::vector<double> row_out;  // accumulated outgoing rate (incl. boundary loss)

  explicit TripletSink(Index dim) : row_out(dim, 0.0) {}

  void rate(Index from, Index to, double r) {
    if (r == 0.0) return;
    trips.emplace_back(from, to, r);
    row_out[from] += r;
  }
  void loss(Index from, double r) { row_out[from] += r; }

  SparseMat compile(Index dim) {
    for (Index i = 0; i < dim; ++i)
      if (row_out[i] != 0.0) trips.emplace_back(i, i, -row_out[i]);
    SparseMat m(dim, dim);
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    return m;
  }
};

// Signed flux integrals through the +side face of a box along `axis`:
// pos = integral of (v . n)^+, neg = integral of (v . n)^- (both >= 0),
// with n the unit normal pointing toward increasing coordinate.
template <typename Field>
void face_flux(const Field& field, double t, const Point& face_center,
               const std::vector<FaceNode>& nodes, int axis, double& pos, double& neg) {
  pos = neg = 0.0;
  Point x(face_center.size()), v(face_center.size());
  for (const auto& n : nodes) {
    x = face_center + n.offset;
    field.eval(t, x, v);
    const double vn = v[axis];
    if (vn > 0.0)
      pos += n.weight * vn;
    else
      neg -= n.weight * vn;
  }
}

// Rate convention for drift assemblies. Upwind routes each face's positive
// and negative flux parts to the two directed rates, as in the Ulam
// discretization of the generator itself. FaceSigned keeps the whole signed
// face integral on the lower-to-upper slot, which makes the perturbation
// response exactly odd in the field and matches the linearized generator.
enum class RateMode { Upwind, FaceSigned };

// Drift rates of one slab at sample time t, written for slab index `slab`.
// When `mirror_slab` >= 0, the sign-flipped rates are written there as well
// (the second-half field is the negated first-half field at the mirrored time).
void append_drift_slab(const SpaceTimeGrid& grid, const ReflectedField& field, double t,
                       int slab, int mirror_slab,
                       const std::vector<std::vector<FaceNode>>& nodes_per_axis,
                       RateMode mode, TripletSink& sink) {
  const int d = grid.spatial_dims();
  const double inv_vol = 1.0 / grid.box_volume();
  const Index sc = grid.spatial_count();
  std::vector<int> multi(d, 0);
  Point face_center(d);
  for (Index sp = 0; sp < sc; ++sp) {
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b)
        face_center[b] = grid.lower(b) + (multi[b] + 0.5) * grid.spacing(b);

      const bool at_top = multi[a] == grid.boxes(a) - 1;
      const bool interior = !at_top;
      const bool wraps = at_top && grid.periodic(a);
      // +side face, owned by this box.
      if (interior || wraps || grid.bc(a) == BoundaryCondition::Outflow) {
        face_center[a] = grid.lower(a) + (multi[a] + 1.0) * grid.spacing(a);
        double pos, neg;
        face_flux(field, t, face_center, nodes_per_axis[a], a, pos, neg);
        Index j = 0;
        if (interior) {
          multi[a] += 1;
          j = grid.spatial_flatten(multi);
          multi[a] -= 1;
        } else if (wraps) {
          const int save = multi[a];
          multi[a] = 0;
          j = grid.spatial_flatten(multi);
          multi[a] = save;
        }
        if (interior || wraps) {
          if (mode == RateMode::Upwind) {
            sink.rate(grid.flatten(slab, sp), grid.flatten(slab, j), pos * inv_vol);
            sink.rate(grid.flatten(slab, j), grid.flatten(slab, sp), neg * inv_vol);
            if (mirror_slab >= 0) {
              sink.rate(grid.flatten(mirror_slab, sp), grid.flatten(mirror_slab, j),
                        neg * inv_vol);
              sink.rate(grid.flatten(mirror_slab, j), grid.flatten(mirror_slab, sp),
                        pos * inv_vol);
            }
          } else {
            sink.rate(grid.flatten(slab, sp), grid.flatten(slab, j), (pos - neg) * inv_vol);
            if (mirror_slab >= 0)
              sink.rate(grid.flatten(mirror_slab, sp), grid.flatten(mirror_slab, j),
                        (neg - pos) * inv_vol);
          }
        } else {  // outflow top boundary: outgoing flux is lost
          const double out = mode == RateMode::Upwind ? pos : pos - neg;
          sink.loss(grid.flatten(slab, sp), out * inv_vol);
          if (mirror_slab >= 0) {
            const double mout = mode == RateMode::Upwind ? neg : neg - pos;
            sink.loss(grid.flatten(mirror_slab, sp), mout * inv_vol);
          }
        }
      }
      // -side boundary face (non-periodic axes only).
      if (multi[a] == 0 && !grid.periodic(a) && grid.bc(a) == BoundaryCondition::Outflow) {
        face_center[a] = grid.lower(a);
        double pos, neg;
        face_flux(field, t, face_center, nodes_per_axis[a], a, pos, neg);
        // outward normal is -e_a: outgoing part is neg
        const double out = mode == RateMode::Upwind ? neg : neg - pos;
        sink.loss(grid.flatten(slab, sp), out * inv_vol);
        if (mirror_slab >= 0) {
          const double mout = mode == RateMode::Upwind ? pos : pos - neg;
          sink.loss(grid.flatten(mirror_slab, sp), mout * inv_vol);
        }
      }
    }
    // advance multi-index, last axis fastest
    for (int a = d - 1; a >= 0; --a) {
      if (++multi[a] < grid.boxes(a)) break;
      multi[a] = 0;
    }
  }
}

void append_drift(const SpaceTimeGrid& grid, const ReflectedField& field,
                  const AssemblyOptions& opts, RateMode mode, TripletSink& sink) {
  const int d = grid.spatial_dims();
  std::vector<std::vector<FaceNode>> nodes_per_axis(d);
  for (int a = 0; a < d; ++a) nodes_per_axis[a] = face_nodes(grid, a, opts.face_quadrature);

  if (opts.mirror_reuse) {
    for (int s = 0; s < grid.n_time() / 2; ++s)
      append_drift_slab(grid, field, grid.slab_midpoint(s), s, grid.n_time() - 1 - s,
                        nodes_per_axis, mode, sink);
  } else {
    for (int s = 0; s < grid.n_time(); ++s)
      append_drift_slab(grid, field, grid.slab_midpoint(s), s, -1, nodes_per_axis, mode, sink);
  }
}

void append_diffusion(const SpaceTimeGrid& grid, double epsilon, TripletSink& sink) {
  if (epsilon == 0.0) return;
  const int d = grid.spatial_dims();
  if (d >= 2) {
    for (int a = 1; a < d; ++a)
      if (std::abs(grid.spacing(a) - grid.spacing(0)) > 1e-2 * grid.spacing(0))
        throw std::invalid_argument("assemble_diffusion: non-square boxes");
  }
  const Index sc = grid.spatial_count();
  std::vector<int> multi(d, 0);
  for (Index sp = 0; sp < sc; ++sp) {
    for (int a = 0; a < d; ++a) {
      const double r = epsilon * epsilon / (2.0 * grid.spacing(a) * grid.spacing(a));
      const bool at_top = multi[a] == grid.boxes(a) - 1;
      if (!at_top || grid.periodic(a)) {
        Index j;
        if (!at_top) {
          multi[a] += 1;
          j = grid.spatial_flatten(multi);
          multi[a] -= 1;
        } else {
          const int save = multi[a];
          multi[a] = 0;
          j = grid.spatial_flatten(multi);
          multi[a] = save;
        }
        for (int s = 0; s < grid.n_time(); ++s) {
          sink.rate(grid.flatten(s, sp), grid.flatten(s, j), r);
          sink.rate(grid.flatten(s, j), grid.flatten(s, sp), r);
        }
      } else if (grid.bc(a) == BoundaryCondition::Outflow) {
        for (int s = 0; s < grid.n_time(); ++s) sink.loss(grid.flatten(s, sp), r);
      }
      if (multi[a] == 0 && grid.bc(a) == BoundaryCondition::Outflow) {
        for (int s = 0; s < grid.n_time(); ++s) sink.loss(grid.flatten(s, sp), r);
      }
    }
    for (int a = d - 1; a >= 0; --a) {
      if (++multi[a] < grid.boxes(a)) break;
      multi[a] = 0;
    }
  }
}

void append_time_coupling(const SpaceTimeGrid& grid, TripletSink& sink) {
  const double r = 1.0 / grid.slab_width();
  const Index sc = grid.spatial_count();
  for (int s = 0; s < grid.n_time(); ++s) {
    const int next = (s + 1) % grid.n_time();
    for (Index sp = 0; sp < sc; ++sp)
      sink.rate(grid.flatten(s, sp), grid.flatten(next, sp), r);
  }
}

void check_domain_match(const SpaceTimeGrid& grid, const ReflectedField& field) {
  if (field.base.dim != grid.spatial_dims())
    throw std::invalid_argument("assembly: field/grid dimension mismatch");
}

}  // namespace

GeneratorMatrix assemble_drift(const SpaceTimeGrid& grid, const ReflectedField& field,
                               const AssemblyOptions& opts) {
  check_domain_match(grid, field);
  TripletSink sink(grid.dim());
  append_drift(grid, field, opts, RateMode::Upwind, sink);
  return {sink.compile(grid.dim()), grid, 0.0, GeneratorKind::FullAugmented};
}

GeneratorMatrix assemble_diffusion(const SpaceTimeGrid& grid, double epsilon) {
  if (epsilon < 0.0) throw std::invalid_argument("assemble_diffusion: epsilon < 0");
  TripletSink sink(grid.dim());
  append_diffusion(grid, epsilon, sink);
  return {sink.compile(grid.dim()), grid, epsilon, GeneratorKind::FullAugmented};
}

GeneratorMatrix assemble_augmented(const SpaceTimeGrid& grid, const ReflectedField& field,
                                   double epsilon, const AssemblyOptions& opts) {
  check_domain_match(grid, field);
  if (epsilon < 0.0) throw std::invalid_argument("assemble_augmented: epsilon < 0");
  TripletSink sink(grid.dim());
  append_drift(grid, field, opts, RateMode::Upwind, sink);
  append_diffusion(grid, epsilon, sink);
  append_time_coupling(grid, sink);
  return {sink.compile(grid.dim()), grid, epsilon, GeneratorKind::FullAugmented};
}

GeneratorMatrix slice_generator(const GeneratorMatrix& augmented, int slab) {
  if (augmented.kind != GeneratorKind::FullAugmented)
    throw std::invalid_argument("slice_generator: input must be a full augmented assembly");
  const SpaceTimeGrid& grid = augmented.grid;
  if (slab < 0 || slab >= grid.n_time())
    throw std::out_of_range("slice_generator: slab out of range");
  const Index sc = grid.spatial_count();
  const Index off = grid.flatten(slab, 0);
  SparseMat block = augmented.matrix.block(off, off, sc, sc);
  // The time-advance rate 1/h sits on every diagonal; remove it.
  SparseMat eye(sc, sc);
  eye.setIdentity();
  block = (block + (1.0 / grid.slab_width()) * eye).pruned();
  block.makeCompressed();
  return {block, grid, augmented.epsilon, GeneratorKind::SpatialSlab};
}

GeneratorMatrix perturbation_generator(const SpaceTimeGrid& grid, const ReflectedField& phi,
                                       const AssemblyOptions& opts) {
  check_domain_match(grid, phi);
  if (!phi.base.divergence_free) {
    std::vector<std::array<double, 2>> bounds;
    for (int a = 0; a < grid.spatial_dims(); ++a)
      bounds.push_back({grid.lower(a) + grid.spacing(a), grid.upper(a) - grid.spacing(a)});
    const double div = divergence_check(phi.base, bounds, 256);
    if (div > 1e-6)
      std::fprintf(stderr,
                   "cohflow: warning: perturbation field has max |div| = %.3e\n", div);
  }
  TripletSink sink(grid.dim());
  append_drift(grid, phi, opts, RateMode::FaceSigned, sink);
  return {sink.compile(grid.dim()), grid, 0.0, GeneratorKind::PerturbationDrift};
}

double max_abs_diagonal(const SparseMat& m) {
  double v = 0.0;
  for (Index i = 0; i < m.outerSize(); ++i)
    v = std::max(v, std::abs(m.coeff(i, i)));
  return v;
}

}  // namespace cohflow
