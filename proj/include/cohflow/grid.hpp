#ifndef COHFLOW_GRID_HPP
#define COHFLOW_GRID_HPP

#include <array>
#include <string>
#include <vector>

#include "cohflow/types.hpp"

namespace cohflow {

enum class BoundaryCondition { Reflecting, Outflow, Periodic };

std::string to_string(BoundaryCondition bc);
BoundaryCondition boundary_condition_from_string(const std::string& name);

struct GridConfig {
  double tau = 1.0;
  int n_time = 2;  // slabs on [0, 2*tau]; must be even
  std::vector<std::array<double, 2>> bounds;
  std::vector<int> boxes;
  std::vector<BoundaryCondition> bc;
};

// Uniform partition of the doubled time circle [0, 2*tau) x spatial rectangle.
// Immutable after construction; flat indexing is slab-major, then row-major
// over the spatial axes (last axis fastest).
class SpaceTimeGrid {
 public:
  SpaceTimeGrid() = default;

  double tau() const { return tau_; }
  int n_time() const { return n_time_; }
  double slab_width() const { return h_; }
  int spatial_dims() const { return static_cast<int>(lo_.size()); }
  double lower(int axis) const { return lo_[axis]; }
  double upper(int axis) const { return hi_[axis]; }
  double extent(int axis) const { return hi_[axis] - lo_[axis]; }
  int boxes(int axis) const { return n_[axis]; }
  double spacing(int axis) const { return delta_[axis]; }
  BoundaryCondition bc(int axis) const { return bc_[axis]; }
  bool periodic(int axis) const { return bc_[axis] == BoundaryCondition::Periodic; }

  Index spatial_count() const { return spatial_count_; }
  Index dim() const { return static_cast<Index>(n_time_) * spatial_count_; }
  double box_volume() const { return box_volume_; }
  // Area of a face orthogonal to `axis` (product of the other spacings).
  double face_area(int axis) const { return face_area_[axis]; }

  double slab_midpoint(int slab) const { return (slab + 0.5) * h_; }
  int slab_of_time(double t) const;

  Index spatial_flatten(const std::vector<int>& multi) const;
  std::vector<int> spatial_unflatten(Index spatial_index) const;
  Index flatten(int slab, Index spatial_index) const {
    return static_cast<Index>(slab) * spatial_count_ + spatial_index;
  }
  int slab_of_index(Index flat) const { return static_cast<int>(flat / spatial_count_); }
  Index spatial_of_index(Index flat) const { return flat % spatial_count_; }

  // Center of the box with the given flat index, as (time, point).
  std::pair<double, Point> center(Index flat) const;
  Point spatial_center(Index spatial_index) const;

  friend SpaceTimeGrid build_grid(const GridConfig& config);

 private:
  double tau_ = 0.0;
  int n_time_ = 0;
  double h_ = 0.0;
  std::vector<double> lo_, hi_, delta_;
  std::vector<int> n_;
  std::vector<BoundaryCondition> bc_;
  Index spatial_count_ = 0;
  double box_volume_ = 0.0;
  std::vector<double> face_area_;
};

SpaceTimeGrid build_grid(const GridConfig& config);

// Flat index of the box containing (t, x). Time wraps modulo 2*tau; periodic
// spatial axes wrap, other axes must contain x. Boundary points go to the
// lower-index box (half-open boxes).
Index locate(const SpaceTimeGrid& grid, double t, const Point& x);

}  // namespace cohflow

#endif
