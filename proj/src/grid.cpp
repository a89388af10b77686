#include "cohflow/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace cohflow {

std::string to_string(BoundaryCondition bc) {
  switch (bc) {
    case BoundaryCondition::Reflecting: return "reflecting";
    case BoundaryCondition::Outflow: return "outflow";
    case BoundaryCondition::Periodic: return "periodic";
  }
  return "?";
}

BoundaryCondition boundary_condition_from_string(const std::string& name) {
  if (name == "reflecting") return BoundaryCondition::Reflecting;
  if (name == "outflow") return BoundaryCondition::Outflow;
  if (name == "periodic") return BoundaryCondition::Periodic;
  throw std::invalid_argument("unknown boundary condition: " + name);
}

SpaceTimeGrid build_grid(const GridConfig& config) {
  if (config.n_time < 2 || config.n_time % 2 != 0)
    throw std::invalid_argument("n_time must be even and >= 2");
  if (!(config.tau > 0.0) || !std::isfinite(config.tau))
    throw std::invalid_argument("tau must be positive and finite");
  const size_t d = config.bounds.size();
  if (d == 0 || d > 3) throw std::invalid_argument("spatial dimension must be 1..3");
  if (config.boxes.size() != d || config.bc.size() != d)
    throw std::invalid_argument("bounds, boxes and bc must have matching sizes");

  SpaceTimeGrid g;
  g.tau_ = config.tau;
  g.n_time_ = config.n_time;
  g.h_ = 2.0 * config.tau / config.n_time;
  g.spatial_count_ = 1;
  g.box_volume_ = 1.0;
  for (size_t a = 0; a < d; ++a) {
    const double lo = config.bounds[a][0], hi = config.bounds[a][1];
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
      throw std::invalid_argument("degenerate bounds on axis " + std::to_string(a));
    if (config.boxes[a] < 1)
      throw std::invalid_argument("box count must be >= 1 on axis " + std::to_string(a));
    g.lo_.push_back(lo);
    g.hi_.push_back(hi);
    g.n_.push_back(config.boxes[a]);
    g.delta_.push_back((hi - lo) / config.boxes[a]);
    g.bc_.push_back(config.bc[a]);
    g.spatial_count_ *= config.boxes[a];
    g.box_volume_ *= g.delta_.back();
  }
  for (size_t a = 0; a < d; ++a) g.face_area_.push_back(g.box_volume_ / g.delta_[a]);
  return g;
}

int SpaceTimeGrid::slab_of_time(double t) const {
  const double period = 2.0 * tau_;
  double w = std::fmod(t, period);
  if (w < 0) w += period;
  int s = static_cast<int>(std::floor(w / h_));
  if (s >= n_time_) s = n_time_ - 1;  // w == period - eps rounding
  return s;
}

Index SpaceTimeGrid::spatial_flatten(const std::vector<int>& multi) const {
  Index idx = 0;
  for (size_t a = 0; a < n_.size(); ++a) idx = idx * n_[a] + multi[a];
  return idx;
}

std::vector<int> SpaceTimeGrid::spatial_unflatten(Index spatial_index) const {
  std::vector<int> multi(n_.size());
  for (int a = static_cast<int>(n_.size()) - 1; a >= 0; --a) {
    multi[a] = static_cast<int>(spatial_index % n_[a]);
    spatial_index /= n_[a];
  }
  return multi;
}

Point SpaceTimeGrid::spatial_center(Index spatial_index) const {
  const auto multi = spatial_unflatten(spatial_index);
  Point x(spatial_dims());
  for (int a = 0; a < spatial_dims(); ++a) x[a] = lo_[a] + (multi[a] + 0.5) * delta_[a];
  return x;
}

std::pair<double, Point> SpaceTimeGrid::center(Index flat) const {
  return {slab_midpoint(slab_of_index(flat)), spatial_center(spatial_of_index(flat))};
}

Index locate(const SpaceTimeGrid& grid, double t, const Point& x) {
  if (x.size() != grid.spatial_dims())
    throw std::invalid_argument("locate: point dimension mismatch");
  std::vector<int> multi(grid.spatial_dims());
  for (int a = 0; a < grid.spatial_dims(); ++a) {
    double v = x[a];
    const double len = grid.extent(a);
    if (grid.periodic(a)) {
      v = std::fmod(v - grid.lower(a), len);
      if (v < 0) v += len;
      v += grid.lower(a);
    } else if (v < grid.lower(a) || v > grid.upper(a)) {
      throw std::out_of_range("locate: point outside non-periodic axis " + std::to_string(a));
    }
    const double pos = (v - grid.lower(a)) / grid.spacing(a);
    int i = static_cast<int>(std::floor(pos));
    if (i >= 1 && pos == static_cast<double>(i)) --i;  // faces go to the lower box
    if (i < 0) i = 0;
    if (i >= grid.boxes(a)) i = grid.boxes(a) - 1;
    multi[a] = i;
  }
  return grid.flatten(grid.slab_of_time(t), grid.spatial_flatten(multi));
}

}  // namespace cohflow
