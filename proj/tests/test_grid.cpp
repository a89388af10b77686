#include <doctest.h>

#include "cohflow/grid.hpp"

using namespace cohflow;

namespace {

GridConfig double_gyre_config() {
  GridConfig c;
  c.tau = 4.0;
  c.n_time = 80;
  c.bounds = {{0.0, 2.0}, {0.0, 1.0}};
  c.boxes = {100, 50};
  c.bc = {BoundaryCondition::Reflecting, BoundaryCondition::Reflecting};
  return c;
}

Point pt(double x, double y) {
  Point p(2);
  p << x, y;
  return p;
}

}  // namespace

TEST_CASE("double gyre grid dimensions") {
  const SpaceTimeGrid g = build_grid(double_gyre_config());
  CHECK(g.slab_width() == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(g.spacing(0) == doctest::Approx(0.02).epsilon(1e-14));
  CHECK(g.spacing(1) == doctest::Approx(0.02).epsilon(1e-14));
  CHECK(g.dim() == 400000);
  CHECK(g.box_volume() == doctest::Approx(4e-4));
}

TEST_CASE("minimal grid") {
  GridConfig c;
  c.tau = 1.0;
  c.n_time = 2;
  c.bounds = {{0.0, 1.0}};
  c.boxes = {1};
  c.bc = {BoundaryCondition::Reflecting};
  const SpaceTimeGrid g = build_grid(c);
  CHECK(g.dim() == 2);
  CHECK(g.slab_width() == doctest::Approx(1.0));
}

TEST_CASE("bickley grid dimensions") {
  GridConfig c;
  c.tau = 9.0;
  c.n_time = 108;
  c.bounds = {{0.0, 3.14159265358979323846 * 6.371}, {-3.0, 3.0}};
  c.boxes = {120, 36};
  c.bc = {BoundaryCondition::Periodic, BoundaryCondition::Outflow};
  const SpaceTimeGrid g = build_grid(c);
  CHECK(g.slab_width() == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(g.dim() == 466560);
}

TEST_CASE("grid construction errors") {
  GridConfig c = double_gyre_config();
  c.n_time = 7;
  CHECK_THROWS_AS(build_grid(c), std::invalid_argument);
  c = double_gyre_config();
  c.boxes[0] = 0;
  CHECK_THROWS_AS(build_grid(c), std::invalid_argument);
  c = double_gyre_config();
  c.bounds[1] = {1.0, 1.0};
  CHECK_THROWS_AS(build_grid(c), std::invalid_argument);
}

TEST_CASE("locate basics") {
  GridConfig c;
  c.tau = 1.0;
  c.n_time = 2;
  c.bounds = {{0.0, 1.0}};
  c.boxes = {1};
  c.bc = {BoundaryCondition::Reflecting};
  const SpaceTimeGrid g = build_grid(c);
  Point x(1);
  x << 0.7;
  CHECK(locate(g, 0.3, x) == 0);  // slab 0
  CHECK(locate(g, 1.3, x) == 1);  // slab 1

  const SpaceTimeGrid dg = build_grid(double_gyre_config());
  CHECK(locate(dg, 0.0, pt(0.011, 0.011)) == 0);
  CHECK_THROWS_AS(locate(dg, 0.0, pt(2.5, 0.5)), std::out_of_range);
}

TEST_CASE("periodic axis wraps") {
  GridConfig c;
  c.tau = 2.0;
  c.n_time = 4;
  c.bounds = {{0.0, 2.0}, {0.0, 1.0}};
  c.boxes = {10, 5};
  c.bc = {BoundaryCondition::Periodic, BoundaryCondition::Reflecting};
  const SpaceTimeGrid g = build_grid(c);
  CHECK(locate(g, 0.1, pt(2.3, 0.4)) == locate(g, 0.1, pt(0.3, 0.4)));
  CHECK(locate(g, 0.1, pt(-0.3, 0.4)) == locate(g, 0.1, pt(1.7, 0.4)));
}

TEST_CASE("locate inverts center lookup") {
  GridConfig c;
  c.tau = 1.5;
  c.n_time = 6;
  c.bounds = {{-1.0, 1.0}, {0.0, 0.5}};
  c.boxes = {7, 3};
  c.bc = {BoundaryCondition::Reflecting, BoundaryCondition::Outflow};
  const SpaceTimeGrid g = build_grid(c);
  for (Index i = 0; i < g.dim(); ++i) {
    const auto [t, x] = g.center(i);
    CHECK(locate(g, t, x) == i);
  }
}

TEST_CASE("flat index round trips") {
  GridConfig c;
  c.tau = 1.0;
  c.n_time = 4;
  c.bounds = {{0.0, 1.0}, {0.0, 2.0}};
  c.boxes = {3, 5};
  c.bc = {BoundaryCondition::Reflecting, BoundaryCondition::Periodic};
  const SpaceTimeGrid g = build_grid(c);
  for (Index i = 0; i < g.dim(); ++i) {
    const int slab = g.slab_of_index(i);
    const Index sp = g.spatial_of_index(i);
    CHECK(g.flatten(slab, sp) == i);
    CHECK(g.spatial_flatten(g.spatial_unflatten(sp)) == sp);
  }
}

TEST_CASE("boundary points go to the lower-index box") {
  GridConfig c;
  c.tau = 1.0;
  c.n_time = 2;
  c.bounds = {{0.0, 1.0}};
  c.boxes = {4};
  c.bc = {BoundaryCondition::Reflecting};
  const SpaceTimeGrid g = build_grid(c);
  Point x(1);
  x << 0.5;  // exactly on the face between boxes 1 and 2
  CHECK(g.spatial_of_index(locate(g, 0.0, x)) == 1);
  x << 1.0;  // domain upper edge stays inside
  CHECK(g.spatial_of_index(locate(g, 0.0, x)) == 3);
}
