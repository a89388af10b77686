#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "cohflow/generator.hpp"

using namespace cohflow;

namespace {

GridConfig grid_1d(int n_time, int boxes, BoundaryCondition bc, double tau = 1.0) {
  GridConfig c;
  c.tau = tau;
  c.n_time = n_time;
  c.bounds = {{0.0, 1.0}};
  c.boxes = {boxes};
  c.bc = {bc};
  return c;
}

GridConfig small_double_gyre(int n_time, int nx, int ny) {
  GridConfig c;
  c.tau = 4.0;
  c.n_time = n_time;
  c.bounds = {{0.0, 2.0}, {0.0, 1.0}};
  c.boxes = {nx, ny};
  c.bc = {BoundaryCondition::Reflecting, BoundaryCondition::Reflecting};
  return c;
}

VelocityField constant1(double value) {
  Point v(1);
  v << value;
  return constant_field(v, 1.0);
}

// Independent dense assembly of the augmented generator, written as plain
// loops straight from the flux, stencil and coupling formulas.
Eigen::MatrixXd dense_oracle(const SpaceTimeGrid& g, const ReflectedField& field,
                             double epsilon) {
  const Eigen::Index n = g.dim();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  const int d = g.spatial_dims();
  for (int s = 0; s < g.n_time(); ++s) {
    const double t = g.slab_midpoint(s);
    for (Index sp = 0; sp < g.spatial_count(); ++sp) {
      const auto multi = g.spatial_unflatten(sp);
      const Index row = g.flatten(s, sp);
      for (int a = 0; a < d; ++a) {
        const double area = g.face_area(a);
        // +side face
        Point x = g.spatial_center(sp);
        x[a] += 0.5 * g.spacing(a);
        Point v(d);
        field.eval(t, x, v);
        const double flux_out = std::max(v[a], 0.0) * area / g.box_volume();
        const double flux_in = std::max(-v[a], 0.0) * area / g.box_volume();
        if (multi[a] + 1 < g.boxes(a) || g.periodic(a)) {
          auto nb = multi;
          nb[a] = (multi[a] + 1) % g.boxes(a);
          const Index col = g.flatten(s, g.spatial_flatten(nb));
          A(row, col) += flux_out;
          A(row, row) -= flux_out;
          A(col, row) += flux_in;
          A(col, col) -= flux_in;
        } else if (g.bc(a) == BoundaryCondition::Outflow) {
          A(row, row) -= flux_out;
        }
        // -side boundary face
        if (multi[a] == 0 && g.bc(a) == BoundaryCondition::Outflow) {
          Point xb = g.spatial_center(sp);
          xb[a] -= 0.5 * g.spacing(a);
          field.eval(t, xb, v);
          A(row, row) -= std::max(-v[a], 0.0) * area / g.box_volume();
        }
        // diffusion
        if (epsilon > 0.0) {
          const double r = epsilon * epsilon / (2.0 * g.spacing(a) * g.spacing(a));
          for (const int dir : {+1, -1}) {
            const int ni = multi[a] + dir;
            if (ni >= 0 && ni < g.boxes(a)) {
              auto nb = multi;
              nb[a] = ni;
              A(row, g.flatten(s, g.spatial_flatten(nb))) += r;
              A(row, row) -= r;
            } else if (g.periodic(a)) {
              auto nb = multi;
              nb[a] = (ni + g.boxes(a)) % g.boxes(a);
              A(row, g.flatten(s, g.spatial_flatten(nb))) += r;
              A(row, row) -= r;
            } else if (g.bc(a) == BoundaryCondition::Outflow) {
              A(row, row) -= r;
            }
          }
        }
      }
      // time coupling
      const Index next = g.flatten((s + 1) % g.n_time(), sp);
      A(row, next) += 1.0 / g.slab_width();
      A(row, row) -= 1.0 / g.slab_width();
    }
  }
  return A;
}

}  // namespace

TEST_CASE("drift rates for a constant 1-D field") {
  const SpaceTimeGrid g = build_grid(grid_1d(2, 2, BoundaryCondition::Reflecting));
  const GeneratorMatrix aug = assemble_augmented(g, reflect(constant1(1.0), 1.0), 0.0);
  const GeneratorMatrix slab0 = slice_generator(aug, 0);
  // volume 0.5 boxes: rate(0 -> 1) = 1 / 0.5 = 2
  CHECK(slab0.matrix.coeff(0, 0) == doctest::Approx(-2.0));
  CHECK(slab0.matrix.coeff(0, 1) == doctest::Approx(2.0));
  CHECK(slab0.matrix.coeff(1, 0) == doctest::Approx(0.0));
  CHECK(slab0.matrix.coeff(1, 1) == doctest::Approx(0.0));
  // second half carries the negated field: flux reverses
  const GeneratorMatrix slab1 = slice_generator(aug, 1);
  CHECK(slab1.matrix.coeff(1, 0) == doctest::Approx(2.0));
  CHECK(slab1.matrix.coeff(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("zero field gives a zero drift matrix") {
  const SpaceTimeGrid g = build_grid(grid_1d(4, 5, BoundaryCondition::Reflecting));
  const GeneratorMatrix drift = assemble_drift(g, reflect(constant1(0.0), 1.0));
  CHECK(drift.matrix.norm() == 0.0);
}

TEST_CASE("negating the field reverses which face carries flux") {
  // off-diagonal rates transpose exactly; on a periodic grid (no boundary
  // losses) the whole matrices are transposes of each other
  const SpaceTimeGrid g = build_grid(grid_1d(2, 8, BoundaryCondition::Reflecting));
  const GeneratorMatrix plus = assemble_drift(g, reflect(constant1(0.7), 1.0));
  const GeneratorMatrix minus = assemble_drift(g, reflect(constant1(-0.7), 1.0));
  const Eigen::MatrixXd p = Eigen::MatrixXd(plus.matrix);
  const Eigen::MatrixXd m = Eigen::MatrixXd(minus.matrix);
  Eigen::MatrixXd off = p.transpose() - m;
  off.diagonal().setZero();
  CHECK(off.cwiseAbs().maxCoeff() < 1e-14);

  const SpaceTimeGrid gp = build_grid(grid_1d(2, 8, BoundaryCondition::Periodic));
  const GeneratorMatrix pp = assemble_drift(gp, reflect(constant1(0.7), 1.0));
  const GeneratorMatrix pm = assemble_drift(gp, reflect(constant1(-0.7), 1.0));
  CHECK((SparseMat(pp.matrix.transpose()) - pm.matrix).norm() < 1e-14);
}

TEST_CASE("diffusion stencil in 1-D") {
  const SpaceTimeGrid g = build_grid(grid_1d(2, 3, BoundaryCondition::Reflecting));
  const double eps = 0.3;
  const double r = eps * eps / (2.0 * g.spacing(0) * g.spacing(0));
  const GeneratorMatrix diff = assemble_diffusion(g, eps);
  CHECK(diff.matrix.coeff(1, 0) == doctest::Approx(r));
  CHECK(diff.matrix.coeff(1, 1) == doctest::Approx(-2.0 * r));
  CHECK(diff.matrix.coeff(1, 2) == doctest::Approx(r));
  CHECK(diff.matrix.coeff(0, 0) == doctest::Approx(-r));  // reflecting edge

  CHECK(assemble_diffusion(g, 0.0).matrix.norm() == 0.0);
}

TEST_CASE("2x2 reflecting diffusion has two neighbors per box and zero row sums") {
  GridConfig c;
  c.tau = 1.0;
  c.n_time = 2;
  c.bounds = {{0.0, 1.0}, {0.0, 1.0}};
  c.boxes = {2, 2};
  c.bc = {BoundaryCondition::Reflecting, BoundaryCondition::Reflecting};
  const SpaceTimeGrid g = build_grid(c);
  const GeneratorMatrix diff = assemble_diffusion(g, 0.2);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(g.dim());
  CHECK((diff.matrix * ones).cwiseAbs().maxCoeff() < 1e-14);
  // every box couples to exactly 2 spatial neighbors
  Eigen::VectorXi offdiag = Eigen::VectorXi::Zero(g.dim());
  for (int k = 0; k < diff.matrix.outerSize(); ++k)
    for (SparseMat::InnerIterator it(diff.matrix, k); it; ++it)
      if (it.row() != it.col()) offdiag[it.row()] += 1;
  CHECK(offdiag.minCoeff() == 2);
  CHECK(offdiag.maxCoeff() == 2);
}

TEST_CASE("non-square boxes are rejected for 2-D diffusion") {
  GridConfig c;
  c.tau = 1.0;
  c.n_time = 2;
  c.bounds = {{0.0, 2.0}, {0.0, 1.0}};
  c.boxes = {4, 8};  // spacings 0.5 vs 0.125
  c.bc = {BoundaryCondition::Reflecting, BoundaryCondition::Reflecting};
  const SpaceTimeGrid g = build_grid(c);
  CHECK_THROWS_AS(assemble_diffusion(g, 0.1), std::invalid_argument);
}

TEST_CASE("two-slab rotation matrix") {
  const SpaceTimeGrid g = build_grid(grid_1d(2, 1, BoundaryCondition::Reflecting));
  const GeneratorMatrix aug = assemble_augmented(g, reflect(constant1(0.0), 1.0), 0.0);
  const double ih = 1.0 / g.slab_width();
  CHECK(aug.matrix.coeff(0, 0) == doctest::Approx(-ih));
  CHECK(aug.matrix.coeff(0, 1) == doctest::Approx(ih));
  CHECK(aug.matrix.coeff(1, 0) == doctest::Approx(ih));
  CHECK(aug.matrix.coeff(1, 1) == doctest::Approx(-ih));
  const Eigen::EigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(aug.matrix)};
  Eigen::VectorXd real_parts = es.eigenvalues().real();
  std::sort(real_parts.data(), real_parts.data() + 2);
  CHECK(real_parts[0] == doctest::Approx(-2.0 * ih));
  CHECK(real_parts[1] == doctest::Approx(0.0));
}

TEST_CASE("rate matrix invariants for reflecting assemblies") {
  const SpaceTimeGrid g = build_grid(small_double_gyre(6, 10, 5));
  const GeneratorMatrix aug =
      assemble_augmented(g, reflect(double_gyre_field(), 4.0), 0.1);
  double max_diag = max_abs_diagonal(aug.matrix);
  for (int k = 0; k < aug.matrix.outerSize(); ++k)
    for (SparseMat::InnerIterator it(aug.matrix, k); it; ++it)
      if (it.row() != it.col()) CHECK(it.value() >= 0.0);
  const Eigen::VectorXd row_sums = aug.matrix * Eigen::VectorXd::Ones(g.dim());
  CHECK(row_sums.cwiseAbs().maxCoeff() <= 1e-12 * max_diag);
}

TEST_CASE("outflow rows are substochastic") {
  GridConfig c;
  c.tau = 1.0;
  c.n_time = 4;
  c.bounds = {{0.0, 1.0}};
  c.boxes = {6};
  c.bc = {BoundaryCondition::Outflow};
  const SpaceTimeGrid g = build_grid(c);
  const GeneratorMatrix aug = assemble_augmented(g, reflect(constant1(0.5), 1.0), 0.2);
  const Eigen::VectorXd row_sums = aug.matrix * Eigen::VectorXd::Ones(g.dim());
  CHECK(row_sums.maxCoeff() <= 1e-13);
  CHECK(row_sums.minCoeff() < -1e-6);  // boundary rows lose mass
}

TEST_CASE("dense oracle equivalence on small assemblies") {
  SUBCASE("double gyre, reflecting") {
    const SpaceTimeGrid g = build_grid(small_double_gyre(4, 6, 3));
    const ReflectedField field = reflect(double_gyre_field(), 4.0);
    const GeneratorMatrix aug = assemble_augmented(g, field, 0.15);
    const Eigen::MatrixXd dense = dense_oracle(g, field, 0.15);
    CHECK((Eigen::MatrixXd(aug.matrix) - dense).cwiseAbs().maxCoeff() <
          1e-12 * dense.cwiseAbs().maxCoeff());
  }
  SUBCASE("periodic x, outflow y") {
    GridConfig c;
    c.tau = 2.0;
    c.n_time = 4;
    c.bounds = {{0.0, 2.0}, {0.0, 1.5}};
    c.boxes = {4, 3};
    c.bc = {BoundaryCondition::Periodic, BoundaryCondition::Outflow};
    const SpaceTimeGrid g = build_grid(c);
    Streamfunction sf;
    sf.psi = [](double t, double x, double y) {
      return std::sin(x + 0.3 * t) * std::cos(y) + 0.2 * y * y;
    };
    sf.dpsi_dx = [](double t, double x, double y) { return std::cos(x + 0.3 * t) * std::cos(y); };
    sf.dpsi_dy = [](double t, double x, double y) {
      return -std::sin(x + 0.3 * t) * std::sin(y) + 0.4 * y;
    };
    const ReflectedField field = reflect(from_streamfunction(sf, 2.0, {true, false}), 2.0);
    const GeneratorMatrix aug = assemble_augmented(g, field, 0.3);
    const Eigen::MatrixXd dense = dense_oracle(g, field, 0.3);
    CHECK((Eigen::MatrixXd(aug.matrix) - dense).cwiseAbs().maxCoeff() <
          1e-12 * dense.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("mirror reuse reproduces the direct assembly exactly") {
  const SpaceTimeGrid g = build_grid(small_double_gyre(6, 8, 4));
  const ReflectedField field = reflect(double_gyre_field(), 4.0);
  AssemblyOptions direct, mirrored;
  mirrored.mirror_reuse = true;
  const GeneratorMatrix a = assemble_augmented(g, field, 0.1, direct);
  const GeneratorMatrix b = assemble_augmented(g, field, 0.1, mirrored);
  // the mirrored evaluation times round differently, so equality is to rounding
  CHECK((a.matrix - b.matrix).norm() <= 1e-12 * a.matrix.norm());
}

TEST_CASE("slices drop the time coupling and mirror correctly") {
  const SpaceTimeGrid g = build_grid(small_double_gyre(6, 8, 4));
  const VelocityField dg = double_gyre_field();
  const GeneratorMatrix aug = assemble_augmented(g, reflect(dg, 4.0), 0.0);
  for (int s = 0; s < g.n_time(); ++s) {
    const GeneratorMatrix slab = slice_generator(aug, s);
    const Eigen::VectorXd sums = slab.matrix * Eigen::VectorXd::Ones(g.spatial_count());
    CHECK(sums.cwiseAbs().maxCoeff() < 1e-10);
  }
  // negated-base assembly evaluates the mirrored slabs to identical values
  VelocityField neg = dg;
  neg.eval = [dg](double t, const Point& x, Point& v) {
    dg.eval(t, x, v);
    v = -v;
  };
  const GeneratorMatrix aug_neg = assemble_augmented(g, reflect(neg, 4.0), 0.0);
  for (int s = 0; s < g.n_time(); ++s) {
    const GeneratorMatrix lhs = slice_generator(aug, s);
    const GeneratorMatrix rhs = slice_generator(aug_neg, g.n_time() - 1 - s);
    CHECK((lhs.matrix - rhs.matrix).norm() <= 1e-12 * std::max(1.0, lhs.matrix.norm()));
  }
}

TEST_CASE("three-point face quadrature stays close to midpoint on smooth fields") {
  const SpaceTimeGrid g = build_grid(small_double_gyre(4, 10, 5));
  const ReflectedField field = reflect(double_gyre_field(), 4.0);
  AssemblyOptions mid, gauss;
  gauss.face_quadrature = 3;
  const GeneratorMatrix a = assemble_drift(g, field, mid);
  const GeneratorMatrix b = assemble_drift(g, field, gauss);
  CHECK((a.matrix - b.matrix).norm() / a.matrix.norm() < 0.1);
  CHECK((a.matrix - b.matrix).norm() > 0.0);  // refinement does change values
  // the refined assembly keeps the rate-matrix structure
  const Eigen::VectorXd sums = b.matrix * Eigen::VectorXd::Ones(g.dim());
  CHECK(sums.cwiseAbs().maxCoeff() <= 1e-12 * max_abs_diagonal(b.matrix));
}

TEST_CASE("perturbation generator") {
  const SpaceTimeGrid g = build_grid(grid_1d(2, 4, BoundaryCondition::Reflecting));

  SUBCASE("zero field gives the zero matrix") {
    const GeneratorMatrix e = perturbation_generator(g, reflect(constant1(0.0), 1.0));
    CHECK(e.matrix.norm() == 0.0);
    CHECK(e.kind == GeneratorKind::PerturbationDrift);
  }
  SUBCASE("constant positive field matches assemble_drift where the flux is forward") {
    const GeneratorMatrix e = perturbation_generator(g, reflect(constant1(1.0), 1.0));
    const GeneratorMatrix d = assemble_drift(g, reflect(constant1(1.0), 1.0));
    const Index sc = g.spatial_count();
    // first-half slabs agree entry for entry
    const Eigen::MatrixXd e0 = Eigen::MatrixXd(e.matrix).topLeftCorner(sc, sc);
    const Eigen::MatrixXd d0 = Eigen::MatrixXd(d.matrix).topLeftCorner(sc, sc);
    CHECK((e0 - d0).norm() == 0.0);
    // the mirrored half carries the same rates with flipped sign (the signed
    // convention keeps the response exactly linear in the field)
    const Eigen::MatrixXd e1 = Eigen::MatrixXd(e.matrix).bottomRightCorner(sc, sc);
    CHECK((e1 + e0).norm() == 0.0);
  }
  SUBCASE("exactly odd in the field") {
    const GeneratorMatrix ep = perturbation_generator(g, reflect(constant1(0.6), 1.0));
    const GeneratorMatrix em = perturbation_generator(g, reflect(constant1(-0.6), 1.0));
    CHECK((ep.matrix + em.matrix).norm() == 0.0);
  }
}
