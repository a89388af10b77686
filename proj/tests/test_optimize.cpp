#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "cohflow/optimize.hpp"
#include "cohflow/rng.hpp"

using namespace cohflow;

namespace {

constexpr double kPi = 3.14159265358979323846;

DictionarySpec double_gyre_spec() {
  DictionarySpec s;
  s.k_modes = {1, 2, 3, 4, 5};
  s.l_modes = {1, 2, 3};
  s.temporal_modes = {-1, 0, 2};
  s.lo = {0.0, 0.0};
  s.hi = {2.0, 1.0};
  s.tau = 4.0;
  return s;
}

DictionarySpec traveling_wave_spec() {
  DictionarySpec s;
  s.k_modes = {2, 4, 6, 8, 10, 12, 14, 16, 18, 20};
  s.l_modes = {1, 2, 3, 4, 5};
  s.temporal_modes = {-1, 0, 2};
  s.cx = 0.25;
  s.lo = {0.0, 0.0};
  s.hi = {2.0 * kPi, kPi};
  s.tau = 4.0;
  return s;
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

// Composite Simpson quadrature for the temporal-overlap oracle.
double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  double sum = f(a) + f(b);
  const double h = (b - a) / n;
  for (int i = 1; i < n; ++i) sum += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

}  // namespace

TEST_CASE("dictionary sizes match the benchmark setups") {
  const PerturbationDictionary dg = build_dictionary(double_gyre_spec());
  CHECK(dg.size() == 45);

  const PerturbationDictionary tw_dict = build_dictionary(traveling_wave_spec());
  CHECK(tw_dict.size() == 150);

  DictionarySpec bad = double_gyre_spec();
  bad.k_modes.clear();
  CHECK_THROWS_AS(build_dictionary(bad), std::invalid_argument);
}

TEST_CASE("dictionary entries are divergence free with sealed boundaries") {
  const PerturbationDictionary dict = build_dictionary(double_gyre_spec());
  const std::vector<std::array<double, 2>> bounds = {{0.0, 2.0}, {0.0, 1.0}};
  for (const int idx : {0, 8, 22, 44}) {
    CHECK(divergence_check(dict.entry_field(idx), bounds, 400) < 1e-6);
    Point v(2);
    for (const double s : {0.17, 0.62, 0.93}) {
      Point x(2);
      x << 0.0, s;  // x-boundary: normal component is v[0]
      dict.eval_entry(idx, 1.3, x, v);
      CHECK(std::abs(v[0]) < 1e-13);
      x << 2.0, s;
      dict.eval_entry(idx, 1.3, x, v);
      CHECK(std::abs(v[0]) < 1e-13);
      x << 2.0 * s, 0.0;  // y-boundary: normal component is v[1]
      dict.eval_entry(idx, 1.3, x, v);
      CHECK(std::abs(v[1]) < 1e-13);
      x << 2.0 * s, 1.0;
      dict.eval_entry(idx, 1.3, x, v);
      CHECK(std::abs(v[1]) < 1e-13);
    }
  }
}

TEST_CASE("combination field equals the sum of entries") {
  const PerturbationDictionary dict = build_dictionary(double_gyre_spec());
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(dict.size());
  SplitMix64 rng(17);
  for (int i = 0; i < dict.size(); ++i) coeffs[i] = 2.0 * rng.uniform() - 1.0;
  const VelocityField combo = dict.combination_field(coeffs);
  Point x(2), v(2), sum(2);
  for (const double t : {0.0, 1.7, 3.9})
    for (const double px : {0.21, 1.13, 1.87})
      for (const double py : {0.08, 0.55, 0.91}) {
        x << px, py;
        sum.setZero();
        for (int i = 0; i < dict.size(); ++i) {
          dict.eval_entry(i, t, x, v);
          sum += coeffs[i] * v;
        }
        const Point got = combo(t, x);
        CHECK(got[0] == doctest::Approx(sum[0]).epsilon(1e-10));
        CHECK(got[1] == doctest::Approx(sum[1]).epsilon(1e-10));
      }
}

TEST_CASE("gram matrix structure") {
  const PerturbationDictionary dict = build_dictionary(double_gyre_spec());
  const ConstraintForm form = gram_matrix(dict);
  REQUIRE(form.B.rows() == 45);
  CHECK((form.B - form.B.transpose()).norm() < 1e-12);

  // unit diagonal by construction (entries normalized with the same quadrature)
  for (int i = 0; i < 45; ++i) CHECK(form.B(i, i) == doctest::Approx(1.0).epsilon(1e-12));

  // same temporal mode, distinct spatial modes: orthogonal
  for (int i = 0; i < dict.size(); ++i)
    for (int j = 0; j < dict.size(); ++j) {
      const auto &a = dict.entries[i], &b = dict.entries[j];
      if (a.r == b.r && (a.k != b.k || a.l != b.l))
        CHECK(std::abs(form.B(i, j)) < 1e-10);
    }

  // temporal overlaps against an independent 1-D quadrature oracle:
  // B_ij = int phi_ri phi_rj / sqrt(int phi_ri^2 int phi_rj^2)
  auto phi = [&](int r, double t) {
    if (r == -1) return t / 4.0;
    if (r == 0) return 1.0;
    const double s = std::sin(2.0 * kPi * t / 4.0);
    return s * s;
  };
  for (int i = 0; i < dict.size(); ++i)
    for (int j = i + 1; j < dict.size(); ++j) {
      const auto &a = dict.entries[i], &b = dict.entries[j];
      if (a.k != b.k || a.l != b.l) continue;
      const double overlap =
          simpson([&](double t) { return phi(a.r, t) * phi(b.r, t); }, 0.0, 4.0, 4000);
      const double na = simpson([&](double t) { return phi(a.r, t) * phi(a.r, t); }, 0.0,
                                4.0, 4000);
      const double nb = simpson([&](double t) { return phi(b.r, t) * phi(b.r, t); }, 0.0,
                                4.0, 4000);
      CHECK(form.B(i, j) == doctest::Approx(overlap / std::sqrt(na * nb)).epsilon(1e-6));
    }

  // frozen overlap values for tau-independent ratios
  // (t/tau, 1): (tau/2)/sqrt(tau/3 tau) = sqrt(3)/2; (t/tau, sin^2): 1/sqrt(2);
  // (1, sin^2): sqrt(2/3)
  int i_lin = -1, i_one = -1, i_sq = -1;
  for (int i = 0; i < dict.size(); ++i) {
    const auto& e = dict.entries[i];
    if (e.k == 1 && e.l == 1) {
      if (e.r == -1) i_lin = i;
      if (e.r == 0) i_one = i;
      if (e.r == 2) i_sq = i;
    }
  }
  CHECK(form.B(i_lin, i_one) == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-9));
  CHECK(form.B(i_lin, i_sq) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
  CHECK(form.B(i_one, i_sq) == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-9));

  // positive definite with finite conditioning
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(form.B);
  CHECK(es.eigenvalues().minCoeff() > 1e-6);

  // order-1 energies stay symmetric positive definite
  const ConstraintForm h1 = gram_matrix(dict, {}, 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es1(h1.B);
  CHECK(es1.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("closed-form Lagrange step") {
  SUBCASE("unit cases") {
    ConstraintForm form;
    form.B = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd c(2);
    c << 1.0, 0.0;
    const LagrangeStep s = solve_step(c, form, 1.0, StepDirection::Minimize);
    CHECK(s.z == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.u[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(s.u[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s.u.dot(form.B * s.u) == doctest::Approx(1.0).epsilon(1e-12));

    c << 3.0, 4.0;
    const LagrangeStep s2 = solve_step(c, form, 1.0, StepDirection::Minimize);
    CHECK(s2.z == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(s2.u[0] == doctest::Approx(-0.6).epsilon(1e-12));
    CHECK(s2.u[1] == doctest::Approx(-0.8).epsilon(1e-12));
  }
  SUBCASE("diagonal metric") {
    ConstraintForm form;
    form.B = Eigen::Vector2d(4.0, 1.0).asDiagonal();
    Eigen::VectorXd c(2);
    c << 2.0, 0.0;
    const LagrangeStep s = solve_step(c, form, 1.0, StepDirection::Minimize);
    CHECK(s.z == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.u[0] == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(s.u.dot(form.B * s.u) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("maximize flips the minimizer") {
    ConstraintForm form;
    form.B = Eigen::MatrixXd::Identity(3, 3);
    Eigen::VectorXd c(3);
    c << 1.0, -2.0, 0.5;
    const LagrangeStep lo = solve_step(c, form, 0.3, StepDirection::Minimize);
    const LagrangeStep hi = solve_step(c, form, 0.3, StepDirection::Maximize);
    CHECK((lo.u + hi.u).norm() < 1e-14);
    CHECK(c.dot(hi.u) > 0.0);
  }
  SUBCASE("zero cost vector is rejected") {
    ConstraintForm form;
    form.B = Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(solve_step(Eigen::VectorXd::Zero(2), form, 1.0, StepDirection::Minimize),
                    std::invalid_argument);
  }
  SUBCASE("the two KKT points are the extrema over the ellipsoid") {
    SplitMix64 rng(4242);
    const int n = 6;
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = 2.0 * rng.uniform() - 1.0;
    ConstraintForm form;
    form.B = A * A.transpose() + Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd c(n);
    for (int i = 0; i < n; ++i) c[i] = 2.0 * rng.uniform() - 1.0;
    const double radius = 0.7;
    const LagrangeStep best = solve_step(c, form, radius, StepDirection::Maximize);
    const double cmax = c.dot(best.u);
    const Eigen::LLT<Eigen::MatrixXd> llt(form.B);
    const Eigen::MatrixXd L = llt.matrixL();
    for (int trial = 0; trial < 2000; ++trial) {
      Eigen::VectorXd y(n);
      for (int i = 0; i < n; ++i) y[i] = 2.0 * rng.uniform() - 1.0;
      y *= radius / y.norm();
      const Eigen::VectorXd u = L.transpose().triangularView<Eigen::Upper>().solve(y);
      CHECK(std::abs(c.dot(u)) <= cmax + 1e-12);
    }
  }
}

TEST_CASE("cost vectors") {
  const SpaceTimeGrid g = build_grid(small_double_gyre(8, 14, 7));
  const VelocityField dg = double_gyre_field();
  const double eps = 0.15;
  const GeneratorMatrix G = assemble_augmented(g, reflect(dg, 4.0), eps);
  const PerturbationDictionary dict = build_dictionary(double_gyre_spec());

  SpectrumOptions sopts;
  sopts.count = 3;
  const SpectrumResult pairs = left_right_pairs(G, sopts);
  const Eigen::VectorXcd f = pairs.right_vectors.col(1);
  const Eigen::VectorXcd gl = pairs.left_vectors.col(1);

  SUBCASE("zero perturbation gives zero cost") {
    Point zero(1);
    Point z2(2);
    z2 << 0.0, 0.0;
    std::vector<GeneratorMatrix> es;
    es.push_back(perturbation_generator(g, reflect(constant_field(z2, 4.0), 4.0)));
    const Eigen::VectorXd c = cost_vector_eigen(G, gl, f, es);
    CHECK(c[0] == 0.0);
  }

  SUBCASE("antisymmetry and first-variation consistency") {
    const double mu0 = pairs.eigenvalues[1].real();
    for (const int idx : {1, 7, 23}) {
      std::vector<GeneratorMatrix> es;
      es.push_back(perturbation_generator(g, reflect(dict.entry_field(idx), 4.0)));
      const Eigen::VectorXd c = cost_vector_eigen(G, gl, f, es);

      // negated entry gives the exactly opposite cost
      VelocityField neg = dict.entry_field(idx);
      const VelocityField base_entry = dict.entry_field(idx);
      neg.eval = [base_entry](double t, const Point& x, Point& v) {
        base_entry.eval(t, x, v);
        v = -v;
      };
      std::vector<GeneratorMatrix> es_neg;
      es_neg.push_back(perturbation_generator(g, reflect(neg, 4.0)));
      const Eigen::VectorXd c_neg = cost_vector_eigen(G, gl, f, es_neg);
      CHECK(c_neg[0] == doctest::Approx(-c[0]).epsilon(1e-12));

      // finite-difference oracle: reassemble the generator at v + delta phi
      const double delta = 1e-4;
      VelocityField perturbed = dg;
      perturbed.eval = [dg, base_entry, delta](double t, const Point& x, Point& v) {
        Point w(2);
        dg.eval(t, x, v);
        base_entry.eval(t, x, w);
        v += delta * w;
      };
      const GeneratorMatrix Gp = assemble_augmented(g, reflect(perturbed, 4.0), eps);
      SpectrumOptions fopts;
      fopts.count = 3;
      const SpectrumResult sp = leading_spectrum(Gp, fopts);
      const TrackResult tracked = track_eigenpair(f, sp);
      const double fd = (sp.eigenvalues[tracked.index].real() - mu0) / delta;
      CHECK(c[0] == doctest::Approx(fd).epsilon(1e-2));
    }
  }

  SUBCASE("feature cost: constant feature has zero cost") {
    std::vector<GeneratorMatrix> es;
    es.push_back(perturbation_generator(g, reflect(dict.entry_field(3), 4.0)));
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(g.dim());
    const Eigen::VectorXd c = cost_vector_feature(G, ones, es);
    CHECK(std::abs(c[0]) < 1e-10);
  }

  SUBCASE("feature cost: finite-difference consistency") {
    Eigen::VectorXd phi(g.dim());
    for (int s = 0; s < g.n_time(); ++s)
      for (Index b = 0; b < g.spatial_count(); ++b)
        phi[g.flatten(s, b)] = 1.0 - std::cos(2.0 * kPi * g.spatial_center(b)[1]);
    phi = normalize_feature(g, phi);
    const double wM = inner_weight(g, g.dim());
    const double j0 = wM * (G.matrix * phi).squaredNorm();
    for (const int idx : {2, 11}) {
      std::vector<GeneratorMatrix> es;
      es.push_back(perturbation_generator(g, reflect(dict.entry_field(idx), 4.0)));
      const Eigen::VectorXd c = cost_vector_feature(G, phi, es);

      const double delta = 1e-4;
      const VelocityField entry = dict.entry_field(idx);
      VelocityField perturbed = dg;
      perturbed.eval = [dg, entry, delta](double t, const Point& x, Point& v) {
        Point w(2);
        dg.eval(t, x, v);
        entry.eval(t, x, w);
        v += delta * w;
      };
      const GeneratorMatrix Gp = assemble_augmented(g, reflect(perturbed, 4.0), eps);
      const double j1 = wM * (Gp.matrix * phi).squaredNorm();
      CHECK(c[0] == doctest::Approx((j1 - j0) / delta).epsilon(1e-2));
    }
  }
}

TEST_CASE("traveling-wave feature cost singles out the gyre-cancelling mode") {
  GridConfig c;
  c.tau = 4.0;
  c.n_time = 16;
  c.bounds = {{0.0, 2.0 * kPi}, {0.0, kPi}};
  c.boxes = {24, 12};
  c.bc = {BoundaryCondition::Periodic, BoundaryCondition::Reflecting};
  const SpaceTimeGrid g = build_grid(c);
  const VelocityField tw = traveling_wave_field();
  const GeneratorMatrix G = assemble_augmented(g, reflect(tw, 4.0), 0.1);

  const PerturbationDictionary dict = build_dictionary(traveling_wave_spec());

  Eigen::VectorXd phi(g.dim());
  for (int s = 0; s < g.n_time(); ++s)
    for (Index b = 0; b < g.spatial_count(); ++b)
      phi[g.flatten(s, b)] = 1.0 - std::cos(2.0 * g.spatial_center(b)[1]);
  phi = normalize_feature(g, phi);

  std::vector<GeneratorMatrix> es;
  for (int l = 0; l < dict.size(); ++l)
    es.push_back(perturbation_generator(g, reflect(dict.entry_field(l), 4.0)));
  const Eigen::VectorXd cost = cost_vector_feature(G, phi, es);

  int argmax = 0;
  for (int i = 1; i < cost.size(); ++i)
    if (std::abs(cost[i]) > std::abs(cost[argmax])) argmax = i;
  CHECK(dict.entries[argmax].k == 2);
  CHECK(dict.entries[argmax].l == 1);
}

TEST_CASE("iteration edge cases and first-step symmetry") {
  const SpaceTimeGrid g = build_grid(small_double_gyre(6, 10, 5));
  const VelocityField dg = double_gyre_field();
  DictionarySpec dspec = double_gyre_spec();
  dspec.k_modes = {1, 2};
  dspec.l_modes = {1};
  const PerturbationDictionary dict = build_dictionary(dspec);
  const ConstraintForm form = gram_matrix(dict);

  OptimizeTarget target;
  target.eigen_index = 2;
  OptimizeOptions opts;
  opts.radius = 0.05;
  opts.epsilon = 0.15;
  opts.spectrum.count = 4;

  SUBCASE("zero steps yield an empty state") {
    opts.steps = 0;
    const OptimizationState state =
        iterate_optimization(g, dg, dict, form, target, Sense::Enhance, opts);
    CHECK(state.trajectory.empty());
    CHECK(state.records.empty());
    CHECK(state.u_total.norm() == 0.0);
  }

  SUBCASE("enhance and destroy take exactly opposite first steps") {
    opts.steps = 1;
    const OptimizationState up =
        iterate_optimization(g, dg, dict, form, target, Sense::Enhance, opts);
    const OptimizationState down =
        iterate_optimization(g, dg, dict, form, target, Sense::Destroy, opts);
    REQUIRE(up.records.size() == 1);
    REQUIRE(down.records.size() == 1);
    CHECK((up.records[0].u_step + down.records[0].u_step).norm() < 1e-12);
    if (up.records[0].accepted && down.records[0].accepted) {
      CHECK(up.trajectory.back().real() > up.trajectory.front().real());
      CHECK(down.trajectory.back().real() < down.trajectory.front().real());
    }
  }

  SUBCASE("accepted steps satisfy the KKT identities") {
    opts.steps = 2;
    const OptimizationState state =
        iterate_optimization(g, dg, dict, form, target, Sense::Enhance, opts);
    for (const auto& rec : state.records) {
      CHECK(rec.z > 0.0);
      CHECK(rec.u_step.dot(form.B * rec.u_step) ==
            doctest::Approx(opts.radius * opts.radius).epsilon(1e-10));
    }
  }
}
