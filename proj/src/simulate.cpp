#include "cohflow/simulate.hpp"

#include <cmath>
#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

#include "cohflow/rng.hpp"

namespace cohflow {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

int step_count(double t0, double t1, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("integrate: dt must be positive");
  if (t1 <= t0) throw std::invalid_argument("integrate: t1 must exceed t0");
  const double raw = (t1 - t0) / dt;
  const int n = static_cast<int>(std::lround(raw));
  if (n < 1 || std::abs(n - raw) > 1e-8 * std::max(1.0, raw))
    throw std::invalid_argument("integrate: dt must divide t1 - t0");
  return n;
}

// Drift substep of one particle.
template <typename Field>
void drift_step(const Field& field, double t, double dt, Scheme scheme, Point& x, Point& k1,
                Point& k2, Point& k3, Point& k4, Point& xt) {
  switch (scheme) {
    case Scheme::EulerMaruyama:
      field.eval(t, x, k1);
      x += dt * k1;
      break;
    case Scheme::Rk4Maruyama:
      field.eval(t, x, k1);
      xt = x + 0.5 * dt * k1;
      field.eval(t + 0.5 * dt, xt, k2);
      xt = x + 0.5 * dt * k2;
      field.eval(t + 0.5 * dt, xt, k3);
      xt = x + dt * k3;
      field.eval(t + dt, xt, k4);
      x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      break;
  }
}

// Returns false if the particle left through an outflow boundary.
bool apply_boundaries(const SpaceTimeGrid& grid, Point& x) {
  for (int a = 0; a < grid.spatial_dims(); ++a) {
    const double lo = grid.lower(a), hi = grid.upper(a), len = hi - lo;
    switch (grid.bc(a)) {
      case BoundaryCondition::Periodic: {
        double v = std::fmod(x[a] - lo, len);
        if (v < 0) v += len;
        x[a] = lo + v;
        break;
      }
      case BoundaryCondition::Reflecting: {
        int guard = 0;
        while ((x[a] < lo || x[a] > hi) && guard++ < 64) {
          if (x[a] < lo) x[a] = 2.0 * lo - x[a];
          if (x[a] > hi) x[a] = 2.0 * hi - x[a];
        }
        if (x[a] < lo || x[a] > hi) x[a] = std::clamp(x[a], lo, hi);
        break;
      }
      case BoundaryCondition::Outflow:
        if (x[a] < lo || x[a] > hi) return false;
        break;
    }
  }
  return true;
}

Index locate_spatial(const SpaceTimeGrid& grid, const Point& x) {
  std::vector<int> multi(grid.spatial_dims());
  for (int a = 0; a < grid.spatial_dims(); ++a) {
    int i = static_cast<int>(std::floor((x[a] - grid.lower(a)) / grid.spacing(a)));
    if (i < 0) i = 0;
    if (i >= grid.boxes(a)) i = grid.boxes(a) - 1;
    multi[a] = i;
  }
  return grid.spatial_flatten(multi);
}

}  // namespace

ParticleEnsemble seed_uniform(const SpaceTimeGrid& grid, Eigen::Index n, std::uint64_t seed) {
  ParticleEnsemble e;
  e.positions.resize(grid.spatial_dims(), n);
  e.alive.assign(n, 1);
  e.seed = seed;
  for (Eigen::Index i = 0; i < n; ++i) {
    SplitMix64 rng(substream_seed(seed, static_cast<std::uint64_t>(i)));
    for (int a = 0; a < grid.spatial_dims(); ++a)
      e.positions(a, i) = grid.lower(a) + rng.uniform() * grid.extent(a);
  }
  return e;
}

ParticleEnsemble seed_in_family(const BoxFamily& family, Eigen::Index n, std::uint64_t seed) {
  const SpaceTimeGrid& grid = family.grid;
  std::vector<Index> members;
  for (Index b = 0; b < grid.spatial_count(); ++b)
    if (family.member(0, b)) members.push_back(b);
  if (members.empty()) throw std::invalid_argument("seed_in_family: empty slab-0 family");

  ParticleEnsemble e;
  e.positions.resize(grid.spatial_dims(), n);
  e.alive.assign(n, 1);
  e.seed = seed;
  for (Eigen::Index i = 0; i < n; ++i) {
    SplitMix64 rng(substream_seed(seed, static_cast<std::uint64_t>(i)));
    const Index box = members[static_cast<size_t>(rng.uniform() * members.size())];
    const Point c = grid.spatial_center(box);
    for (int a = 0; a < grid.spatial_dims(); ++a)
      e.positions(a, i) = c[a] + (rng.uniform() - 0.5) * grid.spacing(a);
  }
  return e;
}

void integrate_ensemble(const VelocityField& field, double epsilon, ParticleEnsemble& ensemble,
                        double t0, double t1, double dt, Scheme scheme,
                        const SpaceTimeGrid& grid) {
  const int n_steps = step_count(t0, t1, dt);
  const int d = grid.spatial_dims();
  const double noise = epsilon * std::sqrt(dt);
  const std::uint64_t call_tag =
      ensemble.seed ^ (0x9E3779B97F4A7C15ull * (1 + static_cast<std::uint64_t>(
                                                        std::llround(t0 * 1048576.0))));
  Point x(d), k1(d), k2(d), k3(d), k4(d), xt(d);
  for (Eigen::Index i = 0; i < ensemble.count(); ++i) {
    if (!ensemble.alive[i]) continue;
    SplitMix64 rng(substream_seed(call_tag, static_cast<std::uint64_t>(i)));
    x = ensemble.positions.col(i);
    bool alive = true;
    for (int s = 0; s < n_steps && alive; ++s) {
      const double t = t0 + s * dt;
      drift_step(field, t, dt, scheme, x, k1, k2, k3, k4, xt);
      if (epsilon > 0.0)
        for (int a = 0; a < d; ++a) x[a] += noise * rng.normal();
      alive = apply_boundaries(grid, x);
    }
    ensemble.positions.col(i) = x;
    if (!alive) ensemble.alive[i] = 0;
  }
  ensemble.time = t1;
}

CoherenceEstimate coherence_ratio_mc(const BoxFamily& family, const VelocityField& field,
                                     double epsilon, Eigen::Index n, double dt,
                                     std::uint64_t seed, Scheme scheme) {
  const SpaceTimeGrid& grid = family.grid;
  const double tau = grid.tau();
  const int n_steps = step_count(0.0, tau, dt);
  const int d = grid.spatial_dims();
  const double noise = epsilon * std::sqrt(dt);

  ParticleEnsemble e = seed_in_family(family, n, seed);
  Eigen::Index stayed = 0;
  Point x(d), k1(d), k2(d), k3(d), k4(d), xt(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    SplitMix64 rng(substream_seed(seed ^ 0xC0FFEEull, static_cast<std::uint64_t>(i)));
    x = e.positions.col(i);
    bool inside = true;
    for (int s = 0; s < n_steps && inside; ++s) {
      const double t = s * dt;
      drift_step(field, t, dt, scheme, x, k1, k2, k3, k4, xt);
      if (epsilon > 0.0)
        for (int a = 0; a < d; ++a) x[a] += noise * rng.normal();
      inside = apply_boundaries(grid, x);
      if (inside) {
        const int boundary = family.boundary_of_time(t + dt);
        inside = family.member(boundary, locate_spatial(grid, x));
      }
    }
    if (inside) ++stayed;
  }

  CoherenceEstimate est;
  est.stayed = stayed;
  est.total = n;
  est.ratio = static_cast<double>(stayed) / static_cast<double>(n);
  est.stderror = std::sqrt(std::max(est.ratio * (1.0 - est.ratio), 1e-12) / n);
  est.check_interval = dt;
  return est;
}

Eigen::VectorXd krylov_expmv(const SparseMat& A, const Eigen::VectorXd& v, double t,
                             int subspace, double tol) {
  const Index n = static_cast<Index>(A.rows());
  if (v.size() != n) throw std::invalid_argument("krylov_expmv: dimension mismatch");
  const int m = static_cast<int>(std::min<Index>(subspace, n));
  VectorXd y = v;
  double remaining = t;
  if (remaining == 0.0 || y.norm() == 0.0) return y;

  MatrixXd V(n, m + 1);
  MatrixXd H(m + 1, m);
  int halvings = 0;
  while (remaining > 0.0) {
    const double beta = y.norm();
    if (beta == 0.0) return y;
    V.col(0) = y / beta;
    H.setZero();
    int k_dim = 0;
    bool exact = false;
    for (int j = 0; j < m; ++j) {
      VectorXd w = A * V.col(j);
      for (int i = 0; i <= j; ++i) {
        H(i, j) = V.col(i).dot(w);
        w -= H(i, j) * V.col(i);
      }
      for (int i = 0; i <= j; ++i) {  // reorthogonalization pass
        const double c = V.col(i).dot(w);
        w -= c * V.col(i);
        H(i, j) += c;
      }
      H(j + 1, j) = w.norm();
      k_dim = j + 1;
      if (H(j + 1, j) <= 1e-12 * std::max(1.0, H.cwiseAbs().maxCoeff())) {
        exact = true;  // invariant subspace: the small exponential is exact
        break;
      }
      V.col(j + 1) = w / H(j + 1, j);
    }

    double step = remaining;
    for (;;) {
      const MatrixXd F = (step * H.topLeftCorner(k_dim, k_dim)).exp();
      const double err = exact ? 0.0 : beta * H(k_dim, k_dim - 1) * std::abs(F(k_dim - 1, 0));
      if (err <= tol * std::max(1.0, beta) || halvings >= 60) {
        y = V.leftCols(k_dim) * (beta * F.col(0));
        remaining -= step;
        break;
      }
      step *= 0.5;
      ++halvings;
    }
  }
  return y;
}

Eigen::VectorXd propagate_density(const std::vector<const GeneratorMatrix*>& slices,
                                  const Eigen::VectorXd& f0, double h, int subspace,
                                  double tol) {
  VectorXd y = f0;
  for (const GeneratorMatrix* g : slices) {
    if (!g) throw std::invalid_argument("propagate_density: null slice");
    if (g->matrix.rows() != y.size())
      throw std::invalid_argument("propagate_density: slice dimension mismatch");
    y = krylov_expmv(g->matrix, y, h, subspace, tol);
  }
  return y;
}

}  // namespace cohflow
