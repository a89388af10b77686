#include "cohflow/coherent.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

namespace cohflow {

int BoxFamily::boundary_of_time(double t) const {
  const int j = static_cast<int>(std::lround(t / grid.slab_width()));
  return std::max(0, std::min(j, boundaries() - 1));
}

Eigen::Index BoxFamily::count_at(int boundary) const {
  Eigen::Index c = 0;
  for (Index b = 0; b < grid.spatial_count(); ++b)
    if (membership(boundary, b)) ++c;
  return c;
}

BoxFamily level_set_family(const SpaceTimeGrid& grid, const Eigen::VectorXd& eigvec, int sign) {
  if (eigvec.size() != grid.dim())
    throw std::invalid_argument("level_set_family: vector does not match the grid");
  if (sign != 1 && sign != -1) throw std::invalid_argument("level_set_family: sign must be +-1");
  const int nb = grid.n_time() / 2 + 1;
  const Index sc = grid.spatial_count();
  BoxFamily fam;
  fam.grid = grid;
  fam.membership.resize(nb, sc);
  for (int j = 0; j < nb; ++j)
    for (Index b = 0; b < sc; ++b)
      fam.membership(j, b) = sign * eigvec[grid.flatten(j, b)] >= 0.0 ? 1 : 0;
  return fam;
}

namespace {

void soft_threshold_columns(const Eigen::MatrixXd& Z, double mu, Eigen::MatrixXd& S) {
  for (Eigen::Index j = 0; j < Z.cols(); ++j) {
    double mu_j = mu;
    const double zmax = Z.col(j).cwiseAbs().maxCoeff();
    if (zmax <= mu_j) mu_j = 0.9 * zmax;  // keep the column nonzero
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
      const double z = Z(i, j);
      S(i, j) = std::abs(z) > mu_j ? (z > 0 ? z - mu_j : z + mu_j) : 0.0;
    }
    Eigen::Index imax = 0;
    const double smax = S.col(j).cwiseAbs().maxCoeff(&imax);
    if (smax > 0.0) S.col(j) /= S(imax, j);  // unit max, signed
  }
}

}  // namespace

SparseBasis seba(const Eigen::MatrixXd& vectors, const SebaOptions& opts) {
  const Eigen::Index p = vectors.rows(), r = vectors.cols();
  if (r < 1) throw std::invalid_argument("seba: need at least one vector");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(vectors);
  if (qr.matrixQR().diagonal().cwiseAbs().minCoeff() < 1e-12 * vectors.norm())
    throw std::invalid_argument("seba: input vectors are rank deficient");
  const Eigen::MatrixXd F =
      qr.householderQ() * Eigen::MatrixXd::Identity(p, r);

  const double mu = 0.99 / std::sqrt(static_cast<double>(p));
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(r, r);
  Eigen::MatrixXd S(p, r);

  SparseBasis out;
  out.threshold = mu;
  out.converged = false;
  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    soft_threshold_columns(F * R.transpose(), mu, S);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(S.transpose() * F,
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::MatrixXd Rnew = svd.matrixU() * svd.matrixV().transpose();
    const double change = (Rnew - R).norm();
    R = Rnew;
    out.iterations = iter;
    if (change < opts.rotation_tol) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged)
    std::fprintf(stderr, "cohflow: warning: seba did not converge in %d iterations\n",
                 opts.max_iterations);
  soft_threshold_columns(F * R.transpose(), mu, S);
  out.vectors = S;
  out.rotation = R;
  return out;
}

ContributionResult contribution_check(const Eigen::VectorXd& alphas,
                                      const Eigen::MatrixXd& eigvecs, const BoxFamily& family) {
  if (alphas.size() != eigvecs.cols())
    throw std::invalid_argument("contribution_check: coefficient count mismatch");
  const SpaceTimeGrid& grid = family.grid;
  const int btau = family.boundaries() - 1;  // boundary at t = tau
  const int slab_tau = grid.n_time() / 2;
  ContributionResult res;
  res.alphas = alphas;
  res.contributions.resize(alphas.size());
  for (Eigen::Index i = 0; i < alphas.size(); ++i) {
    double s = 0.0;
    for (Index b = 0; b < grid.spatial_count(); ++b)
      if (family.member(btau, b)) s += eigvecs(grid.flatten(slab_tau, b), i);
    s *= alphas[i] * grid.box_volume();
    res.contributions[i] = s;
    if (s < 0.0) {
      res.alphas[i] = 0.0;
      res.zeroed.push_back(static_cast<int>(i));
    }
  }
  return res;
}

double coherence_bound(double mu, const Eigen::VectorXd& eigvec, int sign,
                       const SpaceTimeGrid& grid) {
  if (mu >= 0.0) throw std::invalid_argument("coherence_bound: mu must be negative");
  if (eigvec.size() != grid.dim())
    throw std::invalid_argument("coherence_bound: vector does not match the grid");
  Eigen::VectorXd f = sign * eigvec;
  const Index sc = grid.spatial_count();
  const int slab_tau = grid.n_time() / 2;
  const double l1 =
      f.segment(static_cast<Index>(slab_tau) * sc, sc).cwiseAbs().sum() * grid.box_volume();
  if (l1 <= 0.0) throw std::invalid_argument("coherence_bound: zero slab-tau fiber");
  f *= 2.0 / l1;  // paper scaling ||f(tau,.)||_L1 = 2
  const double sup0 = f.head(sc).cwiseAbs().maxCoeff();
  Eigen::Index count0 = 0;
  for (Index b = 0; b < sc; ++b)
    if (f[b] >= 0.0) ++count0;
  if (count0 == 0) throw std::invalid_argument("coherence_bound: empty A_0");
  const double vol_A0 = static_cast<double>(count0) * grid.box_volume();
  return std::exp(mu * grid.tau()) / (sup0 * vol_A0);
}

ParamFamily translating_disk(double tau, std::function<Eigen::Vector2d(double)> center,
                             std::function<Eigen::Vector2d(double)> center_velocity,
                             double radius) {
  ParamFamily fam;
  fam.tau = tau;
  fam.r_lo = 0.0;
  fam.r_hi = 2.0 * 3.14159265358979323846;
  fam.position = [center, radius](double t, double r) {
    return (center(t) + radius * Eigen::Vector2d(std::cos(r), std::sin(r))).eval();
  };
  fam.velocity = [center_velocity](double t, double) { return center_velocity(t); };
  fam.tangent = [radius](double, double r) {
    return Eigen::Vector2d(-radius * std::sin(r), radius * std::cos(r));
  };
  return fam;
}

ParamFamily reflect_family(const ParamFamily& family, double tau) {
  ParamFamily fam;
  fam.tau = 2.0 * tau;
  fam.r_lo = family.r_lo;
  fam.r_hi = family.r_hi;
  auto zeta = [tau](double t) { return t <= tau ? t : 2.0 * tau - t; };
  fam.position = [family, zeta](double t, double r) { return family.position(zeta(t), r); };
  fam.velocity = [family, zeta, tau](double t, double r) {
    const Eigen::Vector2d b = family.velocity(zeta(t), r);
    return t <= tau ? b : (-b).eval();
  };
  fam.tangent = [family, zeta](double t, double r) { return family.tangent(zeta(t), r); };
  return fam;
}

namespace {

template <typename Field, typename Integrand>
double boundary_quadrature(const ParamFamily& family, const Field& field,
                           const FluxOptions& opts, Integrand&& integrand) {
  const double wt = family.tau / opts.time_nodes;
  const double wr = (family.r_hi - family.r_lo) / opts.boundary_nodes;
  double total = 0.0;
  Point x(2), v(2);
  for (int it = 0; it < opts.time_nodes; ++it) {
    const double t = (it + 0.5) * wt;
    for (int ir = 0; ir < opts.boundary_nodes; ++ir) {
      const double r = family.r_lo + (ir + 0.5) * wr;
      const Eigen::Vector2d a = family.position(t, r);
      const Eigen::Vector2d tan = family.tangent(t, r);
      const double element = tan.norm();
      if (element < 1e-14)
        throw std::invalid_argument("flux quadrature: degenerate parameterization node");
      const Eigen::Vector2d n(tan.y() / element, -tan.x() / element);
      x[0] = a.x();
      x[1] = a.y();
      field.eval(t, x, v);
      const Eigen::Vector2d vel(v[0], v[1]);
      const Eigen::Vector2d b = family.velocity(t, r);
      total += wt * wr * integrand(vel, b, n, element);
    }
  }
  return total;
}

}  // namespace

template <typename Field>
double cumulative_outflux(const ParamFamily& family, const Field& field, bool positive_part,
                          const FluxOptions& opts) {
  return boundary_quadrature(
      family, field, opts,
      [positive_part](const Eigen::Vector2d& v, const Eigen::Vector2d& b,
                      const Eigen::Vector2d& n, double element) {
        const double rel = (v - b).dot(n);
        return (positive_part ? std::max(rel, 0.0) : std::abs(rel)) * element;
      });
}

template <typename Field>
double augmented_flux(const ParamFamily& family, const Field& field, bool absolute,
                      const FluxOptions& opts) {
  // Augmented outward normal (-<b,n>, n)/sqrt(1+<b,n>^2) against the
  // space-time velocity (1, v); the surface element picks up the
  // complementary sqrt factor.
  return boundary_quadrature(
      family, field, opts,
      [absolute](const Eigen::Vector2d& v, const Eigen::Vector2d& b, const Eigen::Vector2d& n,
                 double element) {
        const double bn = b.dot(n);
        const double stretch = std::sqrt(1.0 + bn * bn);
        const double vn = (-bn + v.dot(n)) / stretch;
        const double ds = stretch * element;
        return (absolute ? std::abs(vn) : std::max(vn, 0.0)) * ds;
      });
}

template double cumulative_outflux<VelocityField>(const ParamFamily&, const VelocityField&,
                                                  bool, const FluxOptions&);
template double cumulative_outflux<ReflectedField>(const ParamFamily&, const ReflectedField&,
                                                   bool, const FluxOptions&);
template double augmented_flux<VelocityField>(const ParamFamily&, const VelocityField&, bool,
                                              const FluxOptions&);
template double augmented_flux<ReflectedField>(const ParamFamily&, const ReflectedField&, bool,
                                               const FluxOptions&);

}  // namespace cohflow
