#include "cohflow/velocity.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace cohflow {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

ReflectedField reflect(const VelocityField& field, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("reflect: tau must be positive");
  return ReflectedField{field, tau};
}

VelocityField from_streamfunction(const Streamfunction& sf, double tau,
                                  std::vector<bool> periodic) {
  VelocityField f;
  f.dim = 2;
  f.tau = tau;
  f.divergence_free = true;
  f.periodic = std::move(periodic);
  f.eval = [sf](double t, const Point& x, Point& v) {
    v[0] = -sf.dpsi_dy(t, x[0], x[1]);
    v[1] = sf.dpsi_dx(t, x[0], x[1]);
  };
  return f;
}

VelocityField double_gyre_field(const DoubleGyreParams& p, double tau) {
  VelocityField f;
  f.dim = 2;
  f.tau = tau;
  f.divergence_free = true;
  f.periodic = {false, false};
  const double A = p.amplitude, gamma = p.gamma;
  f.eval = [A, gamma](double t, const Point& x, Point& v) {
    const double s = std::sin(2.0 * kPi * t);
    const double a = gamma * s;
    const double b = 1.0 - 2.0 * gamma * s;
    const double fx = a * x[0] * x[0] + b * x[0];
    const double dfdx = 2.0 * a * x[0] + b;
    v[0] = -kPi * A * std::sin(kPi * fx) * std::cos(kPi * x[1]);
    v[1] = kPi * A * std::cos(kPi * fx) * std::sin(kPi * x[1]) * dfdx;
  };
  return f;
}

Streamfunction bickley_streamfunction(const BickleyParams& p) {
  const double u0 = p.u0, L = p.length;
  const std::array<double, 2> amp = {p.a2, p.a3};
  const std::array<double, 2> c = {p.c2_factor * u0, p.c3_factor * u0};
  const std::array<double, 2> k = {4.0 / p.earth_radius, 6.0 / p.earth_radius};
  Streamfunction sf;
  sf.psi = [=](double t, double x, double y) {
    const double sech = 1.0 / std::cosh(y / L);
    double waves = 0.0;
    for (int n = 0; n < 2; ++n) waves += amp[n] * std::cos(k[n] * (x - c[n] * t));
    return -u0 * L * std::tanh(y / L) + u0 * L * sech * sech * waves;
  };
  sf.dpsi_dx = [=](double t, double x, double y) {
    const double sech = 1.0 / std::cosh(y / L);
    double dwaves = 0.0;
    for (int n = 0; n < 2; ++n) dwaves += -amp[n] * k[n] * std::sin(k[n] * (x - c[n] * t));
    return u0 * L * sech * sech * dwaves;
  };
  sf.dpsi_dy = [=](double t, double x, double y) {
    const double sech = 1.0 / std::cosh(y / L);
    const double tanh = std::tanh(y / L);
    double waves = 0.0;
    for (int n = 0; n < 2; ++n) waves += amp[n] * std::cos(k[n] * (x - c[n] * t));
    return -u0 * sech * sech - 2.0 * u0 * sech * sech * tanh * waves;
  };
  return sf;
}

VelocityField bickley_jet_field(const BickleyParams& p, double tau) {
  VelocityField f = from_streamfunction(bickley_streamfunction(p), tau, {true, false});
  return f;
}

VelocityField traveling_wave_field(const TravelingWaveParams& p, double tau) {
  VelocityField f;
  f.dim = 2;
  f.tau = tau;
  f.divergence_free = true;
  f.periodic = {true, false};
  const double c = p.drift, nu = p.wave_speed, A = p.amplitude;
  f.eval = [c, nu, A](double t, const Point& x, Point& v) {
    v[0] = c - A * std::sin(x[0] - nu * t) * std::cos(x[1]);
    v[1] = A * std::cos(x[0] - nu * t) * std::sin(x[1]);
  };
  return f;
}

VelocityField constant_field(const Point& v0, double tau) {
  VelocityField f;
  f.dim = static_cast<int>(v0.size());
  f.tau = tau;
  f.divergence_free = true;
  f.periodic.assign(v0.size(), false);
  Point c = v0;
  f.eval = [c](double, const Point&, Point& v) { v = c; };
  return f;
}

double divergence_check(const VelocityField& field,
                        const std::vector<std::array<double, 2>>& bounds,
                        int sample_count, double fd_step) {
  const int d = field.dim;
  if (static_cast<int>(bounds.size()) != d)
    throw std::invalid_argument("divergence_check: bounds dimension mismatch");
  // Deterministic lattice over (t, x), inset so central differences stay inside.
  const int per_axis = std::max(2, static_cast<int>(std::ceil(
                                       std::pow(static_cast<double>(sample_count),
                                                1.0 / (d + 1)))));
  std::vector<double> tlist(per_axis);
  for (int i = 0; i < per_axis; ++i)
    tlist[i] = field.tau * (i + 0.5) / per_axis;

  double max_div = 0.0;
  std::vector<int> idx(d, 0);
  const auto total = static_cast<long>(std::pow(per_axis, d));
  Point x(d), xp(d), xm(d), vp(d), vm(d);
  for (double t : tlist) {
    for (long flat = 0; flat < total; ++flat) {
      long rem = flat;
      for (int a = d - 1; a >= 0; --a) {
        idx[a] = static_cast<int>(rem % per_axis);
        rem /= per_axis;
      }
      for (int a = 0; a < d; ++a) {
        const double lo = bounds[a][0] + fd_step, hi = bounds[a][1] - fd_step;
        x[a] = lo + (hi - lo) * (idx[a] + 0.5) / per_axis;
      }
      double div = 0.0;
      for (int a = 0; a < d; ++a) {
        xp = x; xm = x;
        xp[a] += fd_step; xm[a] -= fd_step;
        field.eval(t, xp, vp);
        field.eval(t, xm, vm);
        div += (vp[a] - vm[a]) / (2.0 * fd_step);
      }
      max_div = std::max(max_div, std::abs(div));
    }
  }
  return max_div;
}

}  // namespace cohflow
