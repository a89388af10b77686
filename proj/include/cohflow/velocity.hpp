#ifndef COHFLOW_VELOCITY_HPP
#define COHFLOW_VELOCITY_HPP

#include <functional>
#include <vector>

#include "cohflow/types.hpp"

namespace cohflow {

// Time-dependent velocity evaluator on [0, tau] x closed spatial domain.
struct VelocityField {
  std::function<void(double t, const Point& x, Point& v)> eval;
  int dim = 2;
  double tau = 0.0;  // native horizon
  bool divergence_free = false;
  std::vector<bool> periodic;  // spatial periodicity per axis

  Point operator()(double t, const Point& x) const {
    Point v(dim);
    eval(t, x, v);
    return v;
  }
};

// Forward-backward concatenation of a base field on [0, 2*tau]:
// first half as-is, second half time-mirrored and negated.
struct ReflectedField {
  VelocityField base;
  double tau = 0.0;

  void eval(double t, const Point& x, Point& v) const {
    if (t <= tau) {
      base.eval(t, x, v);
    } else {
      base.eval(2.0 * tau - t, x, v);
      v = -v;
    }
  }
  Point operator()(double t, const Point& x) const {
    Point v(base.dim);
    eval(t, x, v);
    return v;
  }
};

ReflectedField reflect(const VelocityField& field, double tau);

// Scalar streamfunction with analytic spatial partials; induces the
// divergence-free planar field (-dpsi/dy, dpsi/dx).
struct Streamfunction {
  std::function<double(double t, double x, double y)> psi;
  std::function<double(double t, double x, double y)> dpsi_dx;
  std::function<double(double t, double x, double y)> dpsi_dy;
};

VelocityField from_streamfunction(const Streamfunction& sf, double tau,
                                  std::vector<bool> periodic = {false, false});

// Built-in benchmark flows.
struct DoubleGyreParams {
  double amplitude = 0.25;  // A
  double gamma = 0.25;
};
VelocityField double_gyre_field(const DoubleGyreParams& p = {}, double tau = 4.0);

struct BickleyParams {
  double u0 = 5.4138;
  double length = 1.77;               // L
  double a2 = 0.1, a3 = 0.3;          // Rossby wave amplitudes
  double c2_factor = 0.205, c3_factor = 0.461;  // c_n = factor * u0
  double earth_radius = 6.371;        // r_e; k_n = 2n / r_e
};
VelocityField bickley_jet_field(const BickleyParams& p = {}, double tau = 9.0);
Streamfunction bickley_streamfunction(const BickleyParams& p = {});

struct TravelingWaveParams {
  double drift = 1.0;       // c_drift
  double wave_speed = 0.25; // nu
  double amplitude = 1.0;   // A; not fixed by the benchmark definition
};
VelocityField traveling_wave_field(const TravelingWaveParams& p = {}, double tau = 4.0);

VelocityField constant_field(const Point& v, double tau = 1.0);

// Max |div v| over a deterministic lattice of (t, x) samples using central
// differences with the given step. `bounds` delimit the sampled rectangle.
double divergence_check(const VelocityField& field,
                        const std::vector<std::array<double, 2>>& bounds,
                        int sample_count = 1000, double fd_step = 1e-4);

}  // namespace cohflow

#endif
