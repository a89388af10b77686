#include "cohflow/optimize.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cohflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

struct EntryGeometry {
  double ax, ay, lx, ly;  // lower corners and extents
};

EntryGeometry geometry(const DictionarySpec& spec) {
  return {spec.lo[0], spec.lo[1], spec.hi[0] - spec.lo[0], spec.hi[1] - spec.lo[1]};
}

// Composite Gauss-Legendre nodes (4-point per segment) on [a, b].
void gauss_nodes(double a, double b, int segments, std::vector<double>& nodes,
                 std::vector<double>& weights) {
  static const double xi[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                               0.8611363115940526};
  static const double wi[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                               0.3478548451374538};
  nodes.clear();
  weights.clear();
  const double hseg = (b - a) / segments;
  for (int s = 0; s < segments; ++s) {
    const double mid = a + (s + 0.5) * hseg;
    for (int q = 0; q < 4; ++q) {
      nodes.push_back(mid + 0.5 * hseg * xi[q]);
      weights.push_back(0.5 * hseg * wi[q]);
    }
  }
}

}  // namespace

double PerturbationDictionary::temporal(int r, double t) const {
  const double tau = spec.tau;
  if (r == -1) return t / tau;
  if (r == 0) return 1.0;
  const double s = std::sin(2.0 * kPi * t / tau);
  double p = 1.0;
  for (int i = 0; i < r; ++i) p *= s;
  return p;
}

void PerturbationDictionary::eval_entry(int idx, double t, const Point& x, Point& v) const {
  const auto& e = entries[idx];
  const auto g = geometry(spec);
  const double thx = e.k * kPi * (x[0] - g.ax - e.cx * t) / g.lx;
  const double thy = e.l * kPi * (x[1] - g.ay - e.cy * t) / g.ly;
  const double amp = temporal(e.r, t) / e.norm;
  v[0] = -amp * (e.l * kPi / g.ly) * std::sin(thx) * std::cos(thy);
  v[1] = amp * (e.k * kPi / g.lx) * std::cos(thx) * std::sin(thy);
}

double PerturbationDictionary::stream(const VectorXd& coeffs, double t, double x,
                                      double y) const {
  if (coeffs.size() != size()) throw std::invalid_argument("stream: coefficient size mismatch");
  const auto g = geometry(spec);
  double psi = 0.0;
  for (int i = 0; i < size(); ++i) {
    const auto& e = entries[i];
    if (coeffs[i] == 0.0) continue;
    const double thx = e.k * kPi * (x - g.ax - e.cx * t) / g.lx;
    const double thy = e.l * kPi * (y - g.ay - e.cy * t) / g.ly;
    psi += coeffs[i] * temporal(e.r, t) / e.norm * std::sin(thx) * std::sin(thy);
  }
  return psi;
}

void PerturbationDictionary::entry_jacobian(int idx, double t, const Point& x,
                                            Eigen::Matrix2d& jac) const {
  const auto& e = entries[idx];
  const auto g = geometry(spec);
  const double kx = e.k * kPi / g.lx, ky = e.l * kPi / g.ly;
  const double thx = e.k * kPi * (x[0] - g.ax - e.cx * t) / g.lx;
  const double thy = e.l * kPi * (x[1] - g.ay - e.cy * t) / g.ly;
  const double amp = temporal(e.r, t) / e.norm;
  // velocity = amp * (-ky sin cos, kx cos sin)
  jac(0, 0) = -amp * ky * kx * std::cos(thx) * std::cos(thy);
  jac(0, 1) = amp * ky * ky * std::sin(thx) * std::sin(thy);
  jac(1, 0) = -amp * kx * kx * std::sin(thx) * std::sin(thy);
  jac(1, 1) = amp * kx * ky * std::cos(thx) * std::cos(thy);
}

VelocityField PerturbationDictionary::entry_field(int idx) const {
  VelocityField f;
  f.dim = 2;
  f.tau = spec.tau;
  f.divergence_free = true;
  f.periodic = {false, false};
  const PerturbationDictionary self = *this;  // captured by value: small POD data
  f.eval = [self, idx](double t, const Point& x, Point& v) { self.eval_entry(idx, t, x, v); };
  return f;
}

VelocityField PerturbationDictionary::combination_field(const VectorXd& coeffs) const {
  if (coeffs.size() != size())
    throw std::invalid_argument("combination_field: coefficient size mismatch");
  const auto g = geometry(spec);
  const double tau = spec.tau;
  // distinct mode values in spec order
  const std::vector<int> ks = spec.k_modes, ls = spec.l_modes, rs = spec.temporal_modes;
  const double cx = spec.cx, cy = spec.cy;
  // per-(k,l) temporal profiles: W_kl(t) = sum_r coeffs_{klr} phi_r(t) / norm
  struct Slot {
    int r;
    double scaled;  // coeff / norm
  };
  std::vector<std::vector<Slot>> slots(ks.size() * ls.size());
  {
    int idx = 0;
    for (size_t ik = 0; ik < ks.size(); ++ik)
      for (size_t il = 0; il < ls.size(); ++il)
        for (size_t ir = 0; ir < rs.size(); ++ir, ++idx)
          if (coeffs[idx] != 0.0)
            slots[ik * ls.size() + il].push_back({rs[ir], coeffs[idx] / entries[idx].norm});
  }

  VelocityField f;
  f.dim = 2;
  f.tau = tau;
  f.divergence_free = true;
  f.periodic = {false, false};
  f.eval = [g, tau, ks, ls, cx, cy, slots](double t, const Point& x, Point& v) {
    double sinx[32], cosx[32], siny[32], cosy[32];
    for (size_t ik = 0; ik < ks.size(); ++ik) {
      const double th = ks[ik] * kPi * (x[0] - g.ax - cx * t) / g.lx;
      sinx[ik] = std::sin(th);
      cosx[ik] = std::cos(th);
    }
    for (size_t il = 0; il < ls.size(); ++il) {
      const double th = ls[il] * kPi * (x[1] - g.ay - cy * t) / g.ly;
      siny[il] = std::sin(th);
      cosy[il] = std::cos(th);
    }
    const double s2 = std::sin(2.0 * kPi * t / tau);
    double vx = 0.0, vy = 0.0;
    for (size_t ik = 0; ik < ks.size(); ++ik)
      for (size_t il = 0; il < ls.size(); ++il) {
        const auto& sl = slots[ik * ls.size() + il];
        if (sl.empty()) continue;
        double w = 0.0;
        for (const auto& s : sl) {
          double phi = 1.0;
          if (s.r == -1)
            phi = t / tau;
          else
            for (int i = 0; i < s.r; ++i) phi *= s2;
          w += s.scaled * phi;
        }
        vx -= w * (ls[il] * kPi / g.ly) * sinx[ik] * cosy[il];
        vy += w * (ks[ik] * kPi / g.lx) * cosx[ik] * siny[il];
      }
    v[0] = vx;
    v[1] = vy;
  };
  return f;
}

PerturbationDictionary build_dictionary(const DictionarySpec& spec) {
  if (spec.k_modes.empty() || spec.l_modes.empty() || spec.temporal_modes.empty())
    throw std::invalid_argument("build_dictionary: empty mode ranges");
  if (spec.k_modes.size() > 32 || spec.l_modes.size() > 32)
    throw std::invalid_argument("build_dictionary: at most 32 modes per spatial axis");
  for (int k : spec.k_modes)
    if (k < 1) throw std::invalid_argument("build_dictionary: mode indices must be >= 1");
  for (int l : spec.l_modes)
    if (l < 1) throw std::invalid_argument("build_dictionary: mode indices must be >= 1");
  for (int r : spec.temporal_modes)
    if (r != -1 && r != 0 && r != 2)
      throw std::invalid_argument("build_dictionary: temporal modes are -1, 0, 2");
  if (!(spec.hi[0] > spec.lo[0]) || !(spec.hi[1] > spec.lo[1]) || !(spec.tau > 0.0))
    throw std::invalid_argument("build_dictionary: domain must be a proper rectangle");

  PerturbationDictionary dict;
  dict.spec = spec;
  for (int k : spec.k_modes)
    for (int l : spec.l_modes)
      for (int r : spec.temporal_modes) dict.entries.push_back({k, l, r, spec.cx, spec.cy, 1.0});

  // Normalize to unit space-time L2 norm with the Gram quadrature, so the
  // Gram diagonal is exactly one.
  const ConstraintForm raw = gram_matrix(dict, {}, 0);
  for (int i = 0; i < dict.size(); ++i) dict.entries[i].norm = std::sqrt(raw.B(i, i));
  return dict;
}

ConstraintForm gram_matrix(const PerturbationDictionary& dict, std::vector<double> omega,
                           int order) {
  if (order != 0 && order != 1) throw std::invalid_argument("gram_matrix: order must be 0 or 1");
  const int n_slots = order == 0 ? 1 : 3;  // value, d/dx, d/dy
  if (omega.empty()) omega.assign(n_slots, 1.0);
  if (static_cast<int>(omega.size()) != n_slots)
    throw std::invalid_argument("gram_matrix: omega must have one weight per derivative slot");
  for (double w : omega)
    if (!(w > 0.0)) throw std::invalid_argument("gram_matrix: weights must be positive");

  const auto& spec = dict.spec;
  int kmax = 1, lmax = 1;
  for (int k : spec.k_modes) kmax = std::max(kmax, k);
  for (int l : spec.l_modes) lmax = std::max(lmax, l);

  std::vector<double> tx, wx, ty, wy, tt, wt;
  gauss_nodes(spec.lo[0], spec.hi[0], std::max(8, 2 * kmax), tx, wx);
  gauss_nodes(spec.lo[1], spec.hi[1], std::max(8, 2 * lmax), ty, wy);
  gauss_nodes(0.0, spec.tau, 16, tt, wt);

  const int n = dict.size();
  MatrixXd B = MatrixXd::Zero(n, n);
  MatrixXd vals(n, 2 * n_slots);  // per node: (vx, vy) for each derivative slot
  Point x(2), v(2);
  Eigen::Matrix2d jac;
  for (size_t it = 0; it < tt.size(); ++it)
    for (size_t ix = 0; ix < tx.size(); ++ix)
      for (size_t iy = 0; iy < ty.size(); ++iy) {
        const double w = wt[it] * wx[ix] * wy[iy];
        x[0] = tx[ix];
        x[1] = ty[iy];
        for (int e = 0; e < n; ++e) {
          dict.eval_entry(e, tt[it], x, v);
          vals(e, 0) = std::sqrt(omega[0]) * v[0];
          vals(e, 1) = std::sqrt(omega[0]) * v[1];
          if (order == 1) {
            dict.entry_jacobian(e, tt[it], x, jac);
            vals(e, 2) = std::sqrt(omega[1]) * jac(0, 0);
            vals(e, 3) = std::sqrt(omega[1]) * jac(1, 0);
            vals(e, 4) = std::sqrt(omega[2]) * jac(0, 1);
            vals(e, 5) = std::sqrt(omega[2]) * jac(1, 1);
          }
        }
        B.selfadjointView<Eigen::Lower>().rankUpdate(vals, w);
      }
  const MatrixXd Bsym = B.selfadjointView<Eigen::Lower>();  // exact symmetry

  ConstraintForm form;
  form.B = Bsym;
  form.omega = std::move(omega);
  form.order = order;

  Eigen::LLT<MatrixXd> llt(form.B);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("gram_matrix: B is not positive definite (quadrature too coarse)");
  return form;
}

namespace {

VectorXd real_product(const GeneratorMatrix& E, const VectorXcd& f) {
  return E.matrix * f.real();
}

}  // namespace

Eigen::VectorXd cost_vector_eigen(const GeneratorMatrix& G, const Eigen::VectorXcd& left,
                                  const Eigen::VectorXcd& right,
                                  const std::vector<GeneratorMatrix>& perturbations) {
  const Index n = static_cast<Index>(G.matrix.rows());
  if (left.size() != n || right.size() != n)
    throw std::invalid_argument("cost_vector_eigen: eigenvector dimension mismatch");
  const double wM = inner_weight(G.grid, n);
  const bool complex_mode =
      left.imag().norm() > 1e-12 * left.norm() || right.imag().norm() > 1e-12 * right.norm();

  VectorXd c(perturbations.size());
  for (size_t l = 0; l < perturbations.size(); ++l) {
    const GeneratorMatrix& E = perturbations[l];
    if (E.matrix.rows() != n)
      throw std::invalid_argument("cost_vector_eigen: perturbation dimension mismatch");
    if (!complex_mode) {
      c[l] = wM * left.real().dot(real_product(E, right));
    } else {
      const VectorXcd Ef = E.matrix * right.real() +
                           Complex(0.0, 1.0) * (E.matrix * right.imag()).eval();
      c[l] = wM * (left.transpose() * Ef).value().real();
    }
  }
  return c;
}

Eigen::VectorXd cost_vector_feature(const GeneratorMatrix& G, const Eigen::VectorXd& phi,
                                    const std::vector<GeneratorMatrix>& perturbations) {
  const Index n = static_cast<Index>(G.matrix.rows());
  if (phi.size() != n) throw std::invalid_argument("cost_vector_feature: dimension mismatch");
  const double wM = inner_weight(G.grid, n);
  const VectorXd Gphi = G.matrix * phi;
  VectorXd c(perturbations.size());
  for (size_t l = 0; l < perturbations.size(); ++l) {
    if (perturbations[l].matrix.rows() != n)
      throw std::invalid_argument("cost_vector_feature: perturbation dimension mismatch");
    c[l] = 2.0 * wM * Gphi.dot(perturbations[l].matrix * phi);
  }
  return c;
}

Eigen::VectorXd normalize_feature(const SpaceTimeGrid& grid, const Eigen::VectorXd& phi) {
  const double wM = inner_weight(grid, static_cast<Index>(phi.size()));
  VectorXd out = phi.array() - phi.mean();
  const double nrm = std::sqrt(wM) * out.norm();
  if (nrm == 0.0) throw std::invalid_argument("normalize_feature: constant feature");
  return out / nrm;
}

LagrangeStep solve_step(const Eigen::VectorXd& c, const ConstraintForm& form, double radius,
                        StepDirection direction) {
  if (c.size() != form.B.rows()) throw std::invalid_argument("solve_step: dimension mismatch");
  if (!(radius > 0.0)) throw std::invalid_argument("solve_step: radius must be positive");
  const double cn = c.norm();
  if (cn == 0.0)
    throw std::invalid_argument("solve_step: zero cost vector (stationary point)");

  Eigen::LLT<MatrixXd> llt(form.B);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("solve_step: constraint form is not positive definite");
  VectorXd y = llt.solve(c);
  y += llt.solve(c - form.B * y);  // one refinement step

  const double quad = c.dot(y);  // c^T B^{-1} c > 0
  if (!(quad > 0.0)) throw std::runtime_error("solve_step: B^{-1} quadratic form not positive");

  LagrangeStep step;
  step.z = std::sqrt(quad) / (2.0 * radius);
  VectorXd u_min = -y / (2.0 * step.z);

  step.kkt_stationarity = (c + 2.0 * step.z * (form.B * u_min)).norm() / cn;
  step.kkt_constraint =
      std::abs(u_min.dot(form.B * u_min) - radius * radius) / (radius * radius);
  if (step.kkt_stationarity > 1e-10 || step.kkt_constraint > 1e-10) {
    std::ostringstream msg;
    msg << "solve_step: KKT residuals too large (stationarity " << step.kkt_stationarity
        << ", constraint " << step.kkt_constraint << ")";
    throw std::runtime_error(msg.str());
  }
  step.u = direction == StepDirection::Maximize ? VectorXd(-u_min) : u_min;
  return step;
}

OptimizationState iterate_optimization(const SpaceTimeGrid& grid, const VelocityField& base,
                                       const PerturbationDictionary& dict,
                                       const ConstraintForm& form,
                                       const OptimizeTarget& target, Sense sense,
                                       const OptimizeOptions& opts) {
  OptimizationState state;
  state.sense = sense;
  state.u_total = VectorXd::Zero(dict.size());
  if (opts.steps == 0) return state;
  if (opts.steps < 0) throw std::invalid_argument("iterate_optimization: negative step count");
  const bool eigen_mode = target.eigen_index.has_value();
  if (eigen_mode == target.feature.has_value())
    throw std::invalid_argument(
        "iterate_optimization: target must be exactly one of eigen index or feature");

  const double tau = grid.tau();

  // E_l are fixed across the whole iteration.
  std::vector<GeneratorMatrix> perturbations;
  perturbations.reserve(dict.size());
  for (int l = 0; l < dict.size(); ++l)
    perturbations.push_back(
        perturbation_generator(grid, reflect(dict.entry_field(l), tau), opts.assembly));

  // Direction of the inner maximization: raising an eigenvalue strengthens
  // the feature it encodes; raising the feature objective destroys it.
  const StepDirection dir =
      (eigen_mode == (sense == Sense::Enhance)) ? StepDirection::Maximize
                                                : StepDirection::Minimize;

  auto assemble_current = [&](const VectorXd& coeffs) {
    if ((coeffs.array() != 0.0).any()) {
      VelocityField pert = dict.combination_field(coeffs);
      VelocityField total;
      total.dim = base.dim;
      total.tau = base.tau;
      total.divergence_free = base.divergence_free;
      total.periodic = base.periodic;
      const VelocityField b = base;
      total.eval = [b, pert](double t, const Point& x, Point& v) {
        Point w(v.size());
        b.eval(t, x, v);
        pert.eval(t, x, w);
        v += w;
      };
      return assemble_augmented(grid, reflect(total, tau), opts.epsilon, opts.assembly);
    }
    return assemble_augmented(grid, reflect(base, tau), opts.epsilon, opts.assembly);
  };

  GeneratorMatrix G = assemble_current(state.u_total);

  VectorXcd reference;
  VectorXcd left, right;
  double objective = 0.0;
  SpectrumOptions sopts = opts.spectrum;

  if (eigen_mode) {
    const int idx0 = *target.eigen_index - 1;
    if (idx0 < 0) throw std::invalid_argument("iterate_optimization: eigen index is 1-based");
    sopts.count = std::max(sopts.count, idx0 + 3);
    SpectrumResult spec = left_right_pairs(G, sopts);
    if (idx0 >= spec.count())
      throw std::runtime_error("iterate_optimization: target index beyond computed spectrum");
    reference = spec.right_vectors.col(idx0);
    left = spec.left_vectors.col(idx0);
    right = spec.right_vectors.col(idx0);
    state.trajectory.push_back(spec.eigenvalues[idx0]);
    state.tracked_indices.push_back(idx0);
  } else {
    const double wM = inner_weight(grid, grid.dim());
    objective = wM * (G.matrix * *target.feature).squaredNorm();
    state.objective_trace.push_back(objective);
  }

  for (int step = 1; step <= opts.steps; ++step) {
    VectorXd c = eigen_mode ? cost_vector_eigen(G, left, right, perturbations)
                            : cost_vector_feature(G, *target.feature, perturbations);
    const LagrangeStep lstep = solve_step(c, form, opts.radius, dir);

    VectorXd u_candidate = state.u_total + lstep.u;
    GeneratorMatrix G_next = assemble_current(u_candidate);

    StepRecord rec;
    rec.step = step;
    rec.z = lstep.z;
    rec.u_step = lstep.u;

    bool improved = false;
    if (eigen_mode) {
      SpectrumResult spec = left_right_pairs(G_next, sopts);
      const TrackResult tracked = track_eigenpair(reference, spec, opts.track_threshold);
      rec.tracked_index = tracked.index;
      rec.tracked_mu = spec.eigenvalues[tracked.index];
      const double prev = state.trajectory.back().real();
      improved = sense == Sense::Enhance ? rec.tracked_mu.real() > prev
                                         : rec.tracked_mu.real() < prev;
      if (improved) {
        reference = spec.right_vectors.col(tracked.index);
        left = spec.left_vectors.col(tracked.index);
        right = spec.right_vectors.col(tracked.index);
        state.trajectory.push_back(rec.tracked_mu);
        state.tracked_indices.push_back(tracked.index);
      }
    } else {
      const double wM = inner_weight(grid, grid.dim());
      rec.objective = wM * (G_next.matrix * *target.feature).squaredNorm();
      improved = sense == Sense::Destroy ? rec.objective > objective
                                         : rec.objective < objective;
      if (improved) {
        objective = rec.objective;
        state.objective_trace.push_back(objective);
      }
    }

    rec.accepted = improved;
    state.records.push_back(rec);
    if (!improved) {
      state.halted_early = true;
      std::ostringstream msg;
      msg << "step " << step << " moved the tracked objective the wrong way; step rejected";
      state.halt_reason = msg.str();
      break;
    }
    state.u_total = u_candidate;
    G = std::move(G_next);
  }
  return state;
}

}  // namespace cohflow
