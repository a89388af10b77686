#ifndef COHFLOW_OPTIMIZE_HPP
#define COHFLOW_OPTIMIZE_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "cohflow/generator.hpp"
#include "cohflow/spectral.hpp"

namespace cohflow {

// One perturbation basis entry: the streamfunction mode sin(k pi x~) sin(l pi y~)
// with optional traveling phase, modulated in time by
// phi_{-1}(t) = t/tau, phi_r(t) = sin^r(2 pi t / tau) for r = 0, 2.
struct DictionaryEntry {
  int k = 1, l = 1, r = 0;
  double cx = 0.0, cy = 0.0;
  double norm = 1.0;  // space-time L2 norm of the unnormalized field
};

struct DictionarySpec {
  std::vector<int> k_modes;
  std::vector<int> l_modes;
  std::vector<int> temporal_modes = {-1, 0, 2};
  double cx = 0.0, cy = 0.0;
  std::array<double, 2> lo{0.0, 0.0}, hi{1.0, 1.0};
  double tau = 1.0;
};

class PerturbationDictionary {
 public:
  DictionarySpec spec;
  std::vector<DictionaryEntry> entries;

  int size() const { return static_cast<int>(entries.size()); }

  double temporal(int r, double t) const;
  // Normalized velocity of entry `idx` at (t, x).
  void eval_entry(int idx, double t, const Point& x, Point& v) const;
  // Streamfunction of the combination sum_l coeffs[l] * phi_l at (t, x, y).
  double stream(const Eigen::VectorXd& coeffs, double t, double x, double y) const;
  // Spatial Jacobian d(velocity)/d(x,y) of entry `idx` (for order-1 energies).
  void entry_jacobian(int idx, double t, const Point& x, Eigen::Matrix2d& jac) const;

  VelocityField entry_field(int idx) const;
  // Field of sum_l coeffs[l] * phi_l; shares trig factors across entries.
  VelocityField combination_field(const Eigen::VectorXd& coeffs) const;
};

// Cartesian product of the mode ranges; entries are normalized to unit
// space-time L2 norm over (0, tau) x X by the same quadrature used for the
// Gram matrix.
PerturbationDictionary build_dictionary(const DictionarySpec& spec);

struct ConstraintForm {
  Eigen::MatrixXd B;            // symmetric positive definite Gram matrix
  std::vector<double> omega;    // weights per derivative slot (1, d/dx, d/dy)
  int order = 0;                // Sobolev order m in {0, 1}
  double radius = 0.0;          // energy radius R when known
};

// B_ij = sum_{|alpha| <= m} omega_alpha <D^alpha phi_i, D^alpha phi_j> over
// (0, tau) x X by tensor-product Gauss quadrature. omega may be empty (all 1).
ConstraintForm gram_matrix(const PerturbationDictionary& dict, std::vector<double> omega = {},
                           int order = 0);

// c_l = <g, E_l f> in the volume-weighted pairing, the first variation of the
// tracked eigenvalue; g, f must satisfy <g, f> = 1.
Eigen::VectorXd cost_vector_eigen(const GeneratorMatrix& G, const Eigen::VectorXcd& left,
                                  const Eigen::VectorXcd& right,
                                  const std::vector<GeneratorMatrix>& perturbations);

// c_l = 2 <G phi, E_l phi> in the volume-weighted pairing, the first
// variation of ||G(v + u) phi||^2 for a space-time feature phi.
Eigen::VectorXd cost_vector_feature(const GeneratorMatrix& G, const Eigen::VectorXd& phi,
                                    const std::vector<GeneratorMatrix>& perturbations);

// Subtract the volume-weighted mean and scale to unit weighted norm.
Eigen::VectorXd normalize_feature(const SpaceTimeGrid& grid, const Eigen::VectorXd& phi);

enum class StepDirection { Maximize, Minimize };

struct LagrangeStep {
  Eigen::VectorXd u;
  double z = 0.0;
  double kkt_stationarity = 0.0;  // ||c + 2 z B u_min|| / ||c||
  double kkt_constraint = 0.0;    // |u^T B u - R^2| / R^2
};

// Closed-form optimizer on the ellipsoid u^T B u = R^2:
// z = sqrt(c^T B^{-1} c) / (2R), u_min = -B^{-1} c / (2z); Maximize returns
// -u_min. KKT identities are verified before returning.
LagrangeStep solve_step(const Eigen::VectorXd& c, const ConstraintForm& form, double radius,
                        StepDirection direction);

enum class Sense { Enhance, Destroy };

struct OptimizeTarget {
  std::optional<int> eigen_index;            // 1-based position in the ordering
  std::optional<Eigen::VectorXd> feature;    // augmented space-time feature
};

struct OptimizeOptions {
  int steps = 8;
  double radius = 0.05;
  double epsilon = 0.1;
  SpectrumOptions spectrum;
  AssemblyOptions assembly;
  double track_threshold = 0.5;
};

struct StepRecord {
  int step = 0;
  double z = 0.0;
  Complex tracked_mu{0.0, 0.0};
  double objective = 0.0;  // feature objective ||G phi||^2 when applicable
  int tracked_index = -1;
  bool accepted = false;
  Eigen::VectorXd u_step;
};

struct OptimizationState {
  Eigen::VectorXd u_total;
  std::vector<StepRecord> records;
  std::vector<Complex> trajectory;      // tracked eigenvalue, step 0 first
  std::vector<double> objective_trace;  // feature objective, step 0 first
  std::vector<int> tracked_indices;
  Sense sense = Sense::Enhance;
  bool halted_early = false;
  std::string halt_reason;
};

// Gradient ascent/descent: each step assembles the generator of the
// accumulated field, evaluates the objective, builds the cost vector against
// the fixed perturbation generators, and takes the closed-form step. A step
// that moves the tracked objective the wrong way is recorded as rejected and
// halts the iteration.
OptimizationState iterate_optimization(const SpaceTimeGrid& grid, const VelocityField& base,
                                       const PerturbationDictionary& dict,
                                       const ConstraintForm& form,
                                       const OptimizeTarget& target, Sense sense,
                                       const OptimizeOptions& opts);

}  // namespace cohflow

#endif
