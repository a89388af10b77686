#include "cohflow/spectral.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <vector>

#ifdef COHFLOW_HAVE_UMFPACK
#include <umfpack.h>
#endif

#include "cohflow/rng.hpp"

namespace cohflow {

namespace {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

SparseMat shifted_matrix(const SparseMat& A, double shift) {
  SparseMat eye(A.rows(), A.cols());
  eye.setIdentity();
  SparseMat M = A - shift * eye;
  M.makeCompressed();
  return M;
}

// Solves (A - shift I) x = b, optionally for the transposed matrix.
class ShiftedSolver {
 public:
  virtual ~ShiftedSolver() = default;
  virtual bool ok() const = 0;
  virtual void solve(const VectorXd& b, VectorXd& x, bool transpose) const = 0;
};

#ifdef COHFLOW_HAVE_UMFPACK

class DirectSolver : public ShiftedSolver {
 public:
  DirectSolver(const SparseMat& A, double shift) : M_(shifted_matrix(A, shift)) {
    void* symbolic = nullptr;
    int status = umfpack_di_symbolic(M_.rows(), M_.cols(), M_.outerIndexPtr(),
                                     M_.innerIndexPtr(), M_.valuePtr(), &symbolic,
                                     nullptr, nullptr);
    if (status != UMFPACK_OK) return;
    status = umfpack_di_numeric(M_.outerIndexPtr(), M_.innerIndexPtr(), M_.valuePtr(),
                                symbolic, &numeric_, nullptr, nullptr);
    umfpack_di_free_symbolic(&symbolic);
    ok_ = status == UMFPACK_OK;
  }
  ~DirectSolver() override {
    if (numeric_) umfpack_di_free_numeric(&numeric_);
  }
  DirectSolver(const DirectSolver&) = delete;
  DirectSolver& operator=(const DirectSolver&) = delete;

  bool ok() const override { return ok_; }

  void solve(const VectorXd& b, VectorXd& x, bool transpose) const override {
    x.resize(b.size());
    // UMFPACK stores CSC, so UMFPACK_Aat is the plain transpose.
    umfpack_di_solve(transpose ? UMFPACK_Aat : UMFPACK_A, M_.outerIndexPtr(),
                     M_.innerIndexPtr(), M_.valuePtr(), x.data(), b.data(), numeric_,
                     nullptr, nullptr);
  }

 private:
  SparseMat M_;
  void* numeric_ = nullptr;
  bool ok_ = false;
};

#else

class DirectSolver : public ShiftedSolver {
 public:
  DirectSolver(const SparseMat& A, double shift) : M_(shifted_matrix(A, shift)) {
    lu_.compute(M_);
    ok_ = lu_.info() == Eigen::Success;
  }
  bool ok() const override { return ok_; }

  void solve(const VectorXd& b, VectorXd& x, bool transpose) const override {
    x = transpose ? lu_.transpose().solve(b) : lu_.solve(b);
  }

 private:
  SparseMat M_;
  Eigen::SparseLU<SparseMat> lu_;
  bool ok_ = false;
};

#endif

// Iterative backend for large augmented assemblies, where a monolithic LU
// does not fit in memory. The diagonal slab blocks are factored exactly; the
// acyclic slab sweep (dropping the wrap-around time coupling) preconditions
// GMRES. The wrap term only reaches the solution through one contractive
// monodromy cycle, so iteration counts stay low and independent of size.
class SlabSweepSolver : public ShiftedSolver {
 public:
  SlabSweepSolver(const SparseMat& A, double shift, int n_time, Index spatial_count,
                  double slab_width)
      : M_(shifted_matrix(A, shift)),
        nt_(n_time),
        sc_(spatial_count),
        rate_(1.0 / slab_width) {
    slab_lus_.resize(nt_);
    for (int s = 0; s < nt_; ++s) {
      SparseMat block = M_.block(static_cast<Index>(s) * sc_, static_cast<Index>(s) * sc_,
                                 sc_, sc_);
      slab_lus_[s] = std::make_unique<Eigen::SparseLU<SparseMat>>();
      slab_lus_[s]->compute(block);
      if (slab_lus_[s]->info() != Eigen::Success) return;
    }
    // smoke-test the preconditioned iteration once; a failure here feeds the
    // shift retry ladder
    VectorXd b = VectorXd::Ones(M_.rows()), x;
    ok_ = true;
    ok_ = gmres(b, x, false);
  }

  bool ok() const override { return ok_; }

  void solve(const VectorXd& b, VectorXd& x, bool transpose) const override {
    if (!gmres(b, x, transpose))
      throw std::runtime_error("eigensolver: inner GMRES failed to converge");
  }

 private:
  void sweep(const VectorXd& b, VectorXd& x, bool transpose) const {
    x.resize(M_.rows());
    VectorXd rhs(sc_);
    if (!transpose) {
      for (int s = nt_ - 1; s >= 0; --s) {
        rhs = b.segment(static_cast<Index>(s) * sc_, sc_);
        if (s < nt_ - 1) rhs -= rate_ * x.segment(static_cast<Index>(s + 1) * sc_, sc_);
        x.segment(static_cast<Index>(s) * sc_, sc_) = slab_lus_[s]->solve(rhs);
      }
    } else {
      for (int s = 0; s < nt_; ++s) {
        rhs = b.segment(static_cast<Index>(s) * sc_, sc_);
        if (s > 0) rhs -= rate_ * x.segment(static_cast<Index>(s - 1) * sc_, sc_);
        x.segment(static_cast<Index>(s) * sc_, sc_) = slab_lus_[s]->transpose().solve(rhs);
      }
    }
  }

  void apply(const VectorXd& v, VectorXd& out, bool transpose) const {
    out = transpose ? VectorXd(M_.transpose() * v) : VectorXd(M_ * v);
  }

  bool gmres(const VectorXd& b, VectorXd& x, bool transpose) const {
    const Index n = M_.rows();
    const double bn = b.norm();
    x = VectorXd::Zero(n);
    if (bn == 0.0) return true;
    VectorXd r = b, z(n), w(n);
    for (int cycle = 0; cycle < kMaxCycles; ++cycle) {
      const double beta = r.norm();
      if (beta / bn < kTol) return true;
      MatrixXd V(n, kRestart + 1);
      MatrixXd H = MatrixXd::Zero(kRestart + 1, kRestart);
      VectorXd g = VectorXd::Zero(kRestart + 1);
      std::vector<double> cs(kRestart), sn(kRestart);
      V.col(0) = r / beta;
      g[0] = beta;
      int m = 0;
      for (int j = 0; j < kRestart; ++j) {
        sweep(V.col(j), z, transpose);
        apply(z, w, transpose);
        for (int i = 0; i <= j; ++i) {
          H(i, j) = V.col(i).dot(w);
          w -= H(i, j) * V.col(i);
        }
        H(j + 1, j) = w.norm();
        if (H(j + 1, j) > 1e-300) V.col(j + 1) = w / H(j + 1, j);
        for (int i = 0; i < j; ++i) {
          const double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
          H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
          H(i, j) = t;
        }
        const double d = std::hypot(H(j, j), H(j + 1, j));
        if (d == 0.0) return false;
        cs[j] = H(j, j) / d;
        sn[j] = H(j + 1, j) / d;
        H(j, j) = d;
        H(j + 1, j) = 0.0;
        const double t = cs[j] * g[j];
        g[j + 1] = -sn[j] * g[j];
        g[j] = t;
        m = j + 1;
        if (std::abs(g[m]) / bn < kTol) break;
      }
      const VectorXd y =
          H.topLeftCorner(m, m).triangularView<Eigen::Upper>().solve(g.head(m));
      sweep(V.leftCols(m) * y, z, transpose);
      x += z;
      r = b;
      apply(x, w, transpose);
      r -= w;
      if (r.norm() / bn < kTol) return true;
    }
    return false;
  }

  static constexpr double kTol = 1e-12;
  static constexpr int kRestart = 150;
  static constexpr int kMaxCycles = 4;

  SparseMat M_;
  int nt_;
  Index sc_;
  double rate_;
  std::vector<std::unique_ptr<Eigen::SparseLU<SparseMat>>> slab_lus_;
  bool ok_ = false;
};

constexpr Index kDirectDimLimit = 30000;

std::unique_ptr<ShiftedSolver> make_shifted_solver(const GeneratorMatrix& G, double shift) {
  const Index n = static_cast<Index>(G.matrix.rows());
  if (G.kind == GeneratorKind::FullAugmented && n == G.grid.dim() && n > kDirectDimLimit)
    return std::make_unique<SlabSweepSolver>(G.matrix, shift, G.grid.n_time(),
                                             G.grid.spatial_count(), G.grid.slab_width());
  return std::make_unique<DirectSolver>(G.matrix, shift);
}

void apply_complex(const SparseMat& A, const VectorXcd& v, VectorXcd& out) {
  out = A * v.real() + Complex(0.0, 1.0) * (A * v.imag()).eval();
}

struct EigenPair {
  Complex mu;
  VectorXcd w;
  double residual;
};

bool better(const Complex& a, const Complex& b, Ordering ordering) {
  if (ordering == Ordering::SmallestMagnitude) {
    if (std::abs(a) != std::abs(b)) return std::abs(a) < std::abs(b);
  } else {
    if (a.real() != b.real()) return a.real() > b.real();
  }
  if (a.real() != b.real()) return a.real() < b.real();
  return a.imag() < b.imag();
}

// Arnoldi with thick restarts on the shift-inverted operator. Each restart
// keeps the subspace spanned by the leading Ritz vectors (by the requested
// ordering), so clusters converge cumulatively instead of restarting from a
// single vector. Eigenvalues are back-transformed through the Rayleigh
// quotient and residuals always verified against the original matrix.
std::vector<EigenPair> shift_invert_arnoldi(const SparseMat& A, const ShiftedSolver& solver,
                                            bool transpose, double shift, int want,
                                            Ordering ordering, const SpectrumOptions& opts,
                                            double residual_tol,
                                            const MatrixXcd* start_hint = nullptr) {
  const Index n = static_cast<Index>(A.rows());
  const int m = static_cast<int>(std::min<Index>(
      opts.subspace > 0 ? opts.subspace : std::max(4 * opts.count, 40), n));
  const int want_total = static_cast<int>(std::min<Index>(want + 4, n));
  const int p_keep = std::max(1, std::min(want_total + 4, m - 8));

  SplitMix64 rng(0x5eedC0DEull);
  auto fresh_vector = [&]() {
    VectorXcd v(n);
    for (Index i = 0; i < n; ++i) v[i] = Complex(2.0 * rng.uniform() - 1.0, 0.0);
    return v;
  };

  MatrixXcd V(n, m + 1);
  MatrixXcd H = MatrixXcd::Zero(m + 1, m);
  VectorXcd w(n), tmp(n);
  VectorXd re(n), im(n), sol(n);

  auto op_apply = [&](const VectorXcd& x, VectorXcd& y) {
    y.resize(n);
    re = x.real();
    if ((re.array() != 0.0).any()) {
      solver.solve(re, sol, transpose);
      y.real() = sol;
    } else {
      y.real().setZero();
    }
    im = x.imag();
    if ((im.array() != 0.0).any()) {
      solver.solve(im, sol, transpose);
      y.imag() = sol;
    } else {
      y.imag().setZero();
    }
  };

  {
    VectorXcd v0 = start_hint && start_hint->cols() > 0
                       ? VectorXcd(start_hint->rowwise().sum())
                       : fresh_vector();
    if (v0.norm() < 1e-300) v0 = fresh_vector();
    V.col(0) = v0 / v0.norm();
  }

  int cur = 0;             // retained subspace size
  bool exhausted = false;  // happy breakdown: the subspace is invariant
  int last_converged = 0, stall = 0;
  bool trust_estimates = true;

  for (int cycle = 0; cycle <= opts.max_restarts; ++cycle) {
    // expand the decomposition from cur to m basis vectors
    int k_dim = cur;
    if (!exhausted) {
      for (int j = cur; j < m; ++j) {
        op_apply(V.col(j), w);
        if (!w.allFinite())
          throw std::runtime_error("eigensolver: inner solve produced non-finite values");
        // modified Gram-Schmidt with one reorthogonalization pass
        for (int i = 0; i <= j; ++i) {
          const Complex hij = V.col(i).adjoint() * w;
          w -= hij * V.col(i);
          H(i, j) += hij;
        }
        for (int i = 0; i <= j; ++i) {
          const Complex c = V.col(i).adjoint() * w;
          w -= c * V.col(i);
          H(i, j) += c;
        }
        const double hnorm = w.norm();
        H(j + 1, j) = hnorm;
        k_dim = j + 1;
        if (hnorm <= 1e-13 * std::max(1.0, H.cwiseAbs().maxCoeff())) {
          exhausted = true;
          break;
        }
        V.col(j + 1) = w / hnorm;
      }
    }

    Eigen::ComplexEigenSolver<MatrixXcd> es(H.topLeftCorner(k_dim, k_dim));
    if (es.info() != Eigen::Success)
      throw std::runtime_error("eigensolver: projected eigendecomposition failed");

    struct Candidate {
      Complex mu;
      int idx;
      double est;  // inverse-operator residual estimate, relative
    };
    std::vector<Candidate> cands;
    const double beta = k_dim < m + 1 ? std::abs(H(k_dim, k_dim - 1)) : 0.0;
    for (int i = 0; i < k_dim; ++i) {
      const Complex theta = es.eigenvalues()[i];
      if (std::abs(theta) < 1e-14) continue;
      const double est =
          exhausted ? 0.0
                    : beta * std::abs(es.eigenvectors()(k_dim - 1, i)) / std::abs(theta);
      cands.push_back({shift + 1.0 / theta, i, est});
    }
    std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
      return better(a.mu, b.mu, ordering);
    });

    // verify the leading `need` candidates on the original matrix
    const int need = std::min<int>(want_total, static_cast<int>(cands.size()));
    std::vector<EigenPair> verified;
    int verified_top = 0;
    for (int ci = 0; ci < static_cast<int>(cands.size()) && ci < need + 4; ++ci) {
      const auto& c = cands[ci];
      if (trust_estimates && c.est > 1e-3 && !exhausted) continue;
      tmp = V.leftCols(k_dim) * es.eigenvectors().col(c.idx);
      const double tn = tmp.norm();
      if (tn < 1e-12) continue;
      tmp /= tn;
      apply_complex(A, tmp, w);
      const Complex mu = tmp.adjoint() * w;  // Rayleigh quotient
      const double resid = (w - mu * tmp).norm();
      if (resid <= residual_tol) {
        verified.push_back({mu, tmp, resid});
        if (ci < need) ++verified_top;
      }
    }

    const bool covered = verified_top == need && need >= want;
    if (covered) return verified;
    if (exhausted || cycle == opts.max_restarts) {
      if (static_cast<int>(verified.size()) >= want) return verified;
      throw std::runtime_error("eigensolver: failed to converge " + std::to_string(want) +
                               " eigenpairs after " + std::to_string(opts.max_restarts) +
                               " restarts (got " + std::to_string(verified.size()) + ")");
    }

    if (verified_top <= last_converged) {
      if (++stall >= 8) trust_estimates = false;  // rely on explicit checks only
    } else {
      stall = 0;
    }
    last_converged = verified_top;

    // thick restart: keep the invariant-ish subspace of the leading Ritz pairs
    const int p = std::min<int>(p_keep, std::max(1, k_dim - 2));
    MatrixXcd Y(k_dim, p);
    for (int i = 0; i < p; ++i) Y.col(i) = es.eigenvectors().col(cands[i].idx);
    Eigen::HouseholderQR<MatrixXcd> qr(Y);
    const MatrixXcd Qp = qr.householderQ() * MatrixXcd::Identity(k_dim, p);

    const MatrixXcd Vp = V.leftCols(k_dim) * Qp;
    const MatrixXcd Hp = Qp.adjoint() * H.topLeftCorner(k_dim, k_dim) * Qp;
    const Eigen::RowVectorXcd spike =
        H(k_dim, k_dim - 1) * Qp.row(k_dim - 1);  // coupling to the next basis vector

    V.leftCols(p) = Vp;
    V.col(p) = V.col(k_dim);  // the (k+1)-th Arnoldi vector carries on
    H.setZero();
    H.topLeftCorner(p, p) = Hp;
    H.row(p).head(p) = spike;
    cur = p;
  }
  throw std::runtime_error("eigensolver: restart loop exited unexpectedly");
}

// Fiber length used for phase conventions: augmented vectors are normalized
// on their slab-0 fiber, plain spatial vectors on the whole vector.
Index fiber_length(const SpaceTimeGrid& grid, Index vector_dim) {
  return vector_dim == grid.dim() ? grid.spatial_count() : vector_dim;
}

void canonical_phase(const SpaceTimeGrid& grid, VectorXcd& w) {
  const Index fl = fiber_length(grid, static_cast<Index>(w.size()));
  Index imax = 0;
  w.head(fl).cwiseAbs().maxCoeff(&imax);
  const double mag = std::abs(w[imax]);
  if (mag > 0.0) w *= std::conj(w[imax]) / mag;
  if (w.imag().norm() <= 1e-10 * w.norm()) {
    w.imag().setZero();
    if (w.real().head(fl).mean() < 0.0) w = -w;
  }
}

struct SolveContext {
  double shift;
  std::unique_ptr<ShiftedSolver> solver;
};

SolveContext factor_with_ladder(const GeneratorMatrix& G, const SpectrumOptions& opts,
                                double scale) {
  if (opts.shift) {
    auto solver = make_shifted_solver(G, *opts.shift);
    if (!solver->ok())
      throw std::runtime_error("eigensolver: factorization failed at explicit shift");
    return {*opts.shift, std::move(solver)};
  }
  double gamma = opts.shift_gamma_rel * std::max(scale, 1e-8);
  for (int attempt = 0; attempt < 8; ++attempt, gamma *= 2.0) {
    auto solver = make_shifted_solver(G, -gamma);
    if (solver->ok()) return {-gamma, std::move(solver)};
  }
  throw std::runtime_error("eigensolver: factorization failed for all shifts in the retry ladder");
}

std::vector<EigenPair> select_pairs(std::vector<EigenPair> pairs, int count, Ordering ordering) {
  std::sort(pairs.begin(), pairs.end(),
            [&](const EigenPair& a, const EigenPair& b) { return better(a.mu, b.mu, ordering); });
  if (static_cast<int>(pairs.size()) > count) pairs.resize(count);
  return pairs;
}

}  // namespace

double inner_weight(const SpaceTimeGrid& grid, Index vector_dim) {
  if (vector_dim == grid.dim()) return grid.box_volume() * grid.slab_width();
  if (vector_dim == grid.spatial_count()) return grid.box_volume();
  throw std::invalid_argument("inner_weight: vector does not match the grid layout");
}

SpectrumResult leading_spectrum(const GeneratorMatrix& G, const SpectrumOptions& opts) {
  if (opts.count < 1) throw std::invalid_argument("leading_spectrum: count must be >= 1");
  const SparseMat& A = G.matrix;
  if (A.rows() != A.cols()) throw std::invalid_argument("leading_spectrum: matrix not square");
  const int count = static_cast<int>(std::min<Index>(opts.count, A.rows()));

  const double scale = max_abs_diagonal(A);
  const double residual_tol =
      opts.residual_tol > 0.0 ? opts.residual_tol : 1e-9 * std::max(1.0, scale);

  SolveContext ctx = factor_with_ladder(G, opts, scale);
  auto pairs = select_pairs(shift_invert_arnoldi(A, *ctx.solver, false, ctx.shift, count,
                                                 opts.ordering, opts, residual_tol),
                            count, opts.ordering);

  SpectrumResult res;
  res.shift = Complex(ctx.shift, 0.0);
  res.ordering = opts.ordering;
  res.eigenvalues.resize(pairs.size());
  res.residual_norms.resize(pairs.size());
  res.right_vectors.resize(A.rows(), pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) {
    canonical_phase(G.grid, pairs[i].w);
    res.eigenvalues[i] = pairs[i].mu;
    res.residual_norms[i] = pairs[i].residual;
    res.right_vectors.col(i) = pairs[i].w;
  }
  return res;
}

SpectrumResult left_right_pairs(const GeneratorMatrix& G, const SpectrumOptions& opts) {
  const SparseMat& A = G.matrix;
  const int count = static_cast<int>(std::min<Index>(opts.count, A.rows()));
  const double scale = max_abs_diagonal(A);
  const double residual_tol =
      opts.residual_tol > 0.0 ? opts.residual_tol : 1e-9 * std::max(1.0, scale);

  SolveContext ctx = factor_with_ladder(G, opts, scale);
  auto rights = select_pairs(shift_invert_arnoldi(A, *ctx.solver, false, ctx.shift, count,
                                                  opts.ordering, opts, residual_tol),
                             count, opts.ordering);

  // simplicity check: refuse clustered target eigenvalues
  const double gap_tol = std::max(1e-10, 1e-8 * scale);
  for (size_t i = 0; i < rights.size(); ++i)
    for (size_t j = i + 1; j < rights.size(); ++j)
      if (std::abs(rights[i].mu - rights[j].mu) < gap_tol) {
        std::ostringstream msg;
        msg << "left_right_pairs: eigenvalue cluster { " << rights[i].mu << ", "
            << rights[j].mu << " } below gap tolerance " << gap_tol;
        throw std::runtime_error(msg.str());
      }

  // For these assemblies the left eigenvectors are close to slab-reversed
  // right eigenvectors (the reflected construction conjugates the transpose
  // with the time-reversal permutation), which makes them ideal starting
  // vectors for the transpose run.
  MatrixXcd hints(A.rows(), rights.size());
  const bool augmented = static_cast<Index>(A.rows()) == G.grid.dim();
  for (size_t k = 0; k < rights.size(); ++k) {
    if (augmented) {
      const Index sc = G.grid.spatial_count();
      for (int s = 0; s < G.grid.n_time(); ++s)
        hints.col(k).segment(static_cast<Index>(G.grid.n_time() - 1 - s) * sc, sc) =
            rights[k].w.segment(static_cast<Index>(s) * sc, sc);
    } else {
      hints.col(k) = rights[k].w;
    }
  }
  auto lefts = shift_invert_arnoldi(A, *ctx.solver, true, ctx.shift,
                                    static_cast<int>(rights.size()), opts.ordering, opts,
                                    residual_tol, &hints);

  const double wM = inner_weight(G.grid, static_cast<Index>(A.rows()));
  const double match_tol = std::max(1e-7 * std::max(1.0, scale), 1e3 * residual_tol);

  SpectrumResult res;
  res.shift = Complex(ctx.shift, 0.0);
  res.ordering = opts.ordering;
  res.eigenvalues.resize(rights.size());
  res.residual_norms.resize(rights.size());
  res.right_vectors.resize(A.rows(), rights.size());
  res.left_vectors.resize(A.rows(), rights.size());
  for (size_t k = 0; k < rights.size(); ++k) {
    canonical_phase(G.grid, rights[k].w);
    VectorXcd f = rights[k].w / std::sqrt(wM);  // <f, f> = 1 in the weighted product
    size_t best = lefts.size();
    double best_dist = match_tol;
    for (size_t j = 0; j < lefts.size(); ++j) {
      const double dist = std::abs(lefts[j].mu - rights[k].mu);
      if (dist < best_dist) {
        best_dist = dist;
        best = j;
      }
    }
    if (best == lefts.size()) {
      std::ostringstream msg;
      msg << "left_right_pairs: no left eigenvalue matches " << rights[k].mu;
      throw std::runtime_error(msg.str());
    }
    VectorXcd g = lefts[best].w;
    const Complex pairing = wM * (g.transpose() * f).value();  // bilinear
    if (std::abs(pairing) < 1e-12)
      throw std::runtime_error("left_right_pairs: near-defective pair, <g, f> ~ 0");
    g /= pairing;

    res.eigenvalues[k] = rights[k].mu;
    res.residual_norms[k] = rights[k].residual;
    res.right_vectors.col(k) = f;
    res.left_vectors.col(k) = g;
  }
  return res;
}

double to_singular_value(Complex mu, double tau) {
  return std::exp(tau * mu.real()) * std::cos(tau * mu.imag());
}

Complex companion_shift(int k, double h, double tau) {
  const double angle = 2.0 * 3.14159265358979323846 * h / (2.0 * tau) * k;
  const Complex omega_k(std::cos(angle), std::sin(angle));
  return (1.0 - omega_k) / h;
}

Complex companion_correlation(const Eigen::VectorXcd& wm, const Eigen::VectorXcd& wn, int k,
                              const SpaceTimeGrid& grid) {
  if (wm.size() != grid.dim() || wn.size() != grid.dim())
    throw std::invalid_argument("companion_correlation: vectors do not match the grid");
  VectorXcd a(wm.size());
  const Index sc = grid.spatial_count();
  for (int s = 0; s < grid.n_time(); ++s) {
    const double angle =
        2.0 * 3.14159265358979323846 * k * grid.slab_midpoint(s) / (2.0 * grid.tau());
    a.segment(static_cast<Index>(s) * sc, sc) =
        Complex(std::cos(angle), std::sin(angle)) *
        wm.segment(static_cast<Index>(s) * sc, sc);
  }
  const double na = a.norm(), nb = wn.norm();
  if (na == 0.0 || nb == 0.0)
    throw std::invalid_argument("companion_correlation: zero-norm input");
  return (a.adjoint() * wn).value() / (na * nb);
}

TrackResult track_eigenpair(const Eigen::VectorXcd& reference, const SpectrumResult& spectrum,
                            double threshold) {
  if (spectrum.count() == 0) throw std::invalid_argument("track_eigenpair: empty spectrum");
  const double rn = reference.norm();
  if (rn == 0.0) throw std::invalid_argument("track_eigenpair: zero reference");
  TrackResult best;
  for (int j = 0; j < spectrum.count(); ++j) {
    const double c = std::abs((reference.adjoint() * spectrum.right_vectors.col(j)).value()) /
                     (rn * spectrum.right_vectors.col(j).norm());
    if (c > best.correlation) best = {j, c};
  }
  if (best.correlation < threshold) {
    std::ostringstream msg;
    msg << "track_eigenpair: ambiguous tracking, best correlation " << best.correlation
        << " below threshold " << threshold;
    throw std::runtime_error(msg.str());
  }
  return best;
}

}  // namespace cohflow
