#include "cohflow/run.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "cohflow/coherent.hpp"
#include "cohflow/io.hpp"
#include "cohflow/simulate.hpp"

namespace cohflow {

namespace {

using Clock = std::chrono::steady_clock;

const Json& need(const Json& config, const std::string& key) {
  if (!config.contains(key))
    throw std::invalid_argument("config: key '" + key + "' is missing");
  return config.at(key);
}

class RunContext {
 public:
  RunContext(Json& manifest, std::filesystem::path out) : manifest_(manifest), out_(std::move(out)) {}

  template <typename Fn>
  auto phase(const std::string& name, Fn&& fn) -> decltype(fn()) {
    const auto t0 = Clock::now();
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        record(name, t0);
      } else {
        auto result = fn();
        record(name, t0);
        return result;
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("phase '" + name + "': " + e.what());
    }
  }

  const std::filesystem::path& out() const { return out_; }

  void artifact(const std::filesystem::path& file) {
    manifest_["artifacts"].push_back(
        {{"path", std::filesystem::relative(file, out_).string()},
         {"checksum", file_checksum(file)}});
  }

  Json& results() { return manifest_["results"]; }

 private:
  void record(const std::string& name, Clock::time_point t0) {
    manifest_["phases"][name] = std::chrono::duration<double>(Clock::now() - t0).count();
  }

  Json& manifest_;
  std::filesystem::path out_;
};

Json complex_json(Complex z) { return Json{z.real(), z.imag()}; }

void write_spectrum_csv(RunContext& ctx, const SpectrumResult& spec, double tau,
                        const std::vector<int>& companion_of) {
  std::ostringstream os;
  os.precision(17);
  os << "index,re_mu,im_mu,sigma,residual\n";
  for (int i = 0; i < spec.count(); ++i) {
    os << i + 1 << ',' << spec.eigenvalues[i].real() << ',' << spec.eigenvalues[i].imag()
       << ',';
    if (companion_of.empty() || companion_of[i] < 0)
      os << to_singular_value(spec.eigenvalues[i], tau);
    os << ',' << spec.residual_norms[i] << '\n';
  }
  const auto path = ctx.out() / "spectrum.csv";
  write_text(path, os.str());
  ctx.artifact(path);
}

void export_vector(RunContext& ctx, const SpaceTimeGrid& grid, const Eigen::VectorXd& vec,
                   const std::string& stem, Json& sink) {
  Eigen::MatrixXd table(grid.n_time(), grid.spatial_count());
  for (int s = 0; s < grid.n_time(); ++s)
    for (Index b = 0; b < grid.spatial_count(); ++b) table(s, b) = vec[grid.flatten(s, b)];
  const auto bin = ctx.out() / (stem + ".bin");
  write_binary_array(bin, table);
  ctx.artifact(bin);
  if (grid.spatial_dims() == 2) {
    for (int slab : {0, grid.n_time() / 2}) {
      const auto pgm = ctx.out() / (stem + "_slab" + std::to_string(slab) + ".pgm");
      const auto [lo, hi] = write_pgm(pgm, fiber_grid(grid, vec, slab));
      ctx.artifact(pgm);
      sink["heatmaps"].push_back(
          {{"path", pgm.filename().string()}, {"min", lo}, {"max", hi}, {"slab", slab}});
    }
  }
}

// Classify complex modes as companions mu_i - mu^(k) of real modes.
struct CompanionTag {
  int partner = -1;  // index of the real mode, -1 when not a companion
  int k = 0;
  double distance = 0.0;
  double correlation = 0.0;
};

std::vector<CompanionTag> classify_companions(const SpectrumResult& spec,
                                              const SpaceTimeGrid& grid, double match_tol) {
  const double h = grid.slab_width(), tau = grid.tau();
  std::vector<CompanionTag> tags(spec.count());
  for (int j = 0; j < spec.count(); ++j) {
    if (std::abs(spec.eigenvalues[j].imag()) < 1e-8) continue;
    CompanionTag best;
    best.distance = match_tol;
    for (int i = 0; i < spec.count(); ++i) {
      if (i == j || std::abs(spec.eigenvalues[i].imag()) > 1e-8) continue;
      for (int k = -3; k <= 3; ++k) {
        if (k == 0) continue;
        const double dist =
            std::abs(spec.eigenvalues[j] - (spec.eigenvalues[i] - companion_shift(k, h, tau)));
        if (dist < best.distance) {
          best.partner = i;
          best.k = k;
          best.distance = dist;
        }
      }
    }
    if (best.partner >= 0)
      best.correlation = std::abs(companion_correlation(
          spec.right_vectors.col(best.partner), spec.right_vectors.col(j), best.k, grid));
    tags[j] = best;
  }
  return tags;
}

void run_spectrum(const Json& config, RunContext& ctx) {
  const SpaceTimeGrid grid = ctx.phase("grid", [&] { return build_grid(parse_grid(config)); });
  const VelocityField field = parse_field(config);
  const double epsilon = parse_epsilon(config);
  const GeneratorMatrix G = ctx.phase("assemble", [&] {
    return assemble_augmented(grid, reflect(field, grid.tau()), epsilon,
                              parse_assembly(config));
  });
  const SpectrumResult spec =
      ctx.phase("spectrum", [&] { return leading_spectrum(G, parse_solver(config)); });

  std::vector<int> companion_of;
  Json& res = ctx.results();
  if (config.value("companions", false)) {
    const auto tags = classify_companions(spec, grid, 0.05);
    companion_of.resize(spec.count(), -1);
    for (int j = 0; j < spec.count(); ++j) {
      if (tags[j].partner < 0) continue;
      companion_of[j] = tags[j].partner;
      res["companions"].push_back({{"index", j + 1},
                                   {"partner", tags[j].partner + 1},
                                   {"k", tags[j].k},
                                   {"distance", tags[j].distance},
                                   {"correlation", tags[j].correlation}});
    }
  }

  ctx.phase("export", [&] {
    write_spectrum_csv(ctx, spec, grid.tau(), companion_of);
    for (int i = 0; i < spec.count(); ++i) {
      res["eigenvalues"].push_back(complex_json(spec.eigenvalues[i]));
      res["residuals"].push_back(spec.residual_norms[i]);
      if (companion_of.empty() || companion_of[i] < 0)
        res["sigmas"].push_back(to_singular_value(spec.eigenvalues[i], grid.tau()));
      else
        res["sigmas"].push_back(nullptr);
      Json sink;
      export_vector(ctx, grid, spec.right_vectors.col(i).real(),
                    "eigvec_" + std::to_string(i + 1), sink);
      res["eigenvectors"].push_back(sink);
    }
    res["shift"] = complex_json(spec.shift);
  });
}

Eigen::MatrixXd real_vectors(const SpectrumResult& spec) {
  Eigen::MatrixXd V(spec.right_vectors.rows(), spec.count());
  for (int i = 0; i < spec.count(); ++i) {
    if (spec.right_vectors.col(i).imag().norm() >
        1e-8 * spec.right_vectors.col(i).norm())
      std::fprintf(stderr, "cohflow: warning: taking the real part of eigenvector %d\n", i + 1);
    V.col(i) = spec.right_vectors.col(i).real();
  }
  return V;
}

void run_seba(const Json& config, RunContext& ctx) {
  const SpaceTimeGrid grid = ctx.phase("grid", [&] { return build_grid(parse_grid(config)); });
  const VelocityField field = parse_field(config);
  const double epsilon = parse_epsilon(config);
  const GeneratorMatrix G = ctx.phase("assemble", [&] {
    return assemble_augmented(grid, reflect(field, grid.tau()), epsilon,
                              parse_assembly(config));
  });
  SpectrumOptions sopts = parse_solver(config);
  const int seba_count =
      config.contains("seba") ? config.at("seba").value("count", sopts.count) : sopts.count;
  sopts.count = std::max(sopts.count, seba_count);
  const SpectrumResult spec =
      ctx.phase("spectrum", [&] { return leading_spectrum(G, sopts); });

  const Eigen::MatrixXd V = real_vectors(spec).leftCols(seba_count);
  const SparseBasis basis = ctx.phase("seba", [&] { return seba(V); });

  Json& res = ctx.results();
  res["seba_iterations"] = basis.iterations;
  res["seba_converged"] = basis.converged;
  res["seba_threshold"] = basis.threshold;

  ctx.phase("contributions", [&] {
    // Proposition-style contribution adjustment for each sparse feature:
    // express the feature in the eigenbasis, zero negative contributions.
    const Eigen::MatrixXd gram = V.transpose() * V;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    for (int k = 0; k < basis.vectors.cols(); ++k) {
      const Eigen::VectorXd alpha = ldlt.solve(V.transpose() * basis.vectors.col(k));
      const Eigen::VectorXd combined = V * alpha;
      const BoxFamily family = level_set_family(grid, combined, +1);
      const ContributionResult adj = contribution_check(alpha, V, family);
      Json entry;
      entry["zeroed"] = adj.zeroed;
      double max_zeroed = 0.0;
      for (int idx : adj.zeroed) max_zeroed = std::max(max_zeroed, std::abs(alpha[idx]));
      entry["max_zeroed_alpha"] = max_zeroed;
      entry["alpha_norm"] = alpha.norm();
      res["contributions"].push_back(entry);
    }
  });

  ctx.phase("export", [&] {
    for (int k = 0; k < basis.vectors.cols(); ++k) {
      Json sink;
      export_vector(ctx, grid, basis.vectors.col(k), "seba_" + std::to_string(k + 1), sink);
      res["seba_vectors"].push_back(sink);
    }
    for (int i = 0; i < spec.count(); ++i)
      res["eigenvalues"].push_back(complex_json(spec.eigenvalues[i]));
  });

  if (config.contains("particles")) {
    const Json& pc = config.at("particles");
    const auto n = static_cast<Eigen::Index>(pc.value("n", 2000));
    const double dt = pc.value("dt", grid.tau() / (4.0 * (grid.n_time() / 2)));
    const double level = pc.value("level", 0.4);
    const std::uint64_t seed = parse_seed(config);

    ctx.phase("particles", [&] {
      // Seed inside the most prominent initial-time vortex among the
      // sparse features (largest superlevel set at slab 0).
      int pick = 0;
      Eigen::Index best = -1;
      std::vector<Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>> masks(basis.vectors.cols());
      for (int k = 0; k < basis.vectors.cols(); ++k) {
        masks[k].resize(grid.spatial_count());
        Eigen::Index cnt = 0;
        for (Index b = 0; b < grid.spatial_count(); ++b) {
          const bool in = basis.vectors(grid.flatten(0, b), k) > level;
          masks[k][b] = in ? 1 : 0;
          if (in) ++cnt;
        }
        if (cnt > best) {
          best = cnt;
          pick = k;
        }
      }
      BoxFamily seed_family;
      seed_family.grid = grid;
      seed_family.membership.resize(grid.n_time() / 2 + 1, grid.spatial_count());
      for (int j = 0; j < seed_family.membership.rows(); ++j)
        seed_family.membership.row(j) = masks[pick].transpose();

      auto export_ensemble = [&](const ParticleEnsemble& e, const std::string& stem) {
        std::ostringstream os;
        os.precision(10);
        os << "id,x,y,alive\n";
        for (Eigen::Index i = 0; i < e.count(); ++i)
          os << i << ',' << e.positions(0, i) << ',' << e.positions(1, i) << ','
             << static_cast<int>(e.alive[i]) << '\n';
        const auto path = ctx.out() / (stem + ".csv");
        write_text(path, os.str());
        ctx.artifact(path);
      };

      ParticleEnsemble initial = seed_in_family(seed_family, n, seed);
      export_ensemble(initial, "particles_initial");
      for (const double eps : {0.0, parse_epsilon(config)}) {
        ParticleEnsemble e = initial;
        integrate_ensemble(field, eps, e, 0.0, grid.tau(), dt, Scheme::Rk4Maruyama, grid);
        const std::string tag = eps == 0.0 ? "deterministic" : "noisy";
        export_ensemble(e, "particles_final_" + tag);
        Eigen::Index alive = 0;
        for (auto a : e.alive) alive += a;
        res["particles"][tag]["alive_fraction"] =
            static_cast<double>(alive) / static_cast<double>(n);
      }
      res["particles"]["seba_index"] = pick + 1;
      res["particles"]["seed_boxes"] = best;
    });
  }
}

void run_flux(const Json& config, RunContext& ctx) {
  const SpaceTimeGrid grid = build_grid(parse_grid(config));
  const VelocityField field = parse_field(config);
  const Json& fc = need(config, "flux");
  const double tau = grid.tau();
  FluxOptions fopts;
  fopts.time_nodes = fc.value("time_nodes", 200);
  fopts.boundary_nodes = fc.value("boundary_nodes", 200);
  const double radius = fc.value("radius", 0.2);
  const auto& cj = fc.at("center");
  const auto& sj = fc.at("sweep");
  const Eigen::Vector2d c0(cj[0].get<double>(), cj[1].get<double>());
  const Eigen::Vector2d sweep(sj[0].get<double>(), sj[1].get<double>());
  constexpr double kPi = 3.14159265358979323846;

  const ParamFamily disk = translating_disk(
      tau,
      [c0, sweep, tau](double t) {
        return (c0 + sweep * std::sin(kPi * t / tau)).eval();
      },
      [sweep, tau](double t) {
        return (sweep * (kPi / tau) * std::cos(kPi * t / tau)).eval();
      },
      radius);

  Json& res = ctx.results();
  ctx.phase("flux", [&] {
    res["cumulative_outflux"] = cumulative_outflux(disk, field, true, fopts);
    res["cumulative_absolute"] = cumulative_outflux(disk, field, false, fopts);
    res["augmented_outflux"] = augmented_flux(disk, field, false, fopts);
    res["augmented_absolute"] = augmented_flux(disk, field, true, fopts);
    const double rel =
        std::abs(res["cumulative_absolute"].get<double>() -
                 res["augmented_absolute"].get<double>()) /
        std::max(res["cumulative_absolute"].get<double>(),
                 res["augmented_absolute"].get<double>());
    res["identity_residual"] = rel;
  });

  ctx.phase("reflected-identity", [&] {
    const ParamFamily mirrored = reflect_family(disk, tau);
    const ReflectedField vhat = reflect(field, tau);
    const double lhs = cumulative_outflux(mirrored, vhat, true, fopts);
    const double rhs = res["cumulative_absolute"].get<double>();
    res["reflected_outflux"] = lhs;
    res["reflected_identity_residual"] = std::abs(lhs - rhs) / std::max(lhs, rhs);
  });

  ctx.phase("comoving", [&] {
    // Co-moving disk in its own constant field: both fluxes vanish.
    const Eigen::Vector2d drift(0.15, 0.05);
    const ParamFamily comoving = translating_disk(
        tau, [c0, drift](double t) { return (c0 + t * drift).eval(); },
        [drift](double) { return drift; }, radius);
    Point vv(2);
    vv[0] = drift.x();
    vv[1] = drift.y();
    const VelocityField constant = constant_field(vv, tau);
    res["comoving_cumulative"] = cumulative_outflux(comoving, constant, true, fopts);
    res["comoving_augmented"] = augmented_flux(comoving, constant, true, fopts);
  });
}

void run_coherence_mc(const Json& config, RunContext& ctx) {
  const SpaceTimeGrid grid = ctx.phase("grid", [&] { return build_grid(parse_grid(config)); });
  const VelocityField field = parse_field(config);
  const double epsilon = parse_epsilon(config);
  const Json& mc = config.contains("mc") ? config.at("mc") : Json::object();
  const int eigen_index = mc.value("eigen_index", 2);
  const int sign = mc.value("sign", 1);
  const auto n = static_cast<Eigen::Index>(mc.value("n", 100000));
  const double dt = mc.value("dt", grid.tau() / (4.0 * (grid.n_time() / 2)));
  const std::uint64_t seed = parse_seed(config);

  const GeneratorMatrix G = ctx.phase("assemble", [&] {
    return assemble_augmented(grid, reflect(field, grid.tau()), epsilon,
                              parse_assembly(config));
  });
  SpectrumOptions sopts = parse_solver(config);
  sopts.count = std::max(sopts.count, eigen_index + 1);
  const SpectrumResult spec =
      ctx.phase("spectrum", [&] { return leading_spectrum(G, sopts); });

  const Eigen::VectorXd vec = spec.right_vectors.col(eigen_index - 1).real();
  const double mu = spec.eigenvalues[eigen_index - 1].real();
  const BoxFamily family = level_set_family(grid, vec, sign);
  const double bound = coherence_bound(mu, vec, sign, grid);

  const CoherenceEstimate est = ctx.phase("monte-carlo", [&] {
    return coherence_ratio_mc(family, field, epsilon, n, dt, seed);
  });

  Json& res = ctx.results();
  res["mu"] = mu;
  res["bound"] = bound;
  res["ratio"] = est.ratio;
  res["stderr"] = est.stderror;
  res["stayed"] = est.stayed;
  res["total"] = est.total;
  res["check_interval"] = est.check_interval;
  res["bound_satisfied"] = est.ratio >= bound - 3.0 * est.stderror;
}

void run_optimize(const Json& config, RunContext& ctx) {
  const SpaceTimeGrid grid = ctx.phase("grid", [&] { return build_grid(parse_grid(config)); });
  const VelocityField field = parse_field(config);
  const Json& oc = need(config, "optimize");

  const PerturbationDictionary dict =
      ctx.phase("dictionary", [&] { return build_dictionary(parse_dictionary(config)); });
  const ConstraintForm form = ctx.phase("gram", [&] { return gram_matrix(dict); });

  OptimizeTarget target;
  if (oc.contains("eigen_index")) {
    target.eigen_index = oc.at("eigen_index").get<int>();
  } else if (oc.contains("feature")) {
    const std::string fname = oc.at("feature").get<std::string>();
    if (fname != "one_minus_cos_2y")
      throw std::invalid_argument("config: unknown feature '" + fname + "'");
    Eigen::VectorXd phi(grid.dim());
    for (int s = 0; s < grid.n_time(); ++s)
      for (Index b = 0; b < grid.spatial_count(); ++b)
        phi[grid.flatten(s, b)] = 1.0 - std::cos(2.0 * grid.spatial_center(b)[1]);
    target.feature = normalize_feature(grid, phi);
  } else {
    throw std::invalid_argument("config: optimize needs eigen_index or feature");
  }

  OptimizeOptions oopts;
  oopts.steps = oc.value("steps", 8);
  oopts.radius = oc.value("radius", 0.05);
  oopts.epsilon = parse_epsilon(config);
  oopts.spectrum = parse_solver(config);
  oopts.assembly = parse_assembly(config);
  const std::string sense_str = oc.value("sense", "enhance");
  const Sense sense = sense_str == "destroy" ? Sense::Destroy : Sense::Enhance;

  const OptimizationState state = ctx.phase("optimize", [&] {
    return iterate_optimization(grid, field, dict, form, target, sense, oopts);
  });

  Json& res = ctx.results();
  ctx.phase("export", [&] {
    std::ostringstream os;
    os.precision(17);
    os << "step,z,re_mu,im_mu,objective,tracked_index,accepted\n";
    for (const auto& rec : state.records)
      os << rec.step << ',' << rec.z << ',' << rec.tracked_mu.real() << ','
         << rec.tracked_mu.imag() << ',' << rec.objective << ',' << rec.tracked_index + 1
         << ',' << (rec.accepted ? 1 : 0) << '\n';
    const auto path = ctx.out() / "optimization.csv";
    write_text(path, os.str());
    ctx.artifact(path);

    std::ostringstream cs;
    cs.precision(17);
    cs << "index,k,l,r,coefficient\n";
    for (int i = 0; i < dict.size(); ++i)
      cs << i << ',' << dict.entries[i].k << ',' << dict.entries[i].l << ','
         << dict.entries[i].r << ',' << state.u_total[i] << '\n';
    const auto cpath = ctx.out() / "coefficients.csv";
    write_text(cpath, cs.str());
    ctx.artifact(cpath);

    // streamfunction of the accumulated perturbation on a plotting lattice
    const int px = 200, py = 100;
    Eigen::MatrixXd stream(py, px);
    for (int j = 0; j < py; ++j)
      for (int i = 0; i < px; ++i) {
        const double x =
            dict.spec.lo[0] + (i + 0.5) * (dict.spec.hi[0] - dict.spec.lo[0]) / px;
        const double y =
            dict.spec.lo[1] + (j + 0.5) * (dict.spec.hi[1] - dict.spec.lo[1]) / py;
        stream(py - 1 - j, i) = dict.stream(state.u_total, 0.0, x, y);
      }
    const auto spath = ctx.out() / "perturbation_stream_t0.bin";
    write_binary_array(spath, stream);
    ctx.artifact(spath);
    const auto ppath = ctx.out() / "perturbation_stream_t0.pgm";
    const auto [lo, hi] = write_pgm(ppath, stream);
    ctx.artifact(ppath);
    res["stream_plot"] = {{"min", lo}, {"max", hi}};

    for (const Complex mu : state.trajectory) res["trajectory"].push_back(complex_json(mu));
    for (const double j : state.objective_trace) res["objective_trace"].push_back(j);
    res["tracked_indices"] = state.tracked_indices;
    res["halted_early"] = state.halted_early;
    if (state.halted_early) res["halt_reason"] = state.halt_reason;
    int accepted = 0;
    for (const auto& rec : state.records)
      if (rec.accepted) ++accepted;
    res["accepted_steps"] = accepted;
    res["z_values"] = Json::array();
    for (const auto& rec : state.records) res["z_values"].push_back(rec.z);

    if (!state.trajectory.empty())
      res["total_change"] =
          state.trajectory.back().real() - state.trajectory.front().real();

    // coefficient magnitudes grouped by spatial mode
    std::map<std::string, double> group_sq;
    for (int i = 0; i < dict.size(); ++i) {
      const auto& e = dict.entries[i];
      const std::string key = "k" + std::to_string(e.k) + "_l" + std::to_string(e.l);
      group_sq[key] += state.u_total[i] * state.u_total[i];
    }
    std::string argmax;
    double best = -1.0;
    for (const auto& [key, sq] : group_sq) {
      res["coefficient_groups"][key] = std::sqrt(sq);
      if (sq > best) {
        best = sq;
        argmax = key;
      }
    }
    res["largest_group"] = argmax;
    res["u_total_norm"] = state.u_total.norm();
  });
}

}  // namespace

Json run(Json config) {
  if (!config.contains("experiment"))
    throw std::invalid_argument("config: key 'experiment' is missing");
  std::string experiment = config.at("experiment").get<std::string>();

  if (experiment == "reproduce") {
    Json preset = preset_config(need(config, "preset").get<std::string>(),
                                config.value("scale", "full"));
    if (config.contains("out")) preset["out"] = config.at("out");
    if (config.contains("seed")) preset["seed"] = config.at("seed");
    return run(preset);
  }

  const std::filesystem::path out = config.value("out", std::string("out"));
  std::filesystem::create_directories(out);

  Json manifest;
  manifest["tool_version"] = "0.1.0";
  manifest["config"] = config;
  manifest["phases"] = Json::object();
  manifest["results"] = Json::object();
  manifest["artifacts"] = Json::array();
  RunContext ctx(manifest, out);

  if (experiment == "spectrum")
    run_spectrum(config, ctx);
  else if (experiment == "seba")
    run_seba(config, ctx);
  else if (experiment == "flux")
    run_flux(config, ctx);
  else if (experiment == "coherence-mc")
    run_coherence_mc(config, ctx);
  else if (experiment == "optimize")
    run_optimize(config, ctx);
  else
    throw std::invalid_argument("config: key 'experiment' must be one of spectrum, seba, "
                                "flux, coherence-mc, optimize, reproduce");

  const auto mpath = out / "manifest.json";
  write_text(mpath, manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace cohflow
