#include "cohflow/config.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace cohflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  throw std::invalid_argument("config: key '" + key + "' " + why);
}

const Json& need(const Json& config, const std::string& key) {
  if (!config.contains(key)) bad_key(key, "is missing");
  return config.at(key);
}

double need_number(const Json& config, const std::string& key) {
  const Json& v = need(config, key);
  if (!v.is_number()) bad_key(key, "must be a number");
  return v.get<double>();
}

int need_int(const Json& config, const std::string& key) {
  const Json& v = need(config, key);
  if (!v.is_number_integer()) bad_key(key, "must be an integer");
  return v.get<int>();
}

std::string need_string(const Json& config, const std::string& key) {
  const Json& v = need(config, key);
  if (!v.is_string()) bad_key(key, "must be a string");
  return v.get<std::string>();
}

double get_or(const Json& config, const std::string& key, double fallback) {
  return config.contains(key) ? need_number(config, key) : fallback;
}

int get_or(const Json& config, const std::string& key, int fallback) {
  return config.contains(key) ? need_int(config, key) : fallback;
}

}  // namespace

Json load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is.good()) throw std::runtime_error("config: cannot open " + path.string());
  Json doc;
  try {
    is >> doc;
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument("config: parse error in " + path.string() + ": " + e.what());
  }
  return doc;
}

GridConfig parse_grid(const Json& config) {
  const Json& g = need(config, "grid");
  GridConfig gc;
  gc.tau = need_number(g, "tau");
  gc.n_time = need_int(g, "n_time");
  const Json& bounds = need(g, "bounds");
  const Json& boxes = need(g, "boxes");
  const Json& bc = need(g, "bc");
  if (!bounds.is_array() || !boxes.is_array() || !bc.is_array())
    bad_key("grid.bounds/boxes/bc", "must be arrays");
  if (bounds.size() != boxes.size() || bounds.size() != bc.size())
    bad_key("grid", "bounds, boxes and bc must have equal lengths");
  for (size_t a = 0; a < bounds.size(); ++a) {
    if (!bounds[a].is_array() || bounds[a].size() != 2)
      bad_key("grid.bounds", "entries must be [lo, hi]");
    gc.bounds.push_back({bounds[a][0].get<double>(), bounds[a][1].get<double>()});
    gc.boxes.push_back(boxes[a].get<int>());
    gc.bc.push_back(boundary_condition_from_string(bc[a].get<std::string>()));
  }
  return gc;
}

VelocityField parse_field(const Json& config) {
  const Json& f = need(config, "field");
  const std::string name = need_string(f, "name");
  const double tau = need_number(need(config, "grid"), "tau");
  VelocityField base;
  if (name == "double_gyre") {
    DoubleGyreParams p;
    p.amplitude = get_or(f, "amplitude", 0.25);
    p.gamma = get_or(f, "gamma", 0.25);
    base = double_gyre_field(p, tau);
  } else if (name == "bickley") {
    base = bickley_jet_field(BickleyParams{}, tau);
  } else if (name == "traveling_wave") {
    TravelingWaveParams p;
    p.amplitude = get_or(f, "amplitude", 1.0);
    p.drift = get_or(f, "drift", 1.0);
    p.wave_speed = get_or(f, "wave_speed", 0.25);
    base = traveling_wave_field(p, tau);
  } else if (name == "constant") {
    const Json& v = need(f, "value");
    Point c(v.size());
    for (size_t i = 0; i < v.size(); ++i) c[i] = v[i].get<double>();
    base = constant_field(c, tau);
  } else {
    bad_key("field.name", "must be one of double_gyre, bickley, traveling_wave, constant");
  }

  if (config.contains("perturbation")) {
    const Json& p = config.at("perturbation");
    PerturbationDictionary dict = build_dictionary(parse_dictionary(config));
    const Json& cj = need(p, "coefficients");
    if (static_cast<int>(cj.size()) != dict.size())
      bad_key("perturbation.coefficients", "size does not match the dictionary");
    Eigen::VectorXd coeffs(dict.size());
    for (int i = 0; i < dict.size(); ++i) coeffs[i] = cj[i].get<double>();
    VelocityField pert = dict.combination_field(coeffs);
    VelocityField total = base;
    total.eval = [base, pert](double t, const Point& x, Point& v) {
      Point w(v.size());
      base.eval(t, x, v);
      pert.eval(t, x, w);
      v += w;
    };
    return total;
  }
  return base;
}

double parse_epsilon(const Json& config) {
  const double eps = need_number(config, "epsilon");
  if (eps < 0) bad_key("epsilon", "must be nonnegative");
  return eps;
}

SpectrumOptions parse_solver(const Json& config) {
  SpectrumOptions opts;
  if (!config.contains("solver")) return opts;
  const Json& s = config.at("solver");
  opts.count = get_or(s, "count", opts.count);
  if (s.contains("ordering")) {
    const std::string ord = need_string(s, "ordering");
    if (ord == "smallest-magnitude")
      opts.ordering = Ordering::SmallestMagnitude;
    else if (ord == "largest-real")
      opts.ordering = Ordering::LargestReal;
    else
      bad_key("solver.ordering", "must be smallest-magnitude or largest-real");
  }
  if (s.contains("shift")) opts.shift = need_number(s, "shift");
  opts.shift_gamma_rel = get_or(s, "shift_gamma_rel", opts.shift_gamma_rel);
  opts.subspace = get_or(s, "subspace", opts.subspace);
  opts.max_restarts = get_or(s, "max_restarts", opts.max_restarts);
  opts.arnoldi_tol = get_or(s, "arnoldi_tol", opts.arnoldi_tol);
  opts.residual_tol = get_or(s, "residual_tol", opts.residual_tol);
  return opts;
}

AssemblyOptions parse_assembly(const Json& config) {
  AssemblyOptions opts;
  if (!config.contains("assembly")) return opts;
  const Json& a = config.at("assembly");
  opts.face_quadrature = get_or(a, "face_quadrature", opts.face_quadrature);
  if (a.contains("mirror_reuse")) {
    if (!a.at("mirror_reuse").is_boolean()) bad_key("assembly.mirror_reuse", "must be boolean");
    opts.mirror_reuse = a.at("mirror_reuse").get<bool>();
  }
  return opts;
}

DictionarySpec parse_dictionary(const Json& config) {
  const Json& d = need(config, "dictionary");
  DictionarySpec spec;
  for (const auto& k : need(d, "k_modes")) spec.k_modes.push_back(k.get<int>());
  for (const auto& l : need(d, "l_modes")) spec.l_modes.push_back(l.get<int>());
  if (d.contains("temporal_modes")) {
    spec.temporal_modes.clear();
    for (const auto& r : d.at("temporal_modes")) spec.temporal_modes.push_back(r.get<int>());
  }
  spec.cx = get_or(d, "cx", 0.0);
  spec.cy = get_or(d, "cy", 0.0);
  const GridConfig gc = parse_grid(config);
  if (gc.bounds.size() != 2) bad_key("dictionary", "requires a 2-D spatial grid");
  spec.lo = {gc.bounds[0][0], gc.bounds[1][0]};
  spec.hi = {gc.bounds[0][1], gc.bounds[1][1]};
  spec.tau = gc.tau;
  return spec;
}

std::uint64_t parse_seed(const Json& config) {
  if (!config.contains("seed")) bad_key("seed", "is mandatory for stochastic runs");
  if (!config.at("seed").is_number_integer()) bad_key("seed", "must be an integer");
  return config.at("seed").get<std::uint64_t>();
}

void apply_override(Json& config, const std::string& dotted_key, const std::string& value) {
  Json* node = &config;
  std::string rest = dotted_key;
  size_t dot;
  while ((dot = rest.find('.')) != std::string::npos) {
    node = &(*node)[rest.substr(0, dot)];
    rest = rest.substr(dot + 1);
  }
  Json parsed = Json::parse(value, nullptr, false);
  (*node)[rest] = parsed.is_discarded() ? Json(value) : parsed;
}

namespace {

Json double_gyre_grid(const std::string& scale) {
  const bool full = scale != "ci";
  return Json{{"tau", 4.0},
              {"n_time", full ? 80 : 40},
              {"bounds", {{0.0, 2.0}, {0.0, 1.0}}},
              {"boxes", {full ? 100 : 50, full ? 50 : 25}},
              {"bc", {"reflecting", "reflecting"}}};
}

Json bickley_grid(const std::string& scale) {
  const bool full = scale != "ci";
  return Json{{"tau", 9.0},
              {"n_time", full ? 108 : 54},
              {"bounds", {{0.0, kPi * 6.371}, {-3.0, 3.0}}},
              {"boxes", {full ? 120 : 60, full ? 36 : 18}},
              {"bc", {"periodic", "outflow"}}};
}

Json traveling_wave_grid(const std::string& scale) {
  const bool full = scale != "ci";
  return Json{{"tau", 4.0},
              {"n_time", full ? 80 : 40},
              {"bounds", {{0.0, 2.0 * kPi}, {0.0, kPi}}},
              {"boxes", {full ? 80 : 40, full ? 40 : 20}},
              {"bc", {"periodic", "reflecting"}}};
}

Json double_gyre_dictionary() {
  return Json{{"k_modes", {1, 2, 3, 4, 5}},
              {"l_modes", {1, 2, 3}},
              {"temporal_modes", {-1, 0, 2}},
              {"cx", 0.0},
              {"cy", 0.0}};
}

Json traveling_wave_dictionary() {
  return Json{{"k_modes", {2, 4, 6, 8, 10, 12, 14, 16, 18, 20}},
              {"l_modes", {1, 2, 3, 4, 5}},
              {"temporal_modes", {-1, 0, 2}},
              {"cx", 0.25},
              {"cy", 0.0}};
}

}  // namespace

std::vector<PresetInfo> list_presets() {
  return {
      {"double-gyre-spectrum",
       "Leading spectrum and singular values of the driven double gyre"},
      {"double-gyre-increase",
       "Strengthen the left-right separation of the double gyre (8 steps, R = 0.05)"},
      {"double-gyre-decrease",
       "Break up the double-gyre vortex pair (8 steps, R = 0.05, rank tracking)"},
      {"bickley-spectrum",
       "Bickley jet spectrum with companion-eigenvalue classification"},
      {"bickley-seba", "Sparse vortex basis for the Bickley jet via SEBA"},
      {"bickley-particles",
       "Particle ensembles seeded in a SEBA vortex, deterministic and noisy"},
      {"traveling-wave-feature",
       "Feature-targeted optimization of the traveling wave (35 steps, R = 0.1)"},
      {"flux-identity-demo",
       "Cumulative vs augmented boundary flux for a translating disk"},
  };
}

Json preset_config(const std::string& name, const std::string& scale) {
  if (scale != "full" && scale != "ci")
    throw std::invalid_argument("config: scale must be 'full' or 'ci'");
  const bool full = scale == "full";
  if (name == "double-gyre-spectrum") {
    return Json{{"experiment", "spectrum"},
                {"preset", name},
                {"scale", scale},
                {"grid", double_gyre_grid(scale)},
                {"field", {{"name", "double_gyre"}}},
                {"epsilon", 0.1},
                {"solver", {{"count", 8}}},
                {"seed", 7},
                {"out", "out/double-gyre-spectrum"}};
  }
  if (name == "double-gyre-increase" || name == "double-gyre-decrease") {
    const bool increase = name == "double-gyre-increase";
    return Json{{"experiment", "optimize"},
                {"preset", name},
                {"scale", scale},
                {"grid", double_gyre_grid(scale)},
                {"field", {{"name", "double_gyre"}}},
                {"epsilon", 0.1},
                {"solver", {{"count", 8}}},
                {"dictionary", double_gyre_dictionary()},
                {"optimize",
                 {{"steps", 8},
                  {"radius", 0.05},
                  {"sense", increase ? "enhance" : "destroy"},
                  {"eigen_index", increase ? 2 : 5}}},
                {"seed", 7},
                {"out", std::string("out/") + name}};
  }
  if (name == "bickley-spectrum") {
    return Json{{"experiment", "spectrum"},
                {"preset", name},
                {"scale", scale},
                {"grid", bickley_grid(scale)},
                {"field", {{"name", "bickley"}}},
                {"epsilon", 0.1},
                {"solver", {{"count", 10}}},
                {"companions", true},
                {"seed", 7},
                {"out", "out/bickley-spectrum"}};
  }
  if (name == "bickley-seba") {
    return Json{{"experiment", "seba"},
                {"preset", name},
                {"scale", scale},
                {"grid", bickley_grid(scale)},
                {"field", {{"name", "bickley"}}},
                {"epsilon", 0.1},
                {"solver", {{"count", 6}}},
                {"seba", {{"count", 6}}},
                {"seed", 7},
                {"out", "out/bickley-seba"}};
  }
  if (name == "bickley-particles") {
    return Json{{"experiment", "seba"},
                {"preset", name},
                {"scale", scale},
                {"grid", bickley_grid(scale)},
                {"field", {{"name", "bickley"}}},
                {"epsilon", 0.1},
                {"solver", {{"count", 6}}},
                {"seba", {{"count", 6}}},
                {"particles", {{"n", full ? 5000 : 2000}, {"dt", 9.0 / 432.0}, {"level", 0.4}}},
                {"seed", 7},
                {"out", "out/bickley-particles"}};
  }
  if (name == "traveling-wave-feature") {
    return Json{{"experiment", "optimize"},
                {"preset", name},
                {"scale", scale},
                {"grid", traveling_wave_grid(scale)},
                {"field", {{"name", "traveling_wave"}, {"amplitude", 1.0}}},
                {"epsilon", 0.1},
                {"dictionary", traveling_wave_dictionary()},
                {"optimize",
                 {{"steps", full ? 35 : 10},
                  {"radius", 0.1},
                  {"sense", "enhance"},
                  {"feature", "one_minus_cos_2y"}}},
                {"seed", 7},
                {"out", "out/traveling-wave-feature"}};
  }
  if (name == "flux-identity-demo") {
    return Json{{"experiment", "flux"},
                {"preset", name},
                {"scale", scale},
                {"grid", double_gyre_grid("ci")},
                {"field", {{"name", "double_gyre"}}},
                {"epsilon", 0.0},
                {"flux",
                 {{"time_nodes", 200},
                  {"boundary_nodes", 200},
                  {"radius", 0.2},
                  {"center", {1.0, 0.5}},
                  {"sweep", {0.3, 0.2}}}},
                {"seed", 7},
                {"out", "out/flux-identity-demo"}};
  }
  throw std::invalid_argument("config: unknown preset '" + name + "'");
}

}  // namespace cohflow
