#include <doctest.h>

#include <filesystem>
#include <set>

#include "cohflow/io.hpp"
#include "cohflow/run.hpp"

using namespace cohflow;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "cohflow_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Json tiny_spectrum_config(const std::filesystem::path& out) {
  return Json{{"experiment", "spectrum"},
              {"grid",
               {{"tau", 2.0},
                {"n_time", 8},
                {"bounds", {{0.0, 2.0}, {0.0, 1.0}}},
                {"boxes", {10, 5}},
                {"bc", {"reflecting", "reflecting"}}}},
              {"field", {{"name", "double_gyre"}}},
              {"epsilon", 0.15},
              {"solver", {{"count", 4}}},
              {"seed", 3},
              {"out", out.string()}};
}

}  // namespace

TEST_CASE("preset names are unique and include the documented set") {
  const auto presets = list_presets();
  std::set<std::string> names;
  for (const auto& p : presets) names.insert(p.name);
  CHECK(names.size() == presets.size());
  for (const char* required :
       {"double-gyre-spectrum", "double-gyre-increase", "double-gyre-decrease",
        "bickley-spectrum", "bickley-seba", "bickley-particles", "traveling-wave-feature",
        "flux-identity-demo"})
    CHECK(names.count(required) == 1);

  // every preset resolves to a runnable configuration at both scales
  for (const auto& p : presets) {
    CHECK_NOTHROW(preset_config(p.name, "full"));
    CHECK_NOTHROW(preset_config(p.name, "ci"));
  }
  CHECK_THROWS_AS(preset_config("no-such-preset"), std::invalid_argument);
}

TEST_CASE("malformed configurations name the offending key") {
  const auto out = temp_dir("bad-config");
  Json config = tiny_spectrum_config(out);
  config.erase("experiment");
  try {
    run(config);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("experiment") != std::string::npos);
  }

  config = tiny_spectrum_config(out);
  config["grid"].erase("n_time");
  try {
    run(config);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("n_time") != std::string::npos);
  }

  config = tiny_spectrum_config(out);
  config["field"]["name"] = "vortex-soup";
  try {
    run(config);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("field.name") != std::string::npos);
  }
}

TEST_CASE("spectrum run writes artifacts and replays bit-identically") {
  const auto out1 = temp_dir("run1");
  const auto out2 = temp_dir("run2");
  Json config = tiny_spectrum_config(out1);
  const Json manifest1 = run(config);

  CHECK(std::filesystem::exists(out1 / "manifest.json"));
  CHECK(std::filesystem::exists(out1 / "spectrum.csv"));
  REQUIRE(manifest1.contains("results"));
  REQUIRE(manifest1["results"].contains("eigenvalues"));
  CHECK(manifest1["results"]["eigenvalues"].size() == 4);

  // every artifact is listed with a checksum that matches the file
  for (const auto& art : manifest1["artifacts"]) {
    const auto path = out1 / art["path"].get<std::string>();
    CHECK(std::filesystem::exists(path));
    CHECK(file_checksum(path) == art["checksum"].get<std::string>());
  }

  // re-running the manifest's embedded config reproduces all scalar results
  Json config2 = manifest1["config"];
  config2["out"] = out2.string();
  const Json manifest2 = run(config2);
  CHECK(manifest1["results"] == manifest2["results"]);

  // the artifacts themselves are byte-identical
  REQUIRE(manifest1["artifacts"].size() == manifest2["artifacts"].size());
  for (size_t i = 0; i < manifest1["artifacts"].size(); ++i)
    CHECK(manifest1["artifacts"][i]["checksum"] == manifest2["artifacts"][i]["checksum"]);
}

TEST_CASE("binary array and sparse matrix round trips") {
  const auto out = temp_dir("io");
  Eigen::MatrixXd m(3, 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = 0.1 * i - 1.7 * j + 0.375;
  write_binary_array(out / "array.bin", m);
  const Eigen::MatrixXd back = read_binary_array(out / "array.bin");
  CHECK((m - back).norm() == 0.0);

  SparseMat s(5, 5);
  std::vector<Triplet> trips = {{0, 1, 2.5}, {3, 2, -1.25}, {4, 4, 0.5}};
  s.setFromTriplets(trips.begin(), trips.end());
  write_matrix_binary(out / "matrix.bin", s);
  const SparseMat sback = read_matrix_binary(out / "matrix.bin");
  CHECK((SparseMat(s - sback)).norm() == 0.0);

  write_triplets_text(out / "matrix.txt", s);
  CHECK(std::filesystem::exists(out / "matrix.txt"));
}

TEST_CASE("pgm heatmaps record their value range") {
  const auto out = temp_dir("pgm");
  Eigen::MatrixXd img(2, 3);
  img << -1.0, 0.0, 1.0, 2.0, 3.0, 5.0;
  const auto [lo, hi] = write_pgm(out / "img.pgm", img);
  CHECK(lo == -1.0);
  CHECK(hi == 5.0);
  CHECK(std::filesystem::exists(out / "img.pgm"));
}

TEST_CASE("flux demo preset satisfies the boundary-flux identities") {
  const auto out = temp_dir("flux");
  Json config = preset_config("flux-identity-demo", "ci");
  config["out"] = out.string();
  const Json manifest = run(config);
  const auto& res = manifest["results"];
  CHECK(res["identity_residual"].get<double>() < 1e-3);
  CHECK(res["reflected_identity_residual"].get<double>() < 1e-3);
  CHECK(res["comoving_cumulative"].get<double>() < 1e-10);
  CHECK(res["comoving_augmented"].get<double>() < 1e-10);
}

TEST_CASE("coherence-mc experiment on a coarse grid") {
  const auto out = temp_dir("mc");
  Json config = tiny_spectrum_config(out);
  config["experiment"] = "coherence-mc";
  config["grid"]["tau"] = 4.0;
  config["grid"]["n_time"] = 16;
  config["mc"] = {{"n", 4000}, {"eigen_index", 2}, {"sign", 1}};
  const Json manifest = run(config);
  const auto& res = manifest["results"];
  CHECK(res["ratio"].get<double>() > 0.0);
  CHECK(res["ratio"].get<double>() <= 1.0);
  CHECK(res["bound"].get<double>() > 0.0);
  CHECK(res["bound_satisfied"].get<bool>());
}
