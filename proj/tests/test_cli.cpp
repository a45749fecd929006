// Exercises the command-line front end end to end: every subcommand, the
// strict config validation, and the documented exit codes.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "lebspec/serialize.hpp"
#include "lebspec/systems.hpp"

using namespace lebspec;
namespace fs = std::filesystem;

namespace {

std::string g_cli;

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = g_cli + " " + args + " > " + log.string() + " 2>&1";
  return std::system(cmd.c_str());
}

fs::path fresh_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("spread subcommand") {
  const fs::path dir = fresh_dir("lebspec_cli_spread");
  const fs::path log = dir / "log.txt";
  SUBCASE("Dirac(pi) at delta 1/2 yields the flat density; delta 0 is the identity") {
    save_json(dir / "cfg.json", Json{{"measure", {{"atoms", {{kPi, 1.0}}}}},
                                     {"deltas", {0.0, 0.5}},
                                     {"order", 16},
                                     {"grid", 256}});
    REQUIRE(run("spread --config " + (dir / "cfg.json").string() + " --out " + dir.string(),
                log) == 0);
    const CircleMeasure identity =
        measure_from_json(load_json(dir / "spread_0.json"), "spread_0");
    const CircleMeasure dirac = CircleMeasure::dirac(kPi, 1.0, 16);
    for (int p = -16; p <= 16; ++p) {
      CHECK(std::abs(identity.coeff(p) - dirac.coeff(p)) < 1e-12);
    }
    const DensityGrid flat = read_density_csv(dir / "spread_1_density.csv");
    for (double v : flat.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("delta outside the range is rejected") {
    save_json(dir / "bad.json",
              Json{{"measure", {{"atoms", {{kPi, 1.0}}}}}, {"deltas", {0.6}}});
    CHECK(run("spread --config " + (dir / "bad.json").string() + " --out " + dir.string(),
              log) != 0);
  }
  SUBCASE("unknown keys are rejected before any computation") {
    save_json(dir / "unknown.json", Json{{"measure", {{"atoms", {{kPi, 1.0}}}}},
                                         {"deltas", {0.1}},
                                         {"surprise", 1}});
    CHECK(run("spread --config " + (dir / "unknown.json").string() + " --out " + dir.string(),
              log) != 0);
  }
  SUBCASE("MC cross-check emits a bounded-error table") {
    const auto sys = build_cyclic(1 << 12);
    save_json(dir / "sys.json", system_to_json(*sys));
    Rng rng(derive_seed(3, streams::kTestData));
    std::vector<std::uint8_t> bits(sys->size());
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng.next() >> 63);
    save_json(dir / "obs.json", observable_to_json(pm_observable(sys, bits)));
    save_json(dir / "mc.json",
              Json{{"measure", {{"atoms", {{kPi, 1.0}}}}},
                   {"deltas", {0.25}},
                   {"order", 8},
                   {"grid", 256},
                   {"mc",
                    {{"system", (dir / "sys.json").string()},
                     {"observable", (dir / "obs.json").string()},
                     {"samples", 20000},
                     {"p_max", 4},
                     {"seed", 5}}}});
    REQUIRE(run("spread --config " + (dir / "mc.json").string() + " --out " + dir.string(),
                log) == 0);
    const Json rows = load_json(dir / "mc_check.json");
    REQUIRE(rows.size() == 4);
    for (const auto& row : rows) CHECK(row.at("within_bound").get<bool>());
  }
}

TEST_CASE("witness subcommand") {
  const fs::path dir = fresh_dir("lebspec_cli_witness");
  const fs::path log = dir / "log.txt";
  const auto sys = build_cyclic(1 << 14);
  save_json(dir / "sys.json", system_to_json(*sys));
  for (int j = 0; j < 2; ++j) {
    Rng rng(derive_seed(11, streams::kTestData, j));
    std::vector<std::uint8_t> bits(sys->size());
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng.next() >> 63);
    save_json(dir / ("f" + std::to_string(j) + ".json"),
              observable_to_json(pm_observable(sys, bits)));
  }
  SUBCASE("two independent labelings certify bound 2") {
    save_json(dir / "cfg.json",
              Json{{"system", (dir / "sys.json").string()},
                   {"observables", {(dir / "f0.json").string(), (dir / "f1.json").string()}},
                   {"eps", 0.3},
                   {"tau", 0.1},
                   {"grid", 512},
                   {"order", 32}});
    REQUIRE(run("witness --config " + (dir / "cfg.json").string() + " --out " + dir.string(),
                log) == 0);
    const Json cert = load_json(dir / "witness.json");
    CHECK(cert.at("certified_bound").get<int>() == 2);
    CHECK(fs::exists(dir / "lambda_min.csv"));
  }
  SUBCASE("duplicated pair certifies 0 with a cond2 witness") {
    save_json(dir / "dup.json",
              Json{{"system", (dir / "sys.json").string()},
                   {"observables", {(dir / "f0.json").string(), (dir / "f0.json").string()}},
                   {"eps", 0.3},
                   {"tau", 0.1},
                   {"grid", 512},
                   {"order", 32}});
    REQUIRE(run("witness --config " + (dir / "dup.json").string() + " --out " + dir.string(),
                log) == 0);
    const Json cert = load_json(dir / "witness.json");
    CHECK(cert.at("certified_bound").get<int>() == 0);
    CHECK_FALSE(cert.at("cond2_ok").get<bool>());
    CHECK_FALSE(cert.at("failures").empty());
  }
}

TEST_CASE("induce and spectrum subcommands") {
  const fs::path dir = fresh_dir("lebspec_cli_induce");
  const fs::path log = dir / "log.txt";
  SUBCASE("5-cycle induced on {0,1,3} satisfies Kac with mean 5/3") {
    save_json(dir / "sys.json", system_to_json(*build_cyclic(5)));
    save_json(dir / "cfg.json",
              Json{{"system", (dir / "sys.json").string()}, {"subset", {0, 1, 3}}});
    REQUIRE(run("induce --config " + (dir / "cfg.json").string() + " --out " + dir.string(),
                log) == 0);
    const Json kac = load_json(dir / "kac.json");
    CHECK(kac.at("holds").get<bool>());
    CHECK(kac.at("expected_return")[0].get<long long>() == 5);
    CHECK(kac.at("expected_return")[1].get<long long>() == 3);
    const Json ind = load_json(dir / "induced.json");
    CHECK(ind.at("return_time").get<std::vector<int>>() == std::vector<int>{1, 2, 2});
  }
  SUBCASE("spectrum of the two-atom swap is the Dirac at pi") {
    save_json(dir / "swap.json", system_to_json(*build_cyclic(2)));
    const auto sys = build_cyclic(2);
    save_json(dir / "pm.json", observable_to_json(pm_observable(sys, {1, 0})));
    save_json(dir / "scfg.json", Json{{"system", (dir / "swap.json").string()},
                                      {"observable", (dir / "pm.json").string()},
                                      {"order", 8},
                                      {"grid", 256}});
    REQUIRE(run("spectrum --config " + (dir / "scfg.json").string() + " --out " + dir.string(),
                log) == 0);
    const CircleMeasure m = measure_from_json(load_json(dir / "spectrum.json"), "spectrum");
    for (int p = 0; p <= 8; ++p) {
      CHECK(m.coeff(p).real() == doctest::Approx(p % 2 ? -1.0 : 1.0));
    }
    CHECK(load_json(dir / "spectrum_info.json").at("toeplitz_psd").get<bool>());
  }
}

TEST_CASE("verify subcommand error paths") {
  const fs::path dir = fresh_dir("lebspec_cli_verify");
  const fs::path log = dir / "log.txt";
  CHECK(run("verify " + (dir / "empty").string(), log) != 0);
  std::ifstream in(log);
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  CHECK(text.find("no manifest") != std::string::npos);
}

int main(int argc, char** argv) {
  doctest::Context context;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--cli") g_cli = argv[i + 1];
  }
  if (g_cli.empty()) {
    std::fprintf(stderr, "usage: test_cli --cli <path-to-lebspec>\n");
    return 1;
  }
  context.applyCommandLine(1, argv);
  return context.run();
}
