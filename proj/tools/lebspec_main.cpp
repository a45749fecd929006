// Command-line front end: build systems, run spread/witness/construct
// pipelines, emit certificates and plot data, verify stored traces.

#include <CLI11.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lebspec/construction.hpp"
#include "lebspec/serialize.hpp"
#include "lebspec/trace.hpp"

namespace fs = std::filesystem;
using namespace lebspec;

namespace {

struct GlobalFlags {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> grid;
  std::optional<int> order;
};

void add_common(CLI::App* cmd, GlobalFlags& flags, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", flags.config, "JSON configuration file");
  if (needs_config) opt->required();
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--seed", flags.seed, "root seed override");
  cmd->add_option("--grid", flags.grid, "density grid size override");
  cmd->add_option("--order", flags.order, "Fourier truncation order override");
}

std::size_t grid_of(const GlobalFlags& flags, const Json& cfg, std::size_t fallback) {
  if (flags.grid) return *flags.grid;
  if (cfg.contains("grid") && cfg["grid"].is_number()) return cfg["grid"].get<std::size_t>();
  return fallback;
}

int order_of(const GlobalFlags& flags, const Json& cfg, int fallback) {
  if (flags.order) return *flags.order;
  if (cfg.contains("order")) return cfg["order"].get<int>();
  return fallback;
}

std::uint64_t seed_of(const GlobalFlags& flags, const Json& cfg, std::uint64_t fallback) {
  if (flags.seed) return *flags.seed;
  if (cfg.contains("seed")) return cfg["seed"].get<std::uint64_t>();
  return fallback;
}

SystemPtr load_system(const fs::path& path) {
  return system_from_json(load_json(path), path.string());
}

Observable load_observable(const fs::path& path, SystemPtr system) {
  return observable_from_json(load_json(path), std::move(system), path.string());
}

int cmd_spread(const GlobalFlags& flags) {
  const Json cfg = load_json(flags.config);
  require_keys(cfg, {"measure", "deltas", "order", "grid", "mc", "seed"}, flags.config);
  const int P = order_of(flags, cfg, 64);
  const std::size_t G = grid_of(flags, cfg, 512);
  const std::vector<double> deltas =
      require_field(cfg, "deltas", flags.config).get<std::vector<double>>();
  for (double d : deltas) {
    if (!(d >= 0.0 && d <= 0.5)) {
      throw InvalidArgument("delta " + format_double(d) + " outside [0, 0.5]");
    }
  }

  const Json& mcfg = require_field(cfg, "measure", flags.config);
  require_keys(mcfg, {"atoms", "density_file", "measure_file"}, "measure");
  std::optional<CircleMeasure> input;
  if (mcfg.contains("atoms")) {
    std::vector<CircleMeasure::Atom> atoms;
    for (const auto& a : mcfg["atoms"]) {
      if (!a.is_array() || a.size() != 2) {
        throw SchemaError(flags.config, "measure.atoms", "expected [angle, weight] pairs");
      }
      atoms.push_back({a[0].get<double>(), a[1].get<double>()});
    }
    input = CircleMeasure::from_atoms(atoms, P);
  } else if (mcfg.contains("density_file")) {
    const DensityGrid d = density_from_json(load_json(mcfg["density_file"].get<std::string>()),
                                            mcfg["density_file"].get<std::string>());
    CircleMeasure m = from_density(d, P);
    input = std::move(m);
  } else if (mcfg.contains("measure_file")) {
    input = measure_from_json(load_json(mcfg["measure_file"].get<std::string>()),
                              mcfg["measure_file"].get<std::string>());
  } else {
    throw SchemaError(flags.config, "measure", "need atoms, density_file or measure_file");
  }

  fs::create_directories(flags.out);
  Json index = Json::array();
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const CircleMeasure spread = spread_out(*input, deltas[i], P);
    const std::string base = "spread_" + std::to_string(i);
    save_json(fs::path(flags.out) / (base + ".json"), measure_to_json(spread));
    write_density_csv(fs::path(flags.out) / (base + "_density.csv"),
                      to_density(spread, G, P));
    index.push_back({{"delta", deltas[i]}, {"measure", base + ".json"},
                     {"density", base + "_density.csv"}});
  }
  save_json(fs::path(flags.out) / "index.json", index);

  if (cfg.contains("mc")) {
    const Json& mc = cfg["mc"];
    require_keys(mc, {"system", "observable", "samples", "p_max", "seed"}, "mc");
    SystemPtr sys = load_system(mc.at("system").get<std::string>());
    const Observable f = load_observable(mc.at("observable").get<std::string>(), sys);
    const std::size_t samples = mc.value("samples", std::size_t{100000});
    const int p_max = mc.value("p_max", 8);
    const std::uint64_t seed = seed_of(flags, mc, 1);
    const double bound = 3.0 * f.norm_squared() / std::sqrt(static_cast<double>(samples));
    Json rows = Json::array();
    for (double delta : deltas) {
      const CircleMeasure target =
          spread_out(spectral_measure(f, 2 * p_max), delta, p_max);
      for (int p = 1; p <= p_max; ++p) {
        const std::complex<double> estimate = meilijson_mc(f, delta, p, samples, seed);
        const double err = std::abs(estimate - target.coeff(p));
        rows.push_back({{"delta", delta},
                        {"p", p},
                        {"spread", {target.coeff(p).real(), target.coeff(p).imag()}},
                        {"mc", {estimate.real(), estimate.imag()}},
                        {"abs_error", err},
                        {"bound", bound},
                        {"within_bound", err <= bound}});
      }
    }
    save_json(fs::path(flags.out) / "mc_check.json", rows);
  }
  return 0;
}

int cmd_witness(const GlobalFlags& flags) {
  const Json cfg = load_json(flags.config);
  require_keys(cfg,
               {"system", "observables", "eps", "tau", "grid", "order", "coverage_goal",
                "threshold", "real_eta"},
               flags.config);
  SystemPtr sys = load_system(require_field(cfg, "system", flags.config).get<std::string>());
  std::vector<Observable> family;
  for (const auto& path : require_field(cfg, "observables", flags.config)) {
    family.push_back(load_observable(path.get<std::string>(), sys));
  }
  const MultiplicityCertificate cert = multiplicity_witness(
      family, require_field(cfg, "eps", flags.config).get<double>(),
      require_field(cfg, "tau", flags.config).get<double>(), grid_of(flags, cfg, 512),
      order_of(flags, cfg, 64), cfg.value("coverage_goal", 0.9), cfg.value("threshold", 0.5),
      cfg.value("real_eta", false));
  fs::create_directories(flags.out);
  save_json(fs::path(flags.out) / "witness.json", certificate_to_json(cert));
  write_lambda_min_csv(fs::path(flags.out) / "lambda_min.csv", cert.lambda_min_profile);
  std::cout << "certified_bound " << cert.certified_bound << " coverage "
            << format_double(cert.coverage) << "\n";
  return 0;
}

int cmd_construct(const GlobalFlags& flags) {
  const Json cfg = load_json(flags.config);
  require_keys(cfg, {"root", "steps", "schedule", "seed", "grid", "witness", "track"},
               flags.config);
  const Json& root_cfg = require_field(cfg, "root", flags.config);
  require_keys(root_cfg, {"N", "file"}, "root");
  SystemPtr root;
  if (root_cfg.contains("file")) {
    root = load_system(root_cfg["file"].get<std::string>());
  } else {
    root = build_cyclic(require_field(root_cfg, "N", "root").get<std::size_t>());
  }
  const int steps = require_field(cfg, "steps", flags.config).get<int>();

  Schedule schedule = Schedule::dyadic(0.5);
  if (cfg.contains("schedule")) {
    const Json& s = cfg["schedule"];
    auto rows_from = [](const Json& array) {
      std::vector<ScheduleRow> rows;
      for (const auto& r : array) {
        require_keys(r, {"n", "alpha", "tau", "eps", "rho"}, "schedule rows");
        const int n = r.contains("n") ? r.at("n").get<int>()
                                      : static_cast<int>(rows.size()) + 1;
        rows.push_back(ScheduleRow{n, r.at("alpha").get<double>(),
                                   r.at("tau").get<double>(), r.at("eps").get<double>(),
                                   r.at("rho").get<double>()});
      }
      return Schedule::from_rows(std::move(rows));
    };
    if (s.is_array()) {
      schedule = rows_from(s);
    } else {
      require_keys(s, {"alpha1", "rows"}, "schedule");
      if (s.contains("rows")) {
        schedule = rows_from(s["rows"]);
      } else {
        schedule = Schedule::dyadic(s.value("alpha1", 0.5));
      }
    }
  }

  std::size_t G = 512;
  int P = 64;
  if (cfg.contains("grid")) {
    require_keys(cfg["grid"], {"G", "P"}, "grid");
    G = cfg["grid"].value("G", std::size_t{512});
    P = cfg["grid"].value("P", 64);
  }
  if (flags.grid) G = *flags.grid;
  if (flags.order) P = *flags.order;

  WitnessConfig wcfg;
  if (cfg.contains("witness")) {
    require_keys(cfg["witness"], {"eps", "threshold", "coverage_goal"}, "witness");
    wcfg.eps = cfg["witness"].value("eps", 0.4);
    wcfg.threshold = cfg["witness"].value("threshold", 0.5);
    wcfg.coverage_goal = cfg["witness"].value("coverage_goal", 0.9);
  }
  const std::uint64_t seed = seed_of(flags, cfg, 1);

  const RunTrace trace = run_construction(root, steps, schedule, seed, G, P, wcfg);
  write_trace(flags.out, trace, &cfg);
  for (const auto& cert : trace.state.certificates) {
    std::cout << "step " << cert.n << (cert.pass ? " pass" : " FAIL") << " atoms "
              << cert.atoms_after << " delta " << format_double(cert.delta) << "\n";
  }
  if (trace.failure) {
    std::cout << "FAILED: " << trace.failure->message << "\n";
    return 1;
  }
  std::cout << "witness certified_bound " << trace.witness.certified_bound << " coverage "
            << format_double(trace.witness.coverage) << "\n";
  std::cout << (trace.pass ? "PASS" : "FAIL") << "\n";
  return trace.pass ? 0 : 1;
}

int cmd_verify(const std::string& trace_dir) {
  const VerifyReport report = verify_trace(trace_dir);
  if (report.ok()) {
    std::cout << "verify OK\n";
    return 0;
  }
  for (const auto& d : report.discrepancies) std::cout << "DISCREPANCY: " << d << "\n";
  return 1;
}

int cmd_induce(const GlobalFlags& flags) {
  const Json cfg = load_json(flags.config);
  require_keys(cfg, {"system", "subset", "independent"}, flags.config);
  SystemPtr sys = load_system(require_field(cfg, "system", flags.config).get<std::string>());
  std::vector<std::uint32_t> subset;
  if (cfg.contains("subset")) {
    subset = cfg["subset"].get<std::vector<std::uint32_t>>();
  } else if (cfg.contains("independent")) {
    const Json& icfg = cfg["independent"];
    require_keys(icfg, {"parts", "density", "tol", "seed"}, "independent");
    std::vector<Partition> parts;
    for (const auto& path : require_field(icfg, "parts", "independent")) {
      parts.push_back(load_observable(path.get<std::string>(), sys).partition());
    }
    subset = independent_subset(sys, parts, icfg.at("density").get<double>(),
                                icfg.at("tol").get<double>(), seed_of(flags, icfg, 1));
  } else {
    throw SchemaError(flags.config, "subset", "need subset or independent");
  }
  const InducedSystem ind = induce(sys, std::move(subset));
  fs::create_directories(flags.out);
  save_json(fs::path(flags.out) / "induced.json", induced_to_json(ind));
  save_json(fs::path(flags.out) / "kac.json", kac_to_json(kac_check(ind)));
  return 0;
}

int cmd_spectrum(const GlobalFlags& flags) {
  const Json cfg = load_json(flags.config);
  require_keys(cfg, {"system", "observable", "order", "grid"}, flags.config);
  SystemPtr sys = load_system(require_field(cfg, "system", flags.config).get<std::string>());
  const Observable f =
      load_observable(require_field(cfg, "observable", flags.config).get<std::string>(), sys);
  const int P = order_of(flags, cfg, 64);
  const std::size_t G = grid_of(flags, cfg, 512);
  const CircleMeasure sigma = spectral_measure(f, P);
  fs::create_directories(flags.out);
  save_json(fs::path(flags.out) / "spectrum.json", measure_to_json(sigma));
  write_density_csv(fs::path(flags.out) / "spectrum_density.csv", to_density(sigma, G, P));
  save_json(fs::path(flags.out) / "spectrum_info.json",
            Json{{"mass", sigma.mass()}, {"toeplitz_psd", sigma.toeplitz_psd()}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral toolkit for finite measure-preserving systems"};
  app.require_subcommand(1);

  GlobalFlags spread_flags, witness_flags, construct_flags, induce_flags, spectrum_flags;
  std::string trace_dir;

  auto* spread = app.add_subcommand("spread", "spread-out measures and densities");
  add_common(spread, spread_flags);
  auto* witness = app.add_subcommand("witness", "multiplicity certificate for a family");
  add_common(witness, witness_flags);
  auto* construct = app.add_subcommand("construct", "run the inductive construction");
  add_common(construct, construct_flags);
  auto* verify = app.add_subcommand("verify", "recheck a stored construct trace");
  verify->add_option("trace_dir", trace_dir, "trace directory")->required();
  auto* induce_cmd = app.add_subcommand("induce", "first-return induced system");
  add_common(induce_cmd, induce_flags);
  auto* spectrum = app.add_subcommand("spectrum", "spectral measure of an observable");
  add_common(spectrum, spectrum_flags);

  CLI11_PARSE(app, argc, argv);
  try {
    if (spread->parsed()) return cmd_spread(spread_flags);
    if (witness->parsed()) return cmd_witness(witness_flags);
    if (construct->parsed()) return cmd_construct(construct_flags);
    if (verify->parsed()) return cmd_verify(trace_dir);
    if (induce_cmd->parsed()) return cmd_induce(induce_flags);
    if (spectrum->parsed()) return cmd_spectrum(spectrum_flags);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
