#include "lebspec/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "lebspec/sum.hpp"

namespace lebspec {

namespace fs = std::filesystem;

namespace {

std::string stage_name(const char* prefix, int n, const char* ext = ".json") {
  return std::string(prefix) + "_" + std::to_string(n) + ext;
}

Json targets_to_json(const std::vector<DensityGrid>& singles,
                     const std::map<PairKey, DensityGrid>& pairs) {
  Json out;
  Json js = Json::array();
  for (const auto& d : singles) js.push_back(density_to_json(d));
  out["singles"] = std::move(js);
  Json jp = Json::array();
  for (const auto& [key, d] : pairs) {
    jp.push_back({{"i", key.i + 1},
                  {"j", key.j + 1},
                  {"eta", std::string(1, eta_tag(key.eta))},
                  {"density", density_to_json(d)}});
  }
  out["pairs"] = std::move(jp);
  return out;
}

}  // namespace

void write_trace(const fs::path& dir, const RunTrace& trace, const Json* config) {
  fs::create_directories(dir);
  const ConstructionState& st = trace.state;
  const int steps = st.n;

  Json manifest;
  manifest["format"] = "lebspec-trace-v1";
  manifest["steps"] = steps;
  manifest["grid"] = {{"G", st.grid_size}, {"P", st.order}};
  manifest["seed"] = st.root_seed;
  manifest["schedule"] = schedule_rows_to_json(st.schedule.rows(steps));
  manifest["pass"] = trace.pass;
  if (trace.failure) {
    manifest["failure"] = {{"step", trace.failure->step},
                           {"condition", trace.failure->condition},
                           {"message", trace.failure->message}};
  }
  if (config) manifest["config"] = *config;

  std::vector<std::string> files;
  auto emit = [&](const std::string& name, const Json& value) {
    save_json(dir / name, value);
    files.push_back(name);
  };

  emit("root_system.json", system_to_json(*st.root));
  for (int n = 1; n <= steps; ++n) {
    const std::size_t idx = static_cast<std::size_t>(n - 1);
    const auto& cert = st.certificates[idx];
    emit(stage_name("certificate", n), step_certificate_to_json(cert));
    if (!cert.induce_log.empty()) {
      const std::string name = stage_name("attempts", n, ".jsonl");
      std::ofstream out(dir / name);
      for (const auto& line : attempts_to_json_lines(cert.induce_log)) {
        out << line.dump() << '\n';
      }
      files.push_back(name);
    }
    emit(stage_name("system", n), system_to_json(*st.system_history[idx]));
    {
      Json family = Json::array();
      for (const auto& f : st.family_history[idx]) family.push_back(observable_to_json(f));
      emit(stage_name("family", n), family);
    }
    if (n >= 2) {
      emit(stage_name("subset", n),
           Json{{"subset", st.subset_history[static_cast<std::size_t>(n - 2)]}});
    }
    // Stage targets; pair entries are retained only for the current stage.
    if (n == steps) {
      emit(stage_name("targets", n), targets_to_json(st.target_single, st.target_pair));
    } else {
      emit(stage_name("targets", n), targets_to_json(st.target_history[idx], {}));
    }
    {
      Json measures = Json::array();
      for (const auto& m : st.measure_history[idx]) measures.push_back(measure_to_json(m));
      emit(stage_name("measures", n), measures);
    }
    for (std::size_t j = 0; j < st.target_history[idx].size(); ++j) {
      const std::string csv =
          "target_density_" + std::to_string(n) + "_" + std::to_string(j + 1) + ".csv";
      write_density_csv(dir / csv, st.target_history[idx][j]);
      files.push_back(csv);
    }
  }
  if (trace.witness_valid) {
    emit("witness.json", certificate_to_json(trace.witness));
    write_lambda_min_csv(dir / "lambda_min.csv", trace.witness.lambda_min_profile);
    files.push_back("lambda_min.csv");
  }
  {
    Json conv = Json::array();
    for (const auto& rep : trace.convergence) conv.push_back(convergence_to_json(rep));
    emit("convergence.json", conv);
  }
  if (st.has_track) {
    Json track;
    track["family_size"] = st.track_family.size();
    track["distances"] = st.track_distances;
    emit("track.json", track);
  }
  manifest["files"] = files;
  save_json(dir / "manifest.json", manifest);
}

namespace {

struct Comparer {
  VerifyReport& report;
  void fail(const std::string& what) { report.discrepancies.push_back(what); }
  void near(const std::string& what, double got, double stored, double tol) {
    if (!(std::abs(got - stored) <= tol)) {
      fail(what + ": recomputed " + format_double(got) + " vs stored " +
           format_double(stored));
    }
  }
  void same_flag(const std::string& what, bool got, bool stored) {
    if (got != stored) {
      fail(what + ": recomputed " + (got ? "true" : "false") + " vs stored " +
           (stored ? "true" : "false"));
    }
  }
};

const Json* find_check(const Json& cert, const char* list, const std::string& name) {
  const auto it = cert.find(list);
  if (it == cert.end()) return nullptr;
  for (const auto& c : *it) {
    if (c.at("name").get<std::string>() == name) return &c;
  }
  return nullptr;
}

struct StageData {
  SystemPtr system;
  std::vector<Observable> family;
  std::vector<DensityGrid> target_single;
  std::map<PairKey, DensityGrid> target_pair;
  std::vector<CircleMeasure> measures;
  Json certificate;
};

StageData load_stage(const fs::path& dir, int n) {
  StageData data;
  data.system =
      system_from_json(load_json(dir / stage_name("system", n)), stage_name("system", n));
  for (const auto& jf : load_json(dir / stage_name("family", n))) {
    data.family.push_back(observable_from_json(jf, data.system, stage_name("family", n)));
  }
  const Json targets = load_json(dir / stage_name("targets", n));
  for (const auto& t : targets.at("singles")) {
    data.target_single.push_back(density_from_json(t, "targets.singles"));
  }
  for (const auto& t : targets.at("pairs")) {
    const Eta eta = t.at("eta").get<std::string>() == "i" ? Eta::Imag : Eta::One;
    data.target_pair.insert_or_assign(
        PairKey{t.at("i").get<std::size_t>() - 1, t.at("j").get<std::size_t>() - 1, eta},
        density_from_json(t.at("density"), "targets.pairs"));
  }
  for (const auto& m : load_json(dir / stage_name("measures", n))) {
    data.measures.push_back(measure_from_json(m, stage_name("measures", n)));
  }
  data.certificate = load_json(dir / stage_name("certificate", n));
  return data;
}

}  // namespace

VerifyReport verify_trace(const fs::path& dir) {
  VerifyReport report;
  Comparer cmp{report};
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    report.discrepancies.push_back("no manifest: " + manifest_path.string());
    return report;
  }
  Json manifest;
  try {
    manifest = load_json(manifest_path);
  } catch (const Error& e) {
    report.discrepancies.push_back(e.what());
    return report;
  }

  try {
    const int steps = manifest.at("steps").get<int>();
    const std::size_t G = manifest.at("grid").at("G").get<std::size_t>();
    const int P = manifest.at("grid").at("P").get<int>();
    const Json& schedule = manifest.at("schedule");

    std::vector<StageData> stages;
    for (int n = 1; n <= steps; ++n) stages.push_back(load_stage(dir, n));

    for (int n = 1; n <= steps; ++n) {
      const StageData& stage = stages[static_cast<std::size_t>(n - 1)];
      const std::string cert_name = "certificate_" + std::to_string(n);
      const double alpha = stage.certificate.at("alpha").get<double>();
      const double tau = stage.certificate.at("tau").get<double>();

      // CSV exports must match the stored JSON grids.
      for (std::size_t j = 0; j < stage.target_single.size(); ++j) {
        const std::string csv =
            "target_density_" + std::to_string(n) + "_" + std::to_string(j + 1) + ".csv";
        const DensityGrid parsed = read_density_csv(dir / csv);
        if (parsed.size() != stage.target_single[j].size()) {
          cmp.fail(csv + ": grid size mismatch");
          continue;
        }
        double worst = 0.0;
        for (std::size_t k = 0; k < parsed.size(); ++k) {
          worst = std::max(worst,
                           std::abs(parsed.values[k] - stage.target_single[j].values[k]));
        }
        if (worst > 1e-12) {
          cmp.fail(csv + ": density deviates from the stored JSON grid by " +
                   format_double(worst));
        }
      }

      // Spectral measures, weak distances and goodness per single.
      for (std::size_t j = 0; j < stage.family.size(); ++j) {
        const CircleMeasure sigma = spectral_measure(stage.family[j], P);
        if (j < stage.measures.size()) {
          double worst = 0.0;
          for (int p = -P; p <= P; ++p) {
            worst = std::max(worst, std::abs(sigma.coeff(p) - stage.measures[j].coeff(p)));
          }
          if (worst > 1e-12) {
            cmp.fail(stage_name("measures", n) + "[" + std::to_string(j) +
                     "]: stored spectral measure deviates by " + format_double(worst));
          }
        }
        const double d = weak_distance(sigma, from_density(stage.target_single[j], P));
        const std::string name = "A4.single.j=" + std::to_string(j + 1);
        if (const Json* chk = find_check(stage.certificate, "A4", name)) {
          cmp.near(cert_name + " " + name, d, chk->at("value").get<double>(), 1e-9);
          cmp.same_flag(cert_name + " " + name + " pass",
                        d < chk->at("bound").get<double>(), chk->at("pass").get<bool>());
        } else if (n > 1) {
          cmp.fail(cert_name + ": missing check " + name);
        }
        const bool good = is_good(stage.target_single[j], GoodSpec(alpha, tau));
        const std::string a1name = "A1.good.j=" + std::to_string(j + 1);
        if (const Json* chk = find_check(stage.certificate, "A1", a1name)) {
          cmp.same_flag(cert_name + " " + a1name, good, chk->at("pass").get<bool>());
        }
      }

      // Pair targets: recompute the summed spectra and their distances.
      for (const auto& [key, target] : stage.target_pair) {
        const Observable sum =
            stage.family[key.i] + eta_value(key.eta) * stage.family[key.j];
        const double d = weak_distance(spectral_measure(sum, P), from_density(target, P));
        const std::string name = "A4.pair.i=" + std::to_string(key.i + 1) +
                                 ".j=" + std::to_string(key.j + 1) +
                                 ".eta=" + std::string(1, eta_tag(key.eta));
        if (const Json* chk = find_check(stage.certificate, "A4", name)) {
          cmp.near(cert_name + " " + name, d, chk->at("value").get<double>(), 1e-9);
        } else {
          cmp.fail(cert_name + ": missing check " + name);
        }
      }

      if (n > 1) {
        const StageData& prev = stages[static_cast<std::size_t>(n - 2)];
        // A2 strong-closeness of retained targets at the recorded tau.
        for (std::size_t j = 0; j < prev.target_single.size(); ++j) {
          const std::string name = "A2.single.j=" + std::to_string(j + 1);
          if (const Json* chk = find_check(stage.certificate, "A2", name)) {
            const double dev =
                strong_deviation(prev.target_single[j], stage.target_single[j],
                                 chk->at("tau").get<double>());
            cmp.near(cert_name + " " + name, dev, chk->at("value").get<double>(), 1e-9);
          }
        }
        // A3 drift: the stage family must be the recentered restriction of
        // the previous family on the stored subset.
        const Json subset_json = load_json(dir / stage_name("subset", n));
        const auto subset = subset_json.at("subset").get<std::vector<std::uint32_t>>();
        if (subset.size() != stage.system->size()) {
          cmp.fail(stage_name("subset", n) + ": size does not match the stage system");
        } else {
          for (std::size_t j = 0; j < stage.family.size() && j < prev.family.size(); ++j) {
            ComplexAccum acc;
            for (auto a : subset) acc.add(prev.family[j].values()[a]);
            const std::complex<double> drift =
                acc.value() / static_cast<double>(subset.size());
            const std::string name = "A3.drift.j=" + std::to_string(j + 1);
            if (const Json* chk = find_check(stage.certificate, "A3", name)) {
              cmp.near(cert_name + " " + name, std::abs(drift),
                       chk->at("value").get<double>(), 1e-9);
            }
            double worst = 0.0;
            for (std::size_t i = 0; i < subset.size(); ++i) {
              worst = std::max(worst,
                               std::abs(stage.family[j].values()[i] -
                                        (prev.family[j].values()[subset[i]] - drift)));
            }
            if (worst > 1e-12) {
              cmp.fail(stage_name("family", n) + "[" + std::to_string(j) +
                       "]: not the recentered restriction of the previous stage (gap " +
                       format_double(worst) + ")");
            }
          }
        }
      }
    }

    // Witness recomputation on the stored final family.
    const StageData& final_stage = stages.back();
    if (fs::exists(dir / "witness.json")) {
      const Json stored = load_json(dir / "witness.json");
      const MultiplicityCertificate recomputed = multiplicity_witness(
          final_stage.family, stored.at("epsilon").get<double>(),
          stored.at("tau").get<double>(), G, P, stored.at("coverage_goal").get<double>(),
          stored.at("threshold").get<double>());
      if (recomputed.certified_bound != stored.at("certified_bound").get<std::size_t>()) {
        cmp.fail("witness.json: certified_bound mismatch");
      }
      cmp.near("witness.json coverage", recomputed.coverage,
               stored.at("coverage").get<double>(), 1e-9);
      const auto flat = stored.at("flatness").get<std::vector<double>>();
      for (std::size_t i = 0; i < flat.size() && i < recomputed.flatness.size(); ++i) {
        cmp.near("witness.json flatness[" + std::to_string(i) + "]",
                 recomputed.flatness[i], flat[i], 1e-9);
      }
      std::ifstream csv(dir / "lambda_min.csv");
      if (!csv) {
        cmp.fail("lambda_min.csv: missing");
      } else {
        std::string line;
        std::getline(csv, line);
        std::size_t k = 0;
        double worst = 0.0;
        bool malformed = false;
        while (std::getline(csv, line)) {
          if (line.empty()) continue;
          const auto comma = line.find(',');
          if (comma == std::string::npos || k >= recomputed.lambda_min_profile.size()) {
            cmp.fail("lambda_min.csv: malformed row " + std::to_string(k + 2));
            malformed = true;
            break;
          }
          worst = std::max(worst, std::abs(std::stod(line.substr(comma + 1)) -
                                           recomputed.lambda_min_profile[k]));
          ++k;
        }
        if (!malformed && k != recomputed.lambda_min_profile.size()) {
          cmp.fail("lambda_min.csv: row count mismatch");
        } else if (!malformed && worst > 1e-9) {
          cmp.fail("lambda_min.csv: profile deviates by " + format_double(worst));
        }
      }
    }

    // Convergence reports over the stored target/measure chains.
    if (fs::exists(dir / "convergence.json")) {
      const Json stored_conv = load_json(dir / "convergence.json");
      std::vector<ScheduleRow> rows;
      for (const auto& r : schedule) {
        rows.push_back(ScheduleRow{r.at("n").get<int>(), r.at("alpha").get<double>(),
                                   r.at("tau").get<double>(), r.at("eps").get<double>(),
                                   r.at("rho").get<double>()});
      }
      for (std::size_t j = 0; j < final_stage.family.size() && j < stored_conv.size(); ++j) {
        std::vector<DensityGrid> phis;
        std::vector<CircleMeasure> sigmas;
        std::vector<ScheduleRow> chain;
        for (int stage = static_cast<int>(j) + 1; stage <= steps; ++stage) {
          phis.push_back(stages[static_cast<std::size_t>(stage - 1)].target_single[j]);
          sigmas.push_back(stages[static_cast<std::size_t>(stage - 1)].measures[j]);
          chain.push_back(rows[static_cast<std::size_t>(stage - 1)]);
        }
        const ConvergenceReport rep = check_convergence(phis, sigmas, chain);
        cmp.same_flag("convergence[" + std::to_string(j) + "] all_pass", rep.all_pass,
                      stored_conv[j].at("all_pass").get<bool>());
      }
    }
  } catch (const Error& e) {
    report.discrepancies.push_back(e.what());
  } catch (const Json::exception& e) {
    report.discrepancies.push_back(std::string("malformed trace: ") + e.what());
  }
  return report;
}

}  // namespace lebspec
