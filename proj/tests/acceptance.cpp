// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exits nonzero on any failure.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lebspec/construction.hpp"
#include "lebspec/serialize.hpp"
#include "lebspec/trace.hpp"

using namespace lebspec;
namespace fs = std::filesystem;
using Complex = std::complex<double>;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail, double seconds) {
  std::printf("criterion %2d: %s  %s  (%.1fs)\n", criterion, pass ? "PASS" : "FAIL",
              detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

Observable random_labeling(SystemPtr sys, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint8_t> bits(sys->size());
  for (auto& b : bits) b = static_cast<std::uint8_t>(rng.next() >> 63);
  return pm_observable(std::move(sys), bits);
}

// Criterion 1: spread_out(sigma, 0) equals sigma coefficient-wise to 1e-12
// for 100 random measures at P = 64.
void criterion_1() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(101, streams::kTestData));
  int bad = 0;
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<CircleMeasure::Atom> atoms;
    const int n_atoms = 1 + int(rng.below(30));
    for (int i = 0; i < n_atoms; ++i) atoms.push_back({rng.uniform() * kTwoPi, rng.uniform()});
    const CircleMeasure m = CircleMeasure::from_atoms(atoms, 64);
    const CircleMeasure s = spread_out(m, 0.0, 64);
    for (int p = -64; p <= 64; ++p) {
      worst = std::max(worst, std::abs(s.coeff(p) - m.coeff(p)));
    }
    if (worst > 1e-12) ++bad;
  }
  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  report(1, bad == 0, "spread_out identity at delta=0, worst |diff| = " + format_double(worst),
         dt);
}

// Criterion 2: spread_out(Dirac(pi), 1/2) has |coeff(p)| <= 1e-12 for p in 1..64.
void criterion_2() {
  const auto t0 = Clock::now();
  const CircleMeasure s = spread_out(CircleMeasure::dirac(kPi, 1.0, 64), 0.5, 64);
  double worst = 0.0;
  for (int p = 1; p <= 64; ++p) worst = std::max(worst, std::abs(s.coeff(p)));
  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  report(2, worst <= 1e-12, "Dirac(pi) at delta=1/2 flattens, worst |coeff| = " +
                                format_double(worst), dt);
}

// Criterion 3: MC oracle within 3 norm^2 / sqrt(M) of the spread coefficient
// in at least 95% of (observable, delta, p) cases; 20 observables at N=2^14,
// delta in {0.1, 0.25, 0.4}, p in 1..16, M = 1e5.
void criterion_3() {
  const auto t0 = Clock::now();
  const std::size_t M = 100000;
  int total = 0, within = 0;
  for (int obs = 0; obs < 20; ++obs) {
    const Observable f =
        random_labeling(build_cyclic(1 << 14), derive_seed(103, streams::kTestData, obs));
    const double bound = 3.0 * f.norm_squared() / std::sqrt(double(M));
    const CircleMeasure sigma = spectral_measure(f, 32);
    for (double delta : {0.1, 0.25, 0.4}) {
      const CircleMeasure spread = spread_out(sigma, delta, 16);
      for (int p = 1; p <= 16; ++p) {
        const Complex mc = meilijson_mc(
            f, delta, p, M, derive_seed(107, std::uint64_t(obs), std::uint64_t(p * 7) + 3));
        ++total;
        if (std::abs(mc - spread.coeff(p)) <= bound) ++within;
      }
    }
  }
  const double fraction = double(within) / double(total);
  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  report(3, fraction >= 0.95,
         "MC oracle within 3 sigma in " + format_double(100.0 * fraction) + "% of " +
             std::to_string(total) + " cases", dt);
}

// Criterion 4: Kac's formula holds exactly on 200 random (system, subset)
// pairs whose subsets meet every cycle.
void criterion_4() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(109, streams::kTestData));
  int holds = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 10 + rng.below(1990);
    std::vector<std::uint32_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<std::uint32_t>(i);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    const auto sys = make_system(std::move(perm));
    std::vector<bool> chosen(n, false);
    for (const auto& cycle : sys->cycles()) chosen[cycle[rng.below(cycle.size())]] = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.uniform() < 0.35) chosen[i] = true;
    }
    std::vector<std::uint32_t> subset;
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen[i]) subset.push_back(static_cast<std::uint32_t>(i));
    }
    if (kac_check(induce(sys, subset)).holds) ++holds;
  }
  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  report(4, holds == 200, "Kac identity exact on " + std::to_string(holds) + "/200 pairs", dt);
}

// Criterion 5: direct and polarized cross tables agree to 1e-10 on 50 random
// observable pairs, |p| <= 32.
void criterion_5() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(113, streams::kTestData));
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 32 + rng.below(993);
    std::vector<std::uint32_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<std::uint32_t>(i);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    auto sys = make_system(std::move(perm));
    auto random_obs = [&](std::uint32_t classes) {
      std::vector<std::uint32_t> labels(n);
      for (auto& l : labels) l = static_cast<std::uint32_t>(rng.below(classes));
      Partition part(std::move(labels));
      std::vector<Complex> class_values(part.class_count);
      for (auto& v : class_values) v = Complex(rng.uniform() * 2 - 1, rng.uniform() * 2 - 1);
      std::vector<Complex> values(n);
      for (std::size_t i = 0; i < n; ++i) values[i] = class_values[part.labels[i]];
      return make_centered(sys, std::move(values), std::move(part)).first;
    };
    const Observable f = random_obs(3 + std::uint32_t(rng.below(6)));
    const Observable g = random_obs(3 + std::uint32_t(rng.below(6)));
    const CrossSpectralTable t = cross_spectral(f, g, 32);
    worst = std::max(worst, t.max_disagreement);
  }
  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  report(5, worst <= 1e-10,
         "polarization agrees with direct tables, worst gap = " + format_double(worst), dt);
}

// Criterion 6: three independent flat labelings on N=2^16 certify bound 3
// (coverage >= 0.9, threshold 0.5); a family with a duplicate certifies 0.
void criterion_6() {
  const auto t0 = Clock::now();
  auto sys = build_cyclic(1 << 16);
  std::vector<Observable> family;
  for (int j = 0; j < 3; ++j) {
    family.push_back(random_labeling(sys, derive_seed(127, streams::kTestData, j)));
  }
  const MultiplicityCertificate cert = multiplicity_witness(family, 0.2, 0.1, 512, 64, 0.9, 0.5);
  std::vector<Observable> dup{family[0], family[1], family[0]};
  const MultiplicityCertificate dup_cert =
      multiplicity_witness(dup, 0.2, 0.1, 512, 64, 0.9, 0.5);
  const bool pass = cert.certified_bound == 3 && cert.coverage >= 0.9 &&
                    dup_cert.certified_bound == 0;
  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  report(6, pass && dt <= 60.0,
         "witness certifies 3 (coverage " + format_double(cert.coverage) +
             "), duplicate family certifies " + std::to_string(dup_cert.certified_bound),
         dt);
}

// Criterion 7: spread_by_inducing at delta in {0.1, 0.25}, N=2^16, two
// observables, rho' = 0.1: success within 20 retries, |A^c|/N < 2 delta,
// measured distances < 0.1, return-time frequencies within 5/sqrt(|A|).
void criterion_7() {
  const auto t0 = Clock::now();
  auto sys = build_cyclic(1 << 16);
  std::vector<Observable> family;
  for (int j = 0; j < 2; ++j) {
    family.push_back(random_labeling(sys, derive_seed(131, streams::kTestData, j)));
  }
  bool pass = true;
  std::string detail;
  for (double delta : {0.1, 0.25}) {
    const SpreadResult r = spread_by_inducing(sys, family, delta, 0.1, 20, 137, 64);
    const double window = 5.0 / std::sqrt(double(r.induced.subset.size()));
    bool ok = r.deleted_fraction < 2.0 * delta;
    for (double d : r.distances) ok = ok && d < 0.1;
    ok = ok && std::abs(r.return_freqs[0] - (1.0 - delta)) <= window &&
         std::abs(r.return_freqs[1] - delta) <= window;
    pass = pass && ok;
    detail += "delta=" + format_double(delta) + " d=(" + format_double(r.distances[0]) + "," +
              format_double(r.distances[1]) + ") ";
  }
  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  report(7, pass, "spread_by_inducing " + detail, dt);
}

struct EndToEnd {
  fs::path trace_dir;
  bool pass = false;
};

// Criterion 8: steps=3 on N=2^18 under the dyadic schedule: every (A1)-(A4)
// certificate passes, the final witness certifies 3, and each final single
// target is 0.5-strongly close to 1 off (-tau_3, tau_3). Budget 10 minutes.
EndToEnd criterion_8(const fs::path& work) {
  const auto t0 = Clock::now();
  const RunTrace trace =
      run_construction(build_cyclic(1 << 18), 3, Schedule::dyadic(0.5), 7, 512, 32);
  bool pass = trace.pass && !trace.failure.has_value();
  for (const auto& cert : trace.state.certificates) {
    pass = pass && cert.a1_pass && cert.a2_pass && cert.a3_pass && cert.a4_pass;
  }
  pass = pass && trace.witness_valid && trace.witness.certified_bound == 3;
  const double tau3 = trace.state.schedule.tau(3);
  double worst_flat = 0.0;
  for (const auto& target : trace.state.target_single) {
    worst_flat = std::max(
        worst_flat, strong_deviation(DensityGrid::constant(target.size(), 1.0), target, tau3));
  }
  pass = pass && worst_flat <= 0.5;
  EndToEnd result;
  result.trace_dir = work / "trace8";
  write_trace(result.trace_dir, trace);
  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  result.pass = pass && dt <= 600.0;
  report(8, result.pass,
         "steps=3 N=2^18: witness bound " + std::to_string(trace.witness.certified_bound) +
             ", final flatness vs 1 = " + format_double(worst_flat),
         dt);
  return result;
}

// Criterion 9: the synthetic sequence 1 + 2^-n cos(theta) passes
// check_convergence; a constructed goodness violation is flagged at n=2.
void criterion_9() {
  const auto t0 = Clock::now();
  std::vector<DensityGrid> phis;
  std::vector<CircleMeasure> sigmas;
  std::vector<ScheduleRow> rows;
  for (int n = 2; n <= 6; ++n) {
    const double scale = std::ldexp(1.0, -n);
    std::vector<double> v(512);
    for (std::size_t k = 0; k < 512; ++k) {
      v[k] = 1.0 + scale * std::cos(kTwoPi * double(k) / 512.0);
    }
    phis.push_back(DensityGrid(std::move(v)));
    sigmas.push_back(from_density(phis.back(), 32));
    const double eps_min = std::ldexp(1.0, -n - 1) / (1.0 - std::ldexp(1.0, -n));
    rows.push_back({n, (1.0 - scale) / 2.0, kPi * std::ldexp(1.0, -n), eps_min * (1.0 + 1e-9),
                    1e-6});
  }
  const ConvergenceReport good = check_convergence(phis, sigmas, rows);

  std::vector<DensityGrid> phis2 = phis;
  phis2[0].values[256] = 0.0;  // kill phi at theta = pi in the n = 2 element
  const CircleMeasure sigma2 = from_density(phis2[0], 32);
  std::vector<CircleMeasure> sigmas2 = sigmas;
  sigmas2[0] = sigma2;
  const ConvergenceReport flagged = check_convergence(phis2, sigmas2, rows);
  bool violation_at_2 = !flagged.all_pass && !flagged.steps[0].good &&
                        flagged.steps[0].n == 2 && flagged.steps[1].good;
  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  report(9, good.all_pass && violation_at_2,
         std::string("synthetic chain passes; planted violation flagged at n=2"), dt);
}

// Criterion 10: a second run of the criterion-8 configuration with the same
// seed produces byte-identical certificate JSON.
void criterion_10(const fs::path& work, const EndToEnd& first) {
  const auto t0 = Clock::now();
  const RunTrace again =
      run_construction(build_cyclic(1 << 18), 3, Schedule::dyadic(0.5), 7, 512, 32);
  const fs::path dir2 = work / "trace10";
  write_trace(dir2, again);
  bool identical = true;
  std::string offender;
  for (const char* name : {"certificate_1.json", "certificate_2.json", "certificate_3.json",
                           "witness.json", "convergence.json", "manifest.json"}) {
    std::ifstream a(first.trace_dir / name, std::ios::binary);
    std::ifstream b(dir2 / name, std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    if (sa.empty() || sa != sb) {
      identical = false;
      offender = name;
    }
  }
  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  report(10, identical,
         identical ? "repeat run is byte-identical" : "repeat run differs in " + offender, dt);
}

// Extra: the CLI round trip construct -> verify on a smaller configuration.
void cli_round_trip(const std::string& cli, const fs::path& work) {
  if (cli.empty()) return;
  const auto t0 = Clock::now();
  const fs::path cfg_path = work / "construct.json";
  {
    Json cfg = {{"root", {{"N", 65536}}},
                {"steps", 2},
                {"schedule", {{"alpha1", 0.5}}},
                {"seed", 7},
                {"grid", {{"G", 512}, {"P", 32}}}};
    save_json(cfg_path, cfg);
  }
  const fs::path out = work / "cli_trace";
  const std::string construct_cmd =
      cli + " construct --config " + cfg_path.string() + " --out " + out.string() +
      " > " + (work / "construct.log").string() + " 2>&1";
  const int rc1 = std::system(construct_cmd.c_str());
  const std::string verify_cmd = cli + " verify " + out.string() + " > " +
                                 (work / "verify.log").string() + " 2>&1";
  const int rc2 = std::system(verify_cmd.c_str());
  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  std::printf("cli         : %s  construct exit %d, verify exit %d  (%.1fs)\n",
              (rc1 == 0 && rc2 == 0) ? "PASS" : "FAIL", rc1, rc2, dt);
  if (rc1 != 0 || rc2 != 0) ++g_failures;
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--cli") cli = argv[i + 1];
  }
  const fs::path work = fs::temp_directory_path() / "lebspec_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  const EndToEnd e2e = criterion_8(work);
  criterion_9();
  criterion_10(work, e2e);
  cli_round_trip(cli, work);

  if (g_failures == 0) {
    std::printf("acceptance: all criteria PASS\n");
    return 0;
  }
  std::printf("acceptance: %d criteria FAILED\n", g_failures);
  return 1;
}
