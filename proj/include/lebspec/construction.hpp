#pragma once

#include <compare>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lebspec/circle_measures.hpp"
#include "lebspec/inducing.hpp"
#include "lebspec/spectra.hpp"
#include "lebspec/systems.hpp"

namespace lebspec {

/// A sub-step of the inductive construction exhausted its retries; names the
/// failed condition. The input state is left untouched.
class StepError : public Error {
 public:
  StepError(int step, std::string condition, const std::string& what)
      : Error("step " + std::to_string(step) + " [" + condition + "]: " + what),
        step_(step),
        condition_(std::move(condition)) {}
  int step() const noexcept { return step_; }
  const std::string& condition() const noexcept { return condition_; }

 private:
  int step_;
  std::string condition_;
};

/// Per-step parameters (alpha_n, tau_n, eps_n, rho_n). The dyadic schedule
/// uses tau_n = pi 2^-n, rho_n = 2^-n-2 and eps_n = 2^-n-1 min(1, alpha_n),
/// with alpha_n for n >= 2 recorded from the realized densities; this always
/// satisfies eps_n < min(2^-n, alpha_n/2). Explicit rows are validated once.
class Schedule {
 public:
  Schedule() : Schedule(dyadic(0.5)) {}
  static Schedule dyadic(double alpha1);
  static Schedule from_rows(std::vector<ScheduleRow> rows);

  bool is_dyadic() const { return dyadic_; }
  double tau(int n) const;
  double rho(int n) const;
  double eps(int n) const;
  double alpha(int n) const;
  /// eps_n the dyadic rule would produce for a hypothetical alpha.
  double eps_for_alpha(int n, double alpha) const;
  /// Records the realized alpha_n (dyadic mode; ignored for explicit rows).
  void set_alpha(int n, double alpha);
  ScheduleRow row(int n) const;
  std::vector<ScheduleRow> rows(int upto) const;

 private:
  Schedule(bool dyadic, double alpha1) : dyadic_(dyadic), alpha1_(alpha1) {}
  bool dyadic_ = true;
  double alpha1_ = 0.5;
  std::map<int, double> alphas_;
  std::vector<ScheduleRow> rows_;
};

enum class Eta { One, Imag };
char eta_tag(Eta eta);
std::complex<double> eta_value(Eta eta);

struct PairKey {
  std::size_t i;  // zero-based function indices, i < j
  std::size_t j;
  Eta eta;
  auto operator<=>(const PairKey&) const = default;
};

/// One named verification with its measured value against its bound.
struct CheckRecord {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  double tau_used = 0.0;
  bool pass = false;
};

struct StepCertificate {
  int n = 0;  // stage this certificate establishes
  std::size_t atoms_before = 0, atoms_after = 0;
  double alpha = 0.0, tau = 0.0, eps = 0.0, rho = 0.0;
  double delta = 0.0;
  int delta_halvings = 0;
  std::uint64_t add_seed = 0, induce_seed = 0, accepted_seed = 0;
  int induce_attempts = 0;
  double deleted_increment_rel = 0.0;  // |A^c| / |A_n|
  double deleted_increment_abs = 0.0;  // (|A_n| - |A_{n+1}|) / |root|
  double deleted_mass_total = 0.0;
  double independence = 0.0;
  double return_freq1 = 0.0, return_freq2 = 0.0, freq_window = 0.0;
  std::vector<double> add_distances;  // verification distances of the adjoined function
  std::vector<AttemptRecord> induce_log;
  std::vector<CheckRecord> a1, a2, a3, a4, mass;
  bool a1_pass = false, a2_pass = false, a3_pass = false, a4_pass = false;
  bool mass_pass = false;
  bool pass = false;
  std::vector<double> track_distances;  // diagnostic track, may be empty
};

struct ConstructionState {
  int n = 0;
  std::size_t grid_size = 512;
  int order = 64;
  std::uint64_t root_seed = 0;
  SystemPtr root;
  SystemPtr current;
  Schedule schedule;
  std::vector<Observable> family;  // f_j^(n), j = 0..n-1
  std::vector<DensityGrid> target_single;
  std::map<PairKey, DensityGrid> target_pair;
  double deleted_mass = 0.0;                // absolute, relative to the root
  std::vector<std::size_t> atom_history;    // atom count per stage (index n-1)
  std::vector<StepCertificate> certificates;
  std::vector<std::vector<DensityGrid>> target_history;     // singles per stage
  std::vector<std::vector<CircleMeasure>> measure_history;  // sigma(f_j) per stage
  std::vector<SystemPtr> system_history;                    // system per stage
  std::vector<std::vector<Observable>> family_history;      // family per stage
  std::vector<std::vector<std::uint32_t>> subset_history;   // A_n inside A_{n-1}, n >= 2
  // Diagnostic track of extra functions restricted along the same sets.
  bool has_track = false;
  std::vector<Observable> track_family;
  std::vector<std::vector<double>> track_distances;  // per step, per function
};

/// Stage 1: A_1 = X, phi_1 = 1, f_1 adjoined and verified flat within rho_1.
ConstructionState init_state(SystemPtr root, Schedule schedule, std::uint64_t seed,
                             std::size_t grid_size = 512, int order = 64);

/// Builds a zero-mean simple function on the current system by assigning an
/// i.i.d. +-1 word along each Rokhlin-tower column (height ceil(4/rho),
/// residual <= rho/4), then verifies weak closeness of sigma(f_new) to the
/// flat measure and of sigma(f_j + eta f_new) to sigma(f_j) + 1 for every
/// family member and eta in {+1, -1, i}; retries with fresh words up to 100
/// times.
Observable add_orthogonal_function(const ConstructionState& state, double rho,
                                   std::uint64_t seed);

/// One inductive step: adjoin f_{n+1}, choose delta <= eps_{n+1}/2 by halving
/// until the spread densities are strongly close to the current targets,
/// induce via spread_by_inducing at rho_{n+1}, adopt the spread densities as
/// the new targets and verify (A1)-(A4). Throws StepError (input unchanged)
/// when a sub-step exhausts its retries.
ConstructionState inductive_step(const ConstructionState& state);

struct WitnessConfig {
  double eps = 0.4;
  double threshold = 0.5;
  double coverage_goal = 0.9;
};

struct StepFailureInfo {
  int step = 0;
  std::string condition;
  std::string message;
};

struct RunTrace {
  ConstructionState state;  // final (or last completed) state
  bool witness_valid = false;
  MultiplicityCertificate witness;
  std::vector<ConvergenceReport> convergence;  // one per retained function chain
  std::optional<StepFailureInfo> failure;
  bool pass = false;
};

/// Runs `steps` stages from the root, emits per-step certificates, the final
/// multiplicity witness on the family, and convergence reports over the
/// target-density sequences. Step errors are retained in the trace.
RunTrace run_construction(SystemPtr root, int steps, Schedule schedule,
                          std::uint64_t seed, std::size_t grid_size = 512,
                          int order = 64, WitnessConfig witness = {},
                          std::vector<Observable> dense_family = {});

struct LebesgueTrackReport {
  std::size_t family_size = 0;
  std::vector<std::vector<double>> distances;  // per step, per function
};

/// Attaches a diagnostic family restricted along the same sets A_n during
/// subsequent steps; per-step distances to the same-delta spread densities
/// are recorded. Call on a fresh stage-1 state; never gates the construction.
LebesgueTrackReport lebesgue_track(ConstructionState& state,
                                   std::vector<Observable> dense_family);

/// Report accumulated so far (see lebesgue_track).
LebesgueTrackReport track_report(const ConstructionState& state);

}  // namespace lebspec
