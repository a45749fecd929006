#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "lebspec/errors.hpp"
#include "lebspec/systems.hpp"

namespace lebspec {

/// First-return structure over a subset A of a parent system: return times
/// r_A(a) >= 1 and the induced permutation, reinterpreted as an equal-weight
/// system on |A| atoms (indexed by position in the sorted subset).
struct InducedSystem {
  SystemPtr parent;
  std::vector<std::uint32_t> subset;       // sorted parent atoms
  std::vector<std::uint32_t> return_time;  // per subset position
  SystemPtr induced;                       // |A|-atom system
};

/// Walks every parent cycle; each cycle must intersect A or the orbit never
/// returns (error names a witness atom).
InducedSystem induce(SystemPtr parent, std::vector<std::uint32_t> subset);

struct Rational {
  long long num = 0;
  long long den = 1;
};
Rational make_rational(long long num, long long den);
bool operator==(const Rational& a, const Rational& b);

/// Kac identity: the expected return time (sum r_A)/|A| equals N/|A| exactly
/// whenever A meets every cycle.
struct KacReport {
  Rational expected_return;
  bool holds;
};
KacReport kac_check(const InducedSystem& ind);

/// Values copied on A and recentered so the zero-mean invariant holds on the
/// induced system; the subtracted induced mean is returned as the drift.
struct RestrictedObservable {
  Observable observable;
  std::complex<double> mean_drift;
};
RestrictedObservable restrict_observable(const Observable& f, const InducedSystem& ind);

/// Worst product-count discrepancy of A against the joint refinement of the
/// partitions: max over classes C of | |A∩C|/N − (|A|/N)(|C|/N) |.
double independence_discrepancy(const FiniteSystem& sys,
                                std::span<const Partition> parts,
                                std::span<const std::uint32_t> subset);

/// Per-class proportional pseudo-random sampling of a subset of the given
/// density, independent of the partitions up to tol; up to 100 retries.
std::vector<std::uint32_t> independent_subset(const SystemPtr& sys,
                                              std::span<const Partition> parts,
                                              double density, double tol,
                                              std::uint64_t seed);

/// Rokhlin tower: disjoint levels base, T(base), ..., T^{h-1}(base) covering
/// all but a residual of measure <= residual_bound.
struct Tower {
  std::vector<std::uint32_t> base;
  int height = 0;
  std::vector<std::vector<std::uint32_t>> levels;  // level k = T^k(base)
  std::vector<std::uint32_t> residual;
};

/// Greedy construction along cycles; needs every cycle length >=
/// height/residual_bound.
Tower rokhlin_tower(const FiniteSystem& sys, int height, double residual_bound);

/// Output of the spread-by-inducing search; self-verifying: carries the
/// measured weak distances (all < rho_prime), the return-time frequencies and
/// the independence discrepancy of the accepted attempt.
struct SpreadResult {
  InducedSystem induced;
  std::vector<Observable> restricted;            // same order as the input family
  std::vector<std::complex<double>> drifts;      // recentering means
  std::vector<double> distances;                 // d(sigma(f'_j), sigma_delta(f_j))
  double deleted_fraction = 0.0;                 // |A^c| / N
  double independence = 0.0;
  std::array<double, 2> return_freqs{0.0, 0.0};  // frequencies of r = 1, 2
  double freq_window = 0.0;                      // accepted window 5/sqrt(|A|)
  std::uint64_t accepted_seed = 0;
  std::vector<AttemptRecord> attempts;
};

/// Searches for a subset A with |A^c|/N < 2*delta, independent of the family
/// partitions (tol = rho_prime/10), whose induced return times take values in
/// {1,2} with i.i.d.(delta) statistics, such that every restricted observable
/// satisfies weak_distance(sigma(f'_j), spread_out(sigma(f_j), delta)) <
/// rho_prime. The deletion pattern is drawn per Rokhlin-tower column of
/// height ceil(2/rho_prime) as a renewal chain (no two consecutive deletions,
/// stationary deletion rate delta/(1+delta)). Fresh randomness per retry, up
/// to max_tries; failure carries the attempt log.
SpreadResult spread_by_inducing(const SystemPtr& sys, std::span<const Observable> family,
                                double delta, double rho_prime, int max_tries,
                                std::uint64_t seed, int max_order = 64);

}  // namespace lebspec
