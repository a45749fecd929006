#include "lebspec/inducing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

#include "lebspec/parallel.hpp"
#include "lebspec/rng.hpp"
#include "lebspec/sum.hpp"

namespace lebspec {

InducedSystem induce(SystemPtr parent, std::vector<std::uint32_t> subset) {
  if (subset.empty()) throw InvalidArgument("induce requires a nonempty subset");
  std::sort(subset.begin(), subset.end());
  if (std::adjacent_find(subset.begin(), subset.end()) != subset.end()) {
    throw InvalidArgument("subset contains duplicate atoms");
  }
  const std::size_t n = parent->size();
  if (subset.back() >= n) throw InvalidArgument("subset atom out of range");

  std::vector<bool> in_subset(n, false);
  for (auto a : subset) in_subset[a] = true;

  // Position of each subset atom in the sorted list.
  std::vector<std::uint32_t> position(n, 0);
  for (std::size_t i = 0; i < subset.size(); ++i) {
    position[subset[i]] = static_cast<std::uint32_t>(i);
  }

  std::vector<std::uint32_t> return_time(subset.size(), 0);
  std::vector<std::uint32_t> induced_perm(subset.size(), 0);
  for (const auto& cycle : parent->cycles()) {
    std::vector<std::size_t> hits;  // indices into the cycle where A is met
    for (std::size_t i = 0; i < cycle.size(); ++i) {
      if (in_subset[cycle[i]]) hits.push_back(i);
    }
    if (hits.empty()) {
      throw InvalidArgument("non-returning orbit: cycle through atom " +
                            std::to_string(cycle.front()) + " never meets the subset");
    }
    for (std::size_t h = 0; h < hits.size(); ++h) {
      const std::size_t next = hits[(h + 1) % hits.size()];
      const std::size_t gap =
          (next > hits[h]) ? next - hits[h] : cycle.size() - hits[h] + next;
      const std::uint32_t from = position[cycle[hits[h]]];
      return_time[from] = static_cast<std::uint32_t>(gap);
      induced_perm[from] = position[cycle[next]];
    }
  }

  InducedSystem out;
  out.induced = make_system(std::move(induced_perm), parent->label + "|A");
  out.parent = std::move(parent);
  out.subset = std::move(subset);
  out.return_time = std::move(return_time);
  return out;
}

Rational make_rational(long long num, long long den) {
  if (den == 0) throw InvalidArgument("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const long long g = std::gcd(num < 0 ? -num : num, den);
  return Rational{g ? num / g : num, g ? den / g : den};
}

bool operator==(const Rational& a, const Rational& b) {
  return a.num == b.num && a.den == b.den;
}

KacReport kac_check(const InducedSystem& ind) {
  long long total = 0;
  for (auto r : ind.return_time) total += r;
  const Rational expected =
      make_rational(total, static_cast<long long>(ind.subset.size()));
  const Rational kac = make_rational(static_cast<long long>(ind.parent->size()),
                                     static_cast<long long>(ind.subset.size()));
  return KacReport{expected, expected == kac};
}

RestrictedObservable restrict_observable(const Observable& f, const InducedSystem& ind) {
  if (f.system() != ind.parent) {
    throw InvalidArgument("observable lives on a different system than the induction");
  }
  std::vector<std::complex<double>> values(ind.subset.size());
  std::vector<std::uint32_t> labels(ind.subset.size());
  for (std::size_t i = 0; i < ind.subset.size(); ++i) {
    values[i] = f.values()[ind.subset[i]];
    labels[i] = f.partition().labels[ind.subset[i]];
  }
  auto [obs, mean] =
      make_centered(ind.induced, std::move(values), Partition(std::move(labels)));
  return RestrictedObservable{std::move(obs), mean};
}

double independence_discrepancy(const FiniteSystem& sys,
                                std::span<const Partition> parts,
                                std::span<const std::uint32_t> subset) {
  const double n = static_cast<double>(sys.size());
  Partition joint(std::vector<std::uint32_t>(sys.size(), 0));
  for (const auto& p : parts) joint = joint_refinement(joint, p);

  std::vector<std::size_t> class_size(joint.class_count, 0);
  std::vector<std::size_t> class_hits(joint.class_count, 0);
  for (std::size_t i = 0; i < sys.size(); ++i) ++class_size[joint.labels[i]];
  for (auto a : subset) ++class_hits[joint.labels[a]];

  const double density = static_cast<double>(subset.size()) / n;
  double worst = 0.0;
  for (std::uint32_t c = 0; c < joint.class_count; ++c) {
    const double lhs = static_cast<double>(class_hits[c]) / n;
    const double rhs = density * (static_cast<double>(class_size[c]) / n);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

std::vector<std::uint32_t> independent_subset(const SystemPtr& sys,
                                              std::span<const Partition> parts,
                                              double density, double tol,
                                              std::uint64_t seed) {
  if (!(density > 0.0 && density < 1.0)) {
    throw InvalidArgument("independent_subset requires density in (0, 1)");
  }
  if (!(tol > 0.0)) throw InvalidArgument("independent_subset requires tol > 0");

  Partition joint(std::vector<std::uint32_t>(sys->size(), 0));
  for (const auto& p : parts) joint = joint_refinement(joint, p);
  std::vector<std::vector<std::uint32_t>> classes(joint.class_count);
  for (std::size_t i = 0; i < sys->size(); ++i) {
    classes[joint.labels[i]].push_back(static_cast<std::uint32_t>(i));
  }
  const double min_class = 1.0 / (tol * tol);
  for (const auto& cls : classes) {
    if (static_cast<double>(cls.size()) < min_class) {
      throw InvalidArgument("joint refinement class of size " +
                            std::to_string(cls.size()) +
                            " too small for tol (need >= 1/tol^2)");
    }
  }

  const double n = static_cast<double>(sys->size());
  double best = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng rng(derive_seed(seed, streams::kIndependentSubset, static_cast<std::uint64_t>(attempt)));
    std::vector<std::uint32_t> chosen;
    for (auto cls : classes) {
      const std::size_t want = static_cast<std::size_t>(
          std::llround(density * static_cast<double>(cls.size())));
      // Partial Fisher-Yates draw of `want` atoms.
      for (std::size_t i = 0; i < want && i < cls.size(); ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(cls.size() - i));
        std::swap(cls[i], cls[j]);
        chosen.push_back(cls[i]);
      }
    }
    std::sort(chosen.begin(), chosen.end());
    const double got_density = static_cast<double>(chosen.size()) / n;
    const double disc = independence_discrepancy(*sys, parts, chosen);
    if (std::abs(got_density - density) <= tol && disc <= tol) return chosen;
    best = std::min(best, disc);
  }
  throw SearchFailure("independent_subset exhausted retries; best discrepancy " +
                          std::to_string(best),
                      {});
}

Tower rokhlin_tower(const FiniteSystem& sys, int height, double residual_bound) {
  if (height < 1) throw InvalidArgument("tower height must be >= 1");
  if (!(residual_bound > 0.0 && residual_bound <= 1.0)) {
    throw InvalidArgument("residual bound must lie in (0, 1]");
  }
  Tower tower;
  tower.height = height;
  tower.levels.resize(static_cast<std::size_t>(height));
  // Greedy construction; the realized residual must meet the bound (a cycle
  // of length L contributes L mod height residual atoms).
  std::size_t worst_cycle = 0;
  double worst_fraction = 0.0;
  for (const auto& cycle : sys.cycles()) {
    const double fraction =
        static_cast<double>(cycle.size() % static_cast<std::size_t>(height)) /
        static_cast<double>(cycle.size());
    if (fraction > worst_fraction) {
      worst_fraction = fraction;
      worst_cycle = cycle.size();
    }
    const std::size_t columns = cycle.size() / static_cast<std::size_t>(height);
    for (std::size_t col = 0; col < columns; ++col) {
      const std::size_t start = col * static_cast<std::size_t>(height);
      tower.base.push_back(cycle[start]);
      for (int level = 0; level < height; ++level) {
        tower.levels[static_cast<std::size_t>(level)].push_back(
            cycle[start + static_cast<std::size_t>(level)]);
      }
    }
    for (std::size_t i = columns * static_cast<std::size_t>(height); i < cycle.size(); ++i) {
      tower.residual.push_back(cycle[i]);
    }
  }
  if (static_cast<double>(tower.residual.size()) >
      residual_bound * static_cast<double>(sys.size())) {
    throw InvalidArgument("cycle of length " + std::to_string(worst_cycle) +
                          " leaves a height-" + std::to_string(height) +
                          " tower with residual above the bound " +
                          std::to_string(residual_bound));
  }
  return tower;
}

namespace {

// Renewal deletion pattern along one cycle, drawn column by column: after a
// kept atom the next one is deleted with probability delta (never two
// consecutive deletions), so induced return times are i.i.d. on {1,2} with
// law (1-delta, delta) up to the wrap seam. Residual positions are kept.
void renewal_deletion(const std::vector<std::uint32_t>& cycle, int column_height,
                      double delta, Rng& rng, std::vector<bool>& keep) {
  const std::size_t len = cycle.size();
  const std::size_t columns = len / static_cast<std::size_t>(column_height);
  const std::size_t patterned = columns * static_cast<std::size_t>(column_height);
  std::size_t pos = 0;
  keep[cycle[0]] = true;
  while (pos + 1 < patterned) {
    if (rng.bernoulli(delta)) {
      // Delete the successor; land two steps ahead (or on the seam).
      if (pos + 2 <= patterned) {
        keep[cycle[pos + 1]] = false;
        if (pos + 2 == patterned) break;
        pos += 2;
      } else {
        break;
      }
    } else {
      pos += 1;
    }
    keep[cycle[pos]] = true;
  }
  for (std::size_t i = patterned; i < len; ++i) keep[cycle[i]] = true;
}

}  // namespace

SpreadResult spread_by_inducing(const SystemPtr& sys, std::span<const Observable> family,
                                double delta, double rho_prime, int max_tries,
                                std::uint64_t seed, int max_order) {
  if (!(delta > 0.0 && delta < 0.5)) {
    throw InvalidArgument("spread_by_inducing requires delta in (0, 1/2)");
  }
  if (!(rho_prime > 0.0)) throw InvalidArgument("rho_prime must be > 0");
  if (family.empty()) throw InvalidArgument("family must be nonempty");
  for (const auto& f : family) {
    if (f.system() != sys) {
      throw InvalidArgument("family members must live on the given system");
    }
  }
  std::vector<AttemptRecord> attempts;
  if (max_tries <= 0) {
    throw SearchFailure("spread_by_inducing given no attempts", std::move(attempts));
  }

  const std::size_t n = sys->size();
  const double tol_independence = rho_prime / 10.0;
  const int column_height = static_cast<int>(std::ceil(2.0 / rho_prime));

  // Targets: the spread-out spectral measures, computed once on the parent.
  std::vector<CircleMeasure> targets;
  targets.reserve(family.size());
  for (const auto& f : family) {
    targets.push_back(spread_out(spectral_measure(f, 2 * max_order), delta, max_order));
  }
  std::vector<Partition> partitions;
  partitions.reserve(family.size());
  for (const auto& f : family) partitions.push_back(f.partition());

  // The tower both checks that the system is tall enough and fixes the
  // column chunking of the deletion pattern.
  (void)rokhlin_tower(*sys, column_height, 1.0);
  const auto cycles = sys->cycles();

  double best_worst_distance = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    const std::uint64_t attempt_seed =
        derive_seed(seed, streams::kSpreadInduce, static_cast<std::uint64_t>(attempt));
    Rng rng(attempt_seed);
    std::vector<bool> keep(n, true);
    for (const auto& cycle : cycles) {
      renewal_deletion(cycle, column_height, delta, rng, keep);
    }
    std::vector<std::uint32_t> subset;
    subset.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (keep[i]) subset.push_back(static_cast<std::uint32_t>(i));
    }

    AttemptRecord record;
    record.seed = attempt_seed;
    const double deleted = 1.0 - static_cast<double>(subset.size()) / static_cast<double>(n);
    record.independence = independence_discrepancy(*sys, partitions, subset);

    bool ok = deleted < 2.0 * delta && record.independence <= tol_independence;

    InducedSystem ind;
    std::vector<Observable> restricted;
    std::vector<std::complex<double>> drifts;
    std::array<double, 2> freqs{0.0, 0.0};
    double freq_window = 0.0;
    if (ok) {
      ind = induce(sys, subset);
      std::size_t count1 = 0, count2 = 0;
      for (auto r : ind.return_time) {
        if (r == 1) ++count1;
        else if (r == 2) ++count2;
      }
      const double na = static_cast<double>(ind.subset.size());
      freqs = {static_cast<double>(count1) / na, static_cast<double>(count2) / na};
      freq_window = 5.0 / std::sqrt(na);
      ok = count1 + count2 == ind.subset.size() &&
           std::abs(freqs[0] - (1.0 - delta)) <= freq_window &&
           std::abs(freqs[1] - delta) <= freq_window;
    }
    if (ok) {
      double worst = 0.0;
      restricted.reserve(family.size());
      std::vector<double> distances(family.size(), 0.0);
      const unsigned threads = configured_threads();
      std::vector<RestrictedObservable> rest;
      rest.reserve(family.size());
      for (const auto& f : family) rest.push_back(restrict_observable(f, ind));
      for_chunks(family.size(), 1, threads, [&](std::size_t j, std::size_t, std::size_t) {
        distances[j] =
            weak_distance(spectral_measure(rest[j].observable, max_order), targets[j]);
      });
      for (std::size_t j = 0; j < family.size(); ++j) {
        restricted.push_back(std::move(rest[j].observable));
        drifts.push_back(rest[j].mean_drift);
        worst = std::max(worst, distances[j]);
      }
      record.distances = distances;
      best_worst_distance = std::min(best_worst_distance, worst);
      ok = worst < rho_prime;
      if (ok) {
        record.accepted = true;
        attempts.push_back(record);
        SpreadResult result;
        result.induced = std::move(ind);
        result.restricted = std::move(restricted);
        result.drifts = std::move(drifts);
        result.distances = std::move(distances);
        result.deleted_fraction = deleted;
        result.independence = record.independence;
        result.return_freqs = freqs;
        result.freq_window = freq_window;
        result.accepted_seed = attempt_seed;
        result.attempts = std::move(attempts);
        return result;
      }
    }
    attempts.push_back(std::move(record));
  }
  throw SearchFailure(
      "spread_by_inducing exhausted " + std::to_string(max_tries) +
          " attempts (best worst-case distance " + std::to_string(best_worst_distance) +
          ", tolerance " + std::to_string(rho_prime) +
          "); raise the atom count or max_tries",
      std::move(attempts));
}

}  // namespace lebspec
