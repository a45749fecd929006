#include "lebspec/construction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lebspec/rng.hpp"
#include "lebspec/sum.hpp"

namespace lebspec {

Schedule Schedule::dyadic(double alpha1) {
  if (!(alpha1 > 0.0 && alpha1 < 1.0)) {
    throw InvalidArgument("dyadic schedule requires alpha1 in (0, 1)");
  }
  return Schedule(true, alpha1);
}

Schedule Schedule::from_rows(std::vector<ScheduleRow> rows) {
  if (rows.empty()) throw InvalidArgument("explicit schedule needs at least one row");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].n != static_cast<int>(i) + 1) {
      throw InvalidArgument("explicit schedule rows must be numbered 1..k");
    }
  }
  validate_schedule(rows);
  Schedule s(false, rows.front().alpha);
  s.rows_ = std::move(rows);
  return s;
}

double Schedule::tau(int n) const {
  if (n < 1) throw InvalidArgument("schedule index must be >= 1");
  if (!dyadic_) return row(n).tau;
  return std::ldexp(kPi, -n);
}

double Schedule::rho(int n) const {
  if (n < 1) throw InvalidArgument("schedule index must be >= 1");
  if (!dyadic_) return row(n).rho;
  return std::ldexp(1.0, -n - 2);
}

double Schedule::alpha(int n) const {
  if (n < 1) throw InvalidArgument("schedule index must be >= 1");
  if (!dyadic_) return row(n).alpha;
  if (n == 1) return alpha1_;
  const auto it = alphas_.find(n);
  if (it == alphas_.end()) {
    throw InvalidArgument("alpha_" + std::to_string(n) + " not realized yet");
  }
  return it->second;
}

double Schedule::eps_for_alpha(int n, double alpha) const {
  if (!dyadic_) return row(n).eps;
  return std::ldexp(1.0, -n - 1) * std::min(1.0, alpha);
}

double Schedule::eps(int n) const { return eps_for_alpha(n, alpha(n)); }

void Schedule::set_alpha(int n, double alpha) {
  if (!(alpha > 0.0)) throw InvalidArgument("realized alpha must be > 0");
  if (dyadic_) alphas_[n] = alpha;
}

ScheduleRow Schedule::row(int n) const {
  if (n < 1) throw InvalidArgument("schedule index must be >= 1");
  if (!dyadic_) {
    if (static_cast<std::size_t>(n) > rows_.size()) {
      throw InvalidArgument("explicit schedule has no row " + std::to_string(n));
    }
    return rows_[static_cast<std::size_t>(n - 1)];
  }
  return ScheduleRow{n, alpha(n), tau(n), eps(n), rho(n)};
}

std::vector<ScheduleRow> Schedule::rows(int upto) const {
  std::vector<ScheduleRow> out;
  for (int n = 1; n <= upto; ++n) out.push_back(row(n));
  return out;
}

char eta_tag(Eta eta) { return eta == Eta::One ? '1' : 'i'; }

std::complex<double> eta_value(Eta eta) {
  return eta == Eta::One ? std::complex<double>(1.0, 0.0) : std::complex<double>(0.0, 1.0);
}

namespace {

double min_off_grid(const DensityGrid& d, double tau) {
  double out = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (angular_distance(d.theta(k)) > tau) out = std::min(out, d.values[k]);
  }
  return out;
}

struct AddResult {
  Observable f;
  std::vector<double> distances;
  std::uint64_t seed_used;
};

AddResult add_orthogonal_internal(const ConstructionState& state, double rho,
                                  std::uint64_t seed) {
  if (!(rho > 0.0)) throw InvalidArgument("rho must be > 0");
  const SystemPtr& sys = state.current;
  const int P = state.order;
  const int height = static_cast<int>(std::ceil(4.0 / rho));
  Tower tower;
  try {
    tower = rokhlin_tower(*sys, height, std::min(1.0, rho / 4.0));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string("add_orthogonal_function: ") + e.what() +
                          "; use a larger system");
  }

  std::vector<CircleMeasure> family_spectra;
  family_spectra.reserve(state.family.size());
  for (const auto& f : state.family) family_spectra.push_back(spectral_measure(f, P));
  const CircleMeasure flat = CircleMeasure::lebesgue(1.0, P);
  const std::complex<double> etas[3] = {{1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}};

  std::vector<AttemptRecord> attempts;
  double best = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < 100; ++attempt) {
    const std::uint64_t attempt_seed =
        derive_seed(seed, streams::kAddFunction, static_cast<std::uint64_t>(attempt));
    Rng rng(attempt_seed);
    std::vector<std::uint8_t> bits(sys->size(), 0);
    const std::size_t columns = tower.base.size();
    for (std::size_t c = 0; c < columns; ++c) {
      for (int level = 0; level < tower.height; ++level) {
        bits[tower.levels[static_cast<std::size_t>(level)][c]] =
            static_cast<std::uint8_t>(rng.next() >> 63);
      }
    }
    for (auto a : tower.residual) bits[a] = static_cast<std::uint8_t>(rng.next() >> 63);

    Observable f = pm_observable(sys, bits);
    std::vector<double> distances;
    double worst = weak_distance(spectral_measure(f, P), flat);
    distances.push_back(worst);
    for (std::size_t j = 0; j < state.family.size() && worst < rho; ++j) {
      const CircleMeasure target = family_spectra[j] + flat;
      for (const auto& eta : etas) {
        const double d =
            weak_distance(spectral_measure(state.family[j] + eta * f, P), target);
        distances.push_back(d);
        worst = std::max(worst, d);
        if (worst >= rho) break;
      }
    }
    AttemptRecord record;
    record.seed = attempt_seed;
    record.distances = distances;
    record.accepted = worst < rho;
    if (record.accepted) {
      return AddResult{std::move(f), std::move(distances), attempt_seed};
    }
    best = std::min(best, worst);
    attempts.push_back(std::move(record));
  }
  throw SearchFailure("add_orthogonal_function exhausted 100 attempts (best worst-case "
                      "distance " + std::to_string(best) + ", tolerance " +
                      std::to_string(rho) + "); use a larger system or a taller tower",
                      std::move(attempts));
}

}  // namespace

Observable add_orthogonal_function(const ConstructionState& state, double rho,
                                   std::uint64_t seed) {
  return add_orthogonal_internal(state, rho, seed).f;
}

ConstructionState init_state(SystemPtr root, Schedule schedule, std::uint64_t seed,
                             std::size_t grid_size, int order) {
  if (!root) throw InvalidArgument("init_state needs a root system");
  if (grid_size < static_cast<std::size_t>(4 * order)) {
    throw InvalidArgument("grid must satisfy G >= 4*order");
  }
  ConstructionState st;
  st.n = 1;
  st.grid_size = grid_size;
  st.order = order;
  st.root_seed = seed;
  st.root = root;
  st.current = root;
  st.schedule = std::move(schedule);
  st.atom_history = {root->size()};

  const ScheduleRow r1 = st.schedule.row(1);
  const DensityGrid phi1 = DensityGrid::constant(grid_size, 1.0);
  if (!is_good(phi1, GoodSpec(r1.alpha, r1.tau))) {
    throw StepError(1, "A1", "phi_1 = 1 is not (alpha_1, tau_1)-good; lower alpha_1");
  }

  AddResult add = [&] {
    try {
      return add_orthogonal_internal(st, r1.rho,
                                     derive_seed(seed, streams::kAddFunction, 1));
    } catch (const SearchFailure& e) {
      throw StepError(1, "flatness",
                      std::string("flatness unreachable at N=") +
                          std::to_string(root->size()) + ", use a larger root: " + e.what());
    }
  }();

  const CircleMeasure sigma1 = spectral_measure(add.f, order);
  const double a4 = weak_distance(sigma1, from_density(phi1, order));

  StepCertificate cert;
  cert.n = 1;
  cert.atoms_before = cert.atoms_after = root->size();
  cert.alpha = r1.alpha;
  cert.tau = r1.tau;
  cert.eps = r1.eps;
  cert.rho = r1.rho;
  cert.add_seed = add.seed_used;
  cert.add_distances = add.distances;
  cert.a1.push_back({"A1.good.j=1", min_off_grid(phi1, r1.tau), r1.alpha, r1.tau, true});
  cert.a4.push_back({"A4.single.j=1", a4, r1.rho, 0.0, a4 < r1.rho});
  cert.a1_pass = true;
  cert.a2_pass = cert.a3_pass = true;
  cert.a4_pass = a4 < r1.rho;
  cert.mass.push_back({"mass.cumulative", 0.0, st.schedule.eps(1), 0.0, true});
  cert.mass_pass = true;
  cert.pass = cert.a4_pass;
  if (!cert.pass) {
    throw StepError(1, "A4", "initial flat function failed the lifted-target check");
  }

  st.family.push_back(std::move(add.f));
  st.target_single.push_back(phi1);
  st.atom_history.push_back(root->size());
  st.certificates.push_back(std::move(cert));
  st.target_history.push_back({phi1});
  st.measure_history.push_back({sigma1});
  st.system_history.push_back(st.current);
  st.family_history.push_back(st.family);
  return st;
}

namespace {

struct Entry {
  bool is_pair = false;
  std::size_t i = 0, j = 0;
  Eta eta = Eta::One;
  std::string tag;
};

const DensityGrid& entry_target(const ConstructionState& st, const Entry& e) {
  if (!e.is_pair) return st.target_single[e.j];
  return st.target_pair.at(PairKey{e.i, e.j, e.eta});
}

}  // namespace

ConstructionState inductive_step(const ConstructionState& state) {
  if (state.n < 1) throw InvalidArgument("state not initialized");
  const int n = state.n;
  const int n1 = n + 1;
  const std::size_t G = state.grid_size;
  const int P = state.order;

  ConstructionState st = state;  // mutate a copy; failures leave the input unchanged
  Schedule& sched = st.schedule;
  const double tau_n = sched.tau(n);
  const double tau_next = sched.tau(n1);
  const double rho_next = sched.rho(n1);
  const double eps_prov = sched.eps_for_alpha(n1, sched.alpha(n));

  // (1) Adjoin f_{n+1}; targets phi_{n+1} = 1 and phi_{i,n+1,eta} = phi_i + 1.
  const std::uint64_t add_seed =
      derive_seed(st.root_seed, streams::kAddFunction, static_cast<std::uint64_t>(n1));
  AddResult add = [&] {
    try {
      return add_orthogonal_internal(state, rho_next, add_seed);
    } catch (const SearchFailure& e) {
      throw StepError(n1, "add_orthogonal_function", e.what());
    } catch (const InvalidArgument& e) {
      throw StepError(n1, "add_orthogonal_function", e.what());
    }
  }();
  st.family.push_back(std::move(add.f));
  const std::size_t K = st.family.size();
  st.target_single.push_back(DensityGrid::constant(G, 1.0));
  for (std::size_t i = 0; i + 1 < K; ++i) {
    for (Eta eta : {Eta::One, Eta::Imag}) {
      DensityGrid t = st.target_single[i];
      t += 1.0;
      st.target_pair.insert_or_assign(PairKey{i, K - 1, eta}, std::move(t));
    }
  }

  // Fixed entry order: singles, then pairs by (i, j, eta).
  std::vector<Entry> entries;
  std::vector<Observable> entry_obs;
  for (std::size_t j = 0; j < K; ++j) {
    entries.push_back({false, j, j, Eta::One, "single.j=" + std::to_string(j + 1)});
    entry_obs.push_back(st.family[j]);
  }
  for (std::size_t i = 0; i + 1 < K; ++i) {
    for (std::size_t j = i + 1; j < K; ++j) {
      for (Eta eta : {Eta::One, Eta::Imag}) {
        entries.push_back({true, i, j, eta,
                           "pair.i=" + std::to_string(i + 1) + ".j=" + std::to_string(j + 1) +
                               ".eta=" + std::string(1, eta_tag(eta))});
        entry_obs.push_back(st.family[i] + eta_value(eta) * st.family[j]);
      }
    }
  }

  // Spectral measures at order 2P (delta-independent, computed once).
  std::vector<CircleMeasure> sigma2p;
  sigma2p.reserve(entries.size());
  for (const auto& obs : entry_obs) sigma2p.push_back(spectral_measure(obs, 2 * P));

  // (2)-(5) with delta halving: start at eps/2 and shrink until the spread
  // densities clear the strong-closeness margin and the verification passes.
  double delta = std::min(eps_prov / 2.0, 0.49);
  std::string fail_condition = "step1";
  std::string fail_message = "Step 1 margin unreachable";
  for (int halvings = 0; halvings <= 20; ++halvings, delta /= 2.0) {
    std::vector<DensityGrid> psi;
    psi.reserve(entries.size());
    std::vector<double> step1_devs(entries.size());
    bool step1_ok = true;
    for (std::size_t e = 0; e < entries.size(); ++e) {
      psi.push_back(to_density(spread_out(sigma2p[e], delta, P), G, P));
      step1_devs[e] = strong_deviation(entry_target(st, entries[e]), psi.back(), tau_n);
      step1_ok = step1_ok && step1_devs[e] <= eps_prov;
    }
    if (!step1_ok) {
      fail_condition = "step1";
      fail_message = "Step 1 margin unreachable (spread densities vs current targets)";
      continue;
    }

    const std::uint64_t induce_seed =
        derive_seed(st.root_seed, streams::kSpreadInduce,
                    static_cast<std::uint64_t>(n1) * 64 + static_cast<std::uint64_t>(halvings));
    SpreadResult sr;
    try {
      sr = spread_by_inducing(state.current, entry_obs, delta, rho_next, 20, induce_seed, P);
    } catch (const SearchFailure& e) {
      fail_condition = "spread_by_inducing";
      fail_message = e.what();
      continue;
    }

    // Realized alpha_{n+1}: half the minimum of the new single densities off
    // (-tau_{n+1}, tau_{n+1}).
    double min_off = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < K; ++j) min_off = std::min(min_off, min_off_grid(psi[j], tau_next));
    if (!(min_off > 0.0)) {
      fail_condition = "A1";
      fail_message = "a spread density vanishes off (-tau, tau)";
      continue;
    }
    sched.set_alpha(n1, min_off / 2.0);
    const double alpha_used = sched.alpha(n1);
    const double eps_final = sched.eps(n1);

    StepCertificate cert;
    cert.n = n1;
    cert.atoms_before = state.current->size();
    cert.atoms_after = sr.induced.subset.size();
    cert.alpha = alpha_used;
    cert.tau = tau_next;
    cert.eps = eps_final;
    cert.rho = rho_next;
    cert.delta = delta;
    cert.delta_halvings = halvings;
    cert.add_seed = add.seed_used;
    cert.induce_seed = induce_seed;
    cert.accepted_seed = sr.accepted_seed;
    cert.induce_attempts = static_cast<int>(sr.attempts.size());
    cert.induce_log = sr.attempts;
    cert.independence = sr.independence;
    cert.return_freq1 = sr.return_freqs[0];
    cert.return_freq2 = sr.return_freqs[1];
    cert.freq_window = sr.freq_window;
    cert.add_distances = add.distances;

    // (A1) goodness of every single target at (alpha_{n+1}, tau_{n+1}).
    cert.a1_pass = true;
    for (std::size_t j = 0; j < K; ++j) {
      const bool good = is_good(psi[j], GoodSpec(alpha_used, tau_next));
      cert.a1.push_back({"A1.good.j=" + std::to_string(j + 1), min_off_grid(psi[j], tau_next),
                         alpha_used, tau_next, good});
      cert.a1_pass = cert.a1_pass && good;
    }

    // (A2) strong-closeness chain. Retained targets off tau_n (reference good
    // at stage n); new-function relations off tau_{n+1}.
    cert.a2_pass = true;
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const Entry& en = entries[e];
      if (en.j == K - 1) continue;  // new function handled below
      const bool ok = step1_devs[e] <= eps_final;
      cert.a2.push_back({"A2." + en.tag, step1_devs[e], eps_final, tau_n, ok});
      cert.a2_pass = cert.a2_pass && ok;
    }
    {
      const double dev = strong_deviation(DensityGrid::constant(G, 1.0), psi[K - 1], tau_next);
      const bool ok = dev <= eps_final;
      cert.a2.push_back({"A2.new_single", dev, eps_final, tau_next, ok});
      cert.a2_pass = cert.a2_pass && ok;
    }
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const Entry& en = entries[e];
      if (!en.is_pair || en.j != K - 1) continue;
      DensityGrid ref = psi[en.i];  // realized phi_i^{(n+1)} + 1
      ref += 1.0;
      const double dev = strong_deviation(ref, psi[e], tau_next);
      const bool ok = dev <= eps_final;
      cert.a2.push_back({"A2.new_" + en.tag, dev, eps_final, tau_next, ok});
      cert.a2_pass = cert.a2_pass && ok;
    }

    // (A3) restriction drift: the recentering magnitude per retained single.
    cert.a3_pass = true;
    for (std::size_t j = 0; j < K; ++j) {
      const double drift = std::abs(sr.drifts[j]);
      const bool ok = drift <= eps_final;
      cert.a3.push_back({"A3.drift.j=" + std::to_string(j + 1), drift, eps_final, 0.0, ok});
      cert.a3_pass = cert.a3_pass && ok;
    }

    // (A4) weak closeness of the restricted spectra to the lifted targets.
    cert.a4_pass = true;
    std::vector<CircleMeasure> new_measures;
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const CircleMeasure sigma = spectral_measure(sr.restricted[e], P);
      const double d = weak_distance(sigma, from_density(psi[e], P));
      const bool ok = d < rho_next;
      cert.a4.push_back({"A4." + entries[e].tag, d, rho_next, 0.0, ok});
      cert.a4_pass = cert.a4_pass && ok;
      if (!entries[e].is_pair) new_measures.push_back(sigma);
    }

    // Mass bookkeeping against the root measure.
    const double n_root = static_cast<double>(st.root->size());
    const double abs_increment =
        (static_cast<double>(state.current->size()) - static_cast<double>(sr.induced.subset.size())) /
        n_root;
    const double total = st.deleted_mass + abs_increment;
    double eps_sum = 0.0;
    for (int k = 1; k <= n1; ++k) eps_sum += sched.eps(k);
    cert.deleted_increment_rel = sr.deleted_fraction;
    cert.deleted_increment_abs = abs_increment;
    cert.deleted_mass_total = total;
    cert.mass_pass = true;
    {
      const bool ok = abs_increment < eps_final;
      cert.mass.push_back({"mass.increment", abs_increment, eps_final, 0.0, ok});
      cert.mass_pass = cert.mass_pass && ok;
    }
    {
      const bool ok = sr.deleted_fraction < 2.0 * delta;
      cert.mass.push_back({"mass.increment_rel", sr.deleted_fraction, 2.0 * delta, 0.0, ok});
      cert.mass_pass = cert.mass_pass && ok;
    }
    {
      const bool ok = total < eps_sum;
      cert.mass.push_back({"mass.cumulative", total, eps_sum, 0.0, ok});
      cert.mass_pass = cert.mass_pass && ok;
    }

    cert.pass = cert.a1_pass && cert.a2_pass && cert.a3_pass && cert.a4_pass && cert.mass_pass;
    if (!cert.pass) {
      fail_condition = !cert.a1_pass   ? "A1"
                       : !cert.a2_pass ? "A2"
                       : !cert.a3_pass ? "A3"
                       : !cert.a4_pass ? "A4"
                                       : "mass";
      fail_message = "verification failed at stage " + std::to_string(n1);
      continue;
    }

    // Diagnostic track: restrict along the same set, same delta.
    if (st.has_track) {
      std::vector<Observable> next_track;
      std::vector<double> dists;
      for (const auto& h : st.track_family) {
        const DensityGrid psi_h =
            to_density(spread_out(spectral_measure(h, 2 * P), delta, P), G, P);
        RestrictedObservable r = restrict_observable(h, sr.induced);
        dists.push_back(
            weak_distance(spectral_measure(r.observable, P), from_density(psi_h, P)));
        next_track.push_back(std::move(r.observable));
      }
      cert.track_distances = dists;
      st.track_family = std::move(next_track);
      st.track_distances.push_back(std::move(dists));
    }

    // Commit.
    st.n = n1;
    st.current = sr.induced.induced;
    st.family.assign(sr.restricted.begin(), sr.restricted.begin() + static_cast<long>(K));
    st.target_single.assign(psi.begin(), psi.begin() + static_cast<long>(K));
    st.target_pair.clear();
    for (std::size_t e = K; e < entries.size(); ++e) {
      st.target_pair.insert_or_assign(PairKey{entries[e].i, entries[e].j, entries[e].eta},
                                      psi[e]);
    }
    st.deleted_mass = total;
    st.atom_history.push_back(sr.induced.subset.size());
    st.certificates.push_back(std::move(cert));
    st.target_history.push_back(st.target_single);
    st.measure_history.push_back(std::move(new_measures));
    st.system_history.push_back(st.current);
    st.family_history.push_back(st.family);
    st.subset_history.push_back(sr.induced.subset);
    return st;
  }
  throw StepError(n1, fail_condition, fail_message);
}

RunTrace run_construction(SystemPtr root, int steps, Schedule schedule,
                          std::uint64_t seed, std::size_t grid_size, int order,
                          WitnessConfig witness, std::vector<Observable> dense_family) {
  if (steps < 1) throw InvalidArgument("steps must be >= 1");
  RunTrace trace;
  trace.state = init_state(std::move(root), std::move(schedule), seed, grid_size, order);
  if (!dense_family.empty()) lebesgue_track(trace.state, std::move(dense_family));
  for (int stage = 2; stage <= steps; ++stage) {
    try {
      trace.state = inductive_step(trace.state);
    } catch (const StepError& e) {
      trace.failure = StepFailureInfo{e.step(), e.condition(), e.what()};
      trace.pass = false;
      return trace;
    }
  }
  trace.witness = multiplicity_witness(trace.state.family, witness.eps,
                                       trace.state.schedule.tau(steps), grid_size, order,
                                       witness.coverage_goal, witness.threshold);
  trace.witness_valid = true;
  for (std::size_t j = 0; j < trace.state.family.size(); ++j) {
    std::vector<DensityGrid> phis;
    std::vector<CircleMeasure> sigmas;
    std::vector<ScheduleRow> rows;
    for (int stage = static_cast<int>(j) + 1; stage <= steps; ++stage) {
      phis.push_back(trace.state.target_history[static_cast<std::size_t>(stage - 1)][j]);
      sigmas.push_back(trace.state.measure_history[static_cast<std::size_t>(stage - 1)][j]);
      rows.push_back(trace.state.schedule.row(stage));
    }
    trace.convergence.push_back(check_convergence(phis, sigmas, rows));
  }
  bool pass = trace.witness.certified_bound == trace.state.family.size();
  for (const auto& cert : trace.state.certificates) pass = pass && cert.pass;
  for (const auto& rep : trace.convergence) pass = pass && rep.all_pass;
  trace.pass = pass;
  return trace;
}

LebesgueTrackReport lebesgue_track(ConstructionState& state,
                                   std::vector<Observable> dense_family) {
  if (state.n != 1) {
    throw InvalidArgument("attach the diagnostic track on a fresh stage-1 state");
  }
  for (const auto& h : dense_family) {
    if (h.system() != state.current) {
      throw InvalidArgument("track functions must be simple on the root system");
    }
  }
  state.has_track = true;
  state.track_family = std::move(dense_family);
  state.track_distances.clear();
  return track_report(state);
}

LebesgueTrackReport track_report(const ConstructionState& state) {
  return LebesgueTrackReport{state.track_family.size(), state.track_distances};
}

}  // namespace lebspec
