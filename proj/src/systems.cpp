#include "lebspec/systems.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "lebspec/parallel.hpp"
#include "lebspec/sum.hpp"

namespace lebspec {

std::vector<std::vector<std::uint32_t>> FiniteSystem::cycles() const {
  const std::size_t n = perm.size();
  std::vector<bool> seen(n, false);
  std::vector<std::vector<std::uint32_t>> out;
  for (std::size_t start = 0; start < n; ++start) {
    if (seen[start]) continue;
    std::vector<std::uint32_t> cycle;
    std::uint32_t x = static_cast<std::uint32_t>(start);
    while (!seen[x]) {
      seen[x] = true;
      cycle.push_back(x);
      x = perm[x];
    }
    out.push_back(std::move(cycle));
  }
  return out;
}

SystemPtr make_system(std::vector<std::uint32_t> perm, std::string label) {
  const std::size_t n = perm.size();
  if (n == 0) throw InvalidArgument("a system needs at least one atom");
  std::vector<std::uint32_t> inverse(n, static_cast<std::uint32_t>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (perm[i] >= n) {
      throw InvalidArgument("permutation value out of range at atom " + std::to_string(i));
    }
    if (inverse[perm[i]] != n) {
      throw InvalidArgument("permutation not a bijection: value " +
                            std::to_string(perm[i]) + " repeated");
    }
    inverse[perm[i]] = static_cast<std::uint32_t>(i);
  }
  auto sys = std::make_shared<FiniteSystem>();
  sys->perm = std::move(perm);
  sys->label = std::move(label);
  return sys;
}

SystemPtr build_cyclic(std::size_t n_atoms, std::string label) {
  if (n_atoms == 0) throw InvalidArgument("cyclic system needs at least one atom");
  std::vector<std::uint32_t> perm(n_atoms);
  for (std::size_t i = 0; i < n_atoms; ++i) {
    perm[i] = static_cast<std::uint32_t>((i + 1) % n_atoms);
  }
  return make_system(std::move(perm),
                     label.empty() ? "cyclic" + std::to_string(n_atoms) : std::move(label));
}

SystemPtr product(const SystemPtr& s1, const SystemPtr& s2, std::size_t size_cap) {
  const std::size_t n1 = s1->size(), n2 = s2->size();
  if (n1 > size_cap / n2) {
    throw InvalidArgument("product system would exceed the size cap of " +
                          std::to_string(size_cap) + " atoms");
  }
  std::vector<std::uint32_t> perm(n1 * n2);
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      perm[i * n2 + j] =
          static_cast<std::uint32_t>(static_cast<std::size_t>(s1->perm[i]) * n2 + s2->perm[j]);
    }
  }
  return make_system(std::move(perm), s1->label + "x" + s2->label);
}

Partition::Partition(std::vector<std::uint32_t> raw_labels) {
  // Canonicalize: remap ids in first-occurrence order.
  std::unordered_map<std::uint32_t, std::uint32_t> remap;
  labels.resize(raw_labels.size());
  for (std::size_t i = 0; i < raw_labels.size(); ++i) {
    auto [it, inserted] = remap.try_emplace(raw_labels[i],
                                            static_cast<std::uint32_t>(remap.size()));
    labels[i] = it->second;
    (void)inserted;
  }
  class_count = static_cast<std::uint32_t>(remap.size());
}

Partition joint_refinement(const Partition& a, const Partition& b) {
  if (a.labels.size() != b.labels.size()) {
    throw InvalidArgument("joint refinement requires partitions of the same atom set");
  }
  std::vector<std::uint32_t> raw(a.labels.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = a.labels[i] * b.class_count + b.labels[i];
  }
  return Partition(std::move(raw));
}

namespace {

std::complex<double> mean_of(std::span<const std::complex<double>> values) {
  ComplexAccum acc;
  for (const auto& v : values) acc.add(v);
  return acc.value() / static_cast<double>(values.size());
}

}  // namespace

Observable::Observable(SystemPtr system, std::vector<std::complex<double>> values,
                       Partition partition)
    : system_(std::move(system)), values_(std::move(values)), partition_(std::move(partition)) {
  if (!system_) throw InvalidArgument("observable needs a system");
  const std::size_t n = system_->size();
  if (values_.size() != n || partition_.labels.size() != n) {
    throw InvalidArgument("observable values/partition must cover every atom");
  }
  std::vector<std::complex<double>> rep(partition_.class_count);
  std::vector<bool> seen(partition_.class_count, false);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t c = partition_.labels[i];
    if (!seen[c]) {
      rep[c] = values_[i];
      seen[c] = true;
    } else if (rep[c] != values_[i]) {
      throw InvalidArgument("observable not constant on partition class " + std::to_string(c));
    }
  }
  if (std::abs(mean_of(values_)) > 1e-12) {
    throw InvalidArgument("observable mean exceeds the 1e-12 zero-mean tolerance");
  }
}

double Observable::norm_squared() const {
  Accum acc;
  for (const auto& v : values_) acc.add(std::norm(v));
  return acc.value() / static_cast<double>(values_.size());
}

Observable operator+(const Observable& a, const Observable& b) {
  if (a.system_ != b.system_) {
    throw InvalidArgument("observable addition requires the same system instance");
  }
  std::vector<std::complex<double>> values(a.values_.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = a.values_[i] + b.values_[i];
  return Observable(a.system_, std::move(values),
                    joint_refinement(a.partition_, b.partition_));
}

Observable operator*(std::complex<double> scale, const Observable& f) {
  std::vector<std::complex<double>> values(f.values_.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = scale * f.values_[i];
  return Observable(f.system_, std::move(values), f.partition_);
}

std::pair<Observable, std::complex<double>> make_centered(
    SystemPtr system, std::vector<std::complex<double>> values, Partition partition) {
  const std::complex<double> mean = mean_of(values);
  for (auto& v : values) v -= mean;
  return {Observable(std::move(system), std::move(values), std::move(partition)), mean};
}

Observable pm_observable(SystemPtr system, const std::vector<std::uint8_t>& ones) {
  if (ones.size() != system->size()) {
    throw InvalidArgument("labeling must cover every atom");
  }
  std::vector<std::complex<double>> values(ones.size());
  std::vector<std::uint32_t> labels(ones.size());
  for (std::size_t i = 0; i < ones.size(); ++i) {
    values[i] = ones[i] ? 1.0 : -1.0;
    labels[i] = ones[i] ? 1u : 0u;
  }
  return make_centered(std::move(system), std::move(values), Partition(std::move(labels))).first;
}

std::pair<SystemPtr, Partition> bernoulli_approx(int half_window, std::uint64_t seed) {
  if (half_window < 1 || half_window > 30) {
    throw InvalidArgument("bernoulli_approx needs half_window in [1, 30]");
  }
  const std::size_t n = static_cast<std::size_t>(1) << half_window;
  SystemPtr sys = build_cyclic(n, "bernoulli2^" + std::to_string(half_window));
  Rng rng(derive_seed(seed, streams::kBernoulliLabels));
  std::vector<std::uint32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::uint32_t>(rng.next() >> 63);
  return {std::move(sys), Partition(std::move(labels))};
}

Observable character(SystemPtr system, int k) {
  const std::size_t n = system->size();
  std::vector<std::complex<double>> values(n);
  std::vector<std::uint32_t> labels(n);
  for (const auto& cycle : system->cycles()) {
    const std::size_t len = cycle.size();
    if (k % static_cast<long>(len) == 0) {
      throw InvalidArgument("character index divisible by a cycle length (mean not zero)");
    }
    for (std::size_t pos = 0; pos < len; ++pos) {
      values[cycle[pos]] = std::polar(
          1.0, -kTwoPi * static_cast<double>(k) * static_cast<double>(pos) /
                   static_cast<double>(len));
      labels[cycle[pos]] = cycle[pos];  // finest partition
    }
  }
  // Mean is zero analytically; recenter to absorb rounding.
  return make_centered(std::move(system), std::move(values), Partition(std::move(labels))).first;
}

namespace {

// g <- g o T, i.e. g'(x) = g(T x).
void compose_with_map(const FiniteSystem& sys, std::vector<std::complex<double>>& g,
                      std::vector<std::complex<double>>& scratch) {
  const std::size_t n = sys.size();
  scratch.resize(n);
  for (std::size_t x = 0; x < n; ++x) scratch[x] = g[sys.perm[x]];
  g.swap(scratch);
}

std::complex<double> inner(std::span<const std::complex<double>> a,
                           std::span<const std::complex<double>> b) {
  ComplexAccum acc;
  for (std::size_t i = 0; i < a.size(); ++i) acc.add(a[i] * std::conj(b[i]));
  return acc.value() / static_cast<double>(a.size());
}

}  // namespace

std::complex<double> correlation(const Observable& f, const Observable& g, long n) {
  if (f.system() != g.system()) {
    throw InvalidArgument("correlation requires observables on the same system");
  }
  if (n < 0) return std::conj(correlation(g, f, -n));
  std::vector<std::complex<double>> cur(f.values().begin(), f.values().end());
  std::vector<std::complex<double>> scratch;
  for (long step = 0; step < n; ++step) compose_with_map(*f.system(), cur, scratch);
  return inner(cur, g.values());
}

CircleMeasure spectral_measure(const Observable& f, int max_order) {
  if (max_order < 1) throw InvalidArgument("max_order must be >= 1");
  std::vector<std::complex<double>> coeffs(static_cast<std::size_t>(2 * max_order + 1));
  const std::size_t c = static_cast<std::size_t>(max_order);
  std::vector<std::complex<double>> cur(f.values().begin(), f.values().end());
  std::vector<std::complex<double>> scratch;
  coeffs[c] = inner(cur, f.values());
  for (int p = 1; p <= max_order; ++p) {
    compose_with_map(*f.system(), cur, scratch);
    coeffs[c + static_cast<std::size_t>(p)] = inner(cur, f.values());
  }
  return CircleMeasure(max_order, std::move(coeffs));
}

std::complex<double> CrossSpectralTable::direct_at(int p) const {
  if (p < -max_order || p > max_order) throw InvalidArgument("lag out of range");
  return direct[static_cast<std::size_t>(p + max_order)];
}

std::complex<double> CrossSpectralTable::polarized_at(int p) const {
  if (p < -max_order || p > max_order) throw InvalidArgument("lag out of range");
  return polarized[static_cast<std::size_t>(p + max_order)];
}

CrossSpectralTable cross_spectral(const Observable& f, const Observable& g, int max_order) {
  if (f.system() != g.system()) {
    throw InvalidArgument("cross_spectral requires observables on the same system");
  }
  const int P = max_order;
  CrossSpectralTable table;
  table.max_order = P;
  table.direct.resize(static_cast<std::size_t>(2 * P + 1));
  table.polarized.resize(static_cast<std::size_t>(2 * P + 1));

  // Direct route: <U^p f, g> for p >= 0, and <U^-p f, g> = conj(<U^p g, f>).
  std::vector<std::complex<double>> cur(f.values().begin(), f.values().end());
  std::vector<std::complex<double>> scratch;
  table.direct[static_cast<std::size_t>(P)] = inner(cur, g.values());
  for (int p = 1; p <= P; ++p) {
    compose_with_map(*f.system(), cur, scratch);
    table.direct[static_cast<std::size_t>(P + p)] = inner(cur, g.values());
  }
  cur.assign(g.values().begin(), g.values().end());
  for (int p = 1; p <= P; ++p) {
    compose_with_map(*f.system(), cur, scratch);
    table.direct[static_cast<std::size_t>(P - p)] = std::conj(inner(cur, f.values()));
  }

  // Polarization route from four spectral measures: with
  // S1(p) = sigma(f+g)(p) - sigma(f)(p) - sigma(g)(p) and
  // S2(p) = sigma(f+ig)(p) - sigma(f)(p) - sigma(g)(p),
  // <U^p f, g> = (S1(p) + i S2(p)) / 2.
  const CircleMeasure sf = spectral_measure(f, P);
  const CircleMeasure sg = spectral_measure(g, P);
  const CircleMeasure sfg = spectral_measure(f + g, P);
  const CircleMeasure sfig = spectral_measure(f + std::complex<double>(0.0, 1.0) * g, P);
  double worst = 0.0;
  for (int p = -P; p <= P; ++p) {
    const std::complex<double> s1 = sfg.coeff(p) - sf.coeff(p) - sg.coeff(p);
    const std::complex<double> s2 = sfig.coeff(p) - sf.coeff(p) - sg.coeff(p);
    const std::complex<double> rec = 0.5 * (s1 + std::complex<double>(0.0, 1.0) * s2);
    table.polarized[static_cast<std::size_t>(p + P)] = rec;
    worst = std::max(worst,
                     std::abs(rec - table.direct[static_cast<std::size_t>(p + P)]));
  }
  table.max_disagreement = worst;
  if (worst > 1e-8) {
    throw ConsistencyError(
        "cross-spectral polarization disagrees with the direct table by " +
        std::to_string(worst));
  }
  return table;
}

FamilyCrossTables::FamilyCrossTables(std::size_t family_size, int max_order)
    : m_(family_size),
      max_order_(max_order),
      data_(static_cast<std::size_t>(max_order + 1) * family_size * family_size) {}

std::complex<double> FamilyCrossTables::at(std::size_t i, std::size_t j, int p) const {
  if (p < 0) return std::conj(at(j, i, -p));
  return data_[(static_cast<std::size_t>(p) * m_ + i) * m_ + j];
}

std::complex<double>& FamilyCrossTables::slot(std::size_t i, std::size_t j, int p) {
  return data_[(static_cast<std::size_t>(p) * m_ + i) * m_ + j];
}

FamilyCrossTables family_cross_tables(std::span<const Observable> family, int max_order) {
  if (family.empty()) throw InvalidArgument("family must be nonempty");
  for (const auto& f : family) {
    if (f.system() != family.front().system()) {
      throw InvalidArgument("family members must share one system");
    }
  }
  const std::size_t m = family.size();
  FamilyCrossTables tables(m, max_order);
  std::vector<std::vector<std::complex<double>>> iterates(m);
  for (std::size_t i = 0; i < m; ++i) {
    iterates[i].assign(family[i].values().begin(), family[i].values().end());
  }
  std::vector<std::complex<double>> scratch;
  const FiniteSystem& sys = *family.front().system();
  for (int p = 0; p <= max_order; ++p) {
    if (p > 0) {
      for (std::size_t i = 0; i < m; ++i) compose_with_map(sys, iterates[i], scratch);
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        tables.slot(i, j, p) = inner(iterates[i], family[j].values());
      }
    }
  }
  return tables;
}

SkewSampler::SkewSampler(SystemPtr fiber_, double delta_, std::uint64_t seed)
    : fiber(std::move(fiber_)), delta(delta_), rng(seed) {
  if (!(delta >= 0.0 && delta <= 0.5)) {
    throw InvalidArgument("skew sampler requires delta in [0, 1/2]");
  }
}

int SkewSampler::next_symbol() { return rng.bernoulli(delta) ? 2 : 1; }

std::complex<double> meilijson_mc(const Observable& f, double delta, int p,
                                  std::size_t samples, std::uint64_t seed) {
  if (!(delta >= 0.0 && delta <= 0.5)) {
    throw InvalidArgument("meilijson_mc requires delta in [0, 1/2]");
  }
  if (p < 1) throw InvalidArgument("meilijson_mc requires p >= 1");
  if (samples < 1) throw InvalidArgument("meilijson_mc requires samples >= 1");

  // Word sums lie in [p, 2p]; tabulate the correlations once.
  std::vector<std::complex<double>> table(static_cast<std::size_t>(2 * p + 1));
  {
    std::vector<std::complex<double>> cur(f.values().begin(), f.values().end());
    std::vector<std::complex<double>> scratch;
    for (int lag = 1; lag <= 2 * p; ++lag) {
      compose_with_map(*f.system(), cur, scratch);
      if (lag >= p) table[static_cast<std::size_t>(lag - p)] = inner(cur, f.values());
    }
  }

  constexpr std::size_t kChunk = 1 << 16;
  const std::size_t n_chunks = (samples + kChunk - 1) / kChunk;
  std::vector<std::complex<double>> chunk_sums(n_chunks);
  for_chunks(samples, kChunk, configured_threads(),
             [&](std::size_t c, std::size_t b, std::size_t e) {
               SkewSampler sampler(f.system(), delta,
                                   derive_seed(seed, streams::kMeilijson, c));
               ComplexAccum acc;
               for (std::size_t s = b; s < e; ++s) {
                 int extra = 0;
                 for (int step = 0; step < p; ++step) {
                   extra += sampler.next_symbol() - 1;
                 }
                 acc.add(table[static_cast<std::size_t>(extra)]);
               }
               chunk_sums[c] = acc.value();
             });
  ComplexAccum total;
  for (const auto& z : chunk_sums) total.add(z);
  return total.value() / static_cast<double>(samples);
}

}  // namespace lebspec
