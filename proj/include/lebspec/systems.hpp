#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lebspec/circle_measures.hpp"
#include "lebspec/errors.hpp"
#include "lebspec/rng.hpp"

namespace lebspec {

/// Equal-weight N-atom system: atom i has measure 1/N, the dynamics is the
/// permutation T(i) = perm[i]. Measure preservation is automatic.
struct FiniteSystem {
  std::vector<std::uint32_t> perm;
  std::string label;

  std::size_t size() const { return perm.size(); }
  /// Orbits of the permutation, each listed in dynamical order.
  std::vector<std::vector<std::uint32_t>> cycles() const;
};

using SystemPtr = std::shared_ptr<const FiniteSystem>;

/// Validates that perm is a bijection (by building the inverse).
SystemPtr make_system(std::vector<std::uint32_t> perm, std::string label = "");

/// perm(i) = i+1 mod N.
SystemPtr build_cyclic(std::size_t n_atoms, std::string label = "");

/// Product system on N1*N2 atoms indexed (i,j) -> i*N2 + j. Rejects products
/// beyond the size cap.
SystemPtr product(const SystemPtr& s1, const SystemPtr& s2,
                  std::size_t size_cap = (1u << 24));

/// Labeling of atoms by classes 0..class_count-1; equal labels form the
/// partition classes. Canonical form: class ids appear in first-occurrence
/// order.
struct Partition {
  std::vector<std::uint32_t> labels;
  std::uint32_t class_count = 0;

  explicit Partition(std::vector<std::uint32_t> raw_labels);
  Partition() = default;
};

Partition joint_refinement(const Partition& a, const Partition& b);

/// Zero-mean function constant on the classes of a partition of the atoms.
class Observable {
 public:
  Observable(SystemPtr system, std::vector<std::complex<double>> values,
             Partition partition);

  const SystemPtr& system() const { return system_; }
  std::span<const std::complex<double>> values() const { return values_; }
  const Partition& partition() const { return partition_; }
  std::size_t size() const { return values_.size(); }
  /// (1/N) sum |f|^2, compensated.
  double norm_squared() const;

  friend Observable operator+(const Observable& a, const Observable& b);
  friend Observable operator*(std::complex<double> scale, const Observable& f);

 private:
  SystemPtr system_;
  std::vector<std::complex<double>> values_;
  Partition partition_;
};

/// Recenters raw class-constant values to zero mean; returns the observable
/// and the subtracted mean.
std::pair<Observable, std::complex<double>> make_centered(
    SystemPtr system, std::vector<std::complex<double>> values, Partition partition);

/// +1/-1 observable from a binary labeling, recentered to zero mean.
Observable pm_observable(SystemPtr system, const std::vector<std::uint8_t>& ones);

/// Cyclic system of 2^half_window atoms with a fair +-1 pseudo-random
/// labeling; the labeling partition approximates an i.i.d. process along the
/// orbit (surrogate Bernoulli factor).
std::pair<SystemPtr, Partition> bernoulli_approx(int half_window, std::uint64_t seed);

/// Character along each cycle: value exp(-2*pi*i*k*pos/L) at cycle position
/// pos (L the cycle length); an eigenfunction of the Koopman operator on a
/// single cycle. k must not be a multiple of any cycle length (zero mean).
Observable character(SystemPtr system, int k);

/// Koopman correlation <U^n f, g> = (1/N) sum f(T^n x) conj(g(x)).
std::complex<double> correlation(const Observable& f, const Observable& g, long n);

/// Spectral measure of f: coeff(p) = <U^p f, f>, |p| <= max_order. The
/// Toeplitz positivity certificate holds by construction (Gram sequence).
CircleMeasure spectral_measure(const Observable& f, int max_order);

/// Cross-spectral table c(p) = <U^p f, g> for |p| <= max_order, computed both
/// directly and by complex polarization from sigma(f+g), sigma(f+ig),
/// sigma(f), sigma(g). Disagreement beyond 1e-8 raises ConsistencyError.
struct CrossSpectralTable {
  int max_order;
  std::vector<std::complex<double>> direct;     // p = -P..P
  std::vector<std::complex<double>> polarized;  // p = -P..P
  double max_disagreement;

  std::complex<double> direct_at(int p) const;
  std::complex<double> polarized_at(int p) const;
};

CrossSpectralTable cross_spectral(const Observable& f, const Observable& g,
                                  int max_order);

/// All pairwise tables c_ij(p) = <U^p f_i, f_j> for p = 0..max_order in one
/// sweep; negative lags via c_ij(-p) = conj(c_ji(p)).
class FamilyCrossTables {
 public:
  FamilyCrossTables(std::size_t family_size, int max_order);
  std::complex<double> at(std::size_t i, std::size_t j, int p) const;
  std::complex<double>& slot(std::size_t i, std::size_t j, int p);
  std::size_t family_size() const { return m_; }
  int max_order() const { return max_order_; }

 private:
  std::size_t m_;
  int max_order_;
  std::vector<std::complex<double>> data_;  // [p][i][j], p >= 0
};

FamilyCrossTables family_cross_tables(std::span<const Observable> family,
                                      int max_order);

/// Symbol source for the skew product over the (1-delta, delta) coin:
/// each draw selects applying T once or twice in the fiber.
struct SkewSampler {
  SystemPtr fiber;
  double delta;
  Rng rng;

  SkewSampler(SystemPtr fiber_, double delta_, std::uint64_t seed);
  int next_symbol();  // 1 with prob 1-delta, else 2
};

/// Monte-Carlo estimate of the spread-out coefficient at lag p: the average
/// over `samples` i.i.d. words (w_1..w_p) of <U^{w_1+...+w_p} f, f>.
/// Expectation equals spread_out(spectral_measure(f), delta) at p; standard
/// error <= norm^2/sqrt(samples). delta in [0, 1/2].
std::complex<double> meilijson_mc(const Observable& f, double delta, int p,
                                  std::size_t samples, std::uint64_t seed);

}  // namespace lebspec
