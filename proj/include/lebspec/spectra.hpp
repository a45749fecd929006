#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lebspec/circle_measures.hpp"
#include "lebspec/systems.hpp"

namespace lebspec {

/// Hermitian m x m matrix field over the theta grid: entry (i,j) at theta_k
/// is the order-P Fejer density of the cross-spectral table of (f_i, f_j).
class DensityMatrixField {
 public:
  DensityMatrixField(std::size_t grid_size, int max_order, std::size_t family_size);

  std::size_t grid_size() const { return grid_; }
  int max_order() const { return max_order_; }
  std::size_t family_size() const { return m_; }
  double theta(std::size_t k) const;

  std::complex<double> at(std::size_t k, std::size_t i, std::size_t j) const;
  std::complex<double>& slot(std::size_t k, std::size_t i, std::size_t j);
  /// Real diagonal density of f_i at grid point k.
  double diagonal(std::size_t k, std::size_t i) const { return at(k, i, i).real(); }
  /// Smallest eigenvalue of the Hermitian matrix at grid point k.
  double lambda_min(std::size_t k) const;

 private:
  std::size_t grid_;
  int max_order_;
  std::size_t m_;
  std::vector<std::complex<double>> data_;
};

/// Fejer-smoothed cross-spectral density matrix of the family. Requires all
/// observables on one system and G >= 4*max_order.
DensityMatrixField density_matrix(std::span<const Observable> family,
                                  std::size_t grid_size, int max_order);

struct WitnessFailure {
  std::string condition;  // "cond1" or "cond2"
  std::size_t i = 0, j = 0;
  char eta = '1';  // '1', 'i' or '-'
  double theta = 0.0;
  double value = 0.0;
};

struct PairDeviation {
  std::size_t i = 0, j = 0;
  char eta = '1';
  double deviation = 0.0;  // worst multiplicative deviation of the pair density from 2
};

/// Finite quantitative multiplicity certificate. certified_bound equals the
/// family size when the flatness conditions hold and lambda_min exceeds the
/// threshold on at least coverage_goal of the grid, else 0.
struct MultiplicityCertificate {
  std::size_t family_size = 0;
  double epsilon = 0.0;
  double tau = 0.0;
  double threshold = 0.0;
  double coverage_goal = 0.0;
  double coverage = 0.0;
  std::size_t certified_bound = 0;
  bool cond1_ok = false;
  bool cond2_ok = false;
  std::vector<double> flatness;  // per-function worst deviation of the diagonal from 1
  std::vector<PairDeviation> pair_deviations;
  std::vector<double> lambda_min_profile;
  std::vector<WitnessFailure> failures;  // first few failing witnesses
};

/// Checks (i) every diagonal density eps-close to 1 off (-tau, tau); (ii)
/// every polarized pair density d_ii + d_jj + 2 Re(conj(eta) d_ij) eps-close
/// to 2 off (-tau, tau) for eta in {1, i} (optionally also eta = -1); (iii)
/// lambda_min(Sigma(theta)) > threshold on at least coverage_goal of the
/// grid. A Gram field uniformly close to the identity has full rank, so the
/// certificate grants multiplicity >= family size.
MultiplicityCertificate multiplicity_witness(std::span<const Observable> family,
                                             double eps, double tau,
                                             std::size_t grid_size, int max_order,
                                             double coverage_goal = 0.9,
                                             double threshold = 0.5,
                                             bool include_real_eta = false);

struct FlatnessReport {
  bool holds = false;
  double max_ratio_deviation = 0.0;
};

/// Whether the Fejer density of sigma(f) is eps-strongly close to the
/// constant 1 off (-tau, tau).
FlatnessReport flatness_report(const Observable& f, double eps, double tau,
                               std::size_t grid_size, int max_order);

}  // namespace lebspec
