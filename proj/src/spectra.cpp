#include "lebspec/spectra.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "lebspec/parallel.hpp"
#include "lebspec/sum.hpp"

namespace lebspec {

DensityMatrixField::DensityMatrixField(std::size_t grid_size, int max_order,
                                       std::size_t family_size)
    : grid_(grid_size),
      max_order_(max_order),
      m_(family_size),
      data_(grid_size * family_size * family_size) {}

double DensityMatrixField::theta(std::size_t k) const {
  return kTwoPi * static_cast<double>(k) / static_cast<double>(grid_);
}

std::complex<double> DensityMatrixField::at(std::size_t k, std::size_t i,
                                            std::size_t j) const {
  return data_[(k * m_ + i) * m_ + j];
}

std::complex<double>& DensityMatrixField::slot(std::size_t k, std::size_t i,
                                               std::size_t j) {
  return data_[(k * m_ + i) * m_ + j];
}

double DensityMatrixField::lambda_min(std::size_t k) const {
  Eigen::MatrixXcd M(m_, m_);
  for (std::size_t i = 0; i < m_; ++i) {
    for (std::size_t j = 0; j < m_; ++j) {
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = at(k, i, j);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(M, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

DensityMatrixField density_matrix(std::span<const Observable> family,
                                  std::size_t grid_size, int max_order) {
  if (family.empty()) throw InvalidArgument("density_matrix requires a nonempty family");
  if (grid_size < static_cast<std::size_t>(4 * max_order)) {
    throw InvalidArgument("grid too coarse: need G >= 4*max_order");
  }
  const FamilyCrossTables tables = family_cross_tables(family, max_order);
  const std::size_t m = family.size();
  DensityMatrixField field(grid_size, max_order, m);

  // Entry (i,j) at theta: Fejer sum over lags of c_ij(p) e^{ip theta};
  // computed for i <= j and mirrored, so the matrix is Hermitian exactly.
  for_chunks(grid_size, 64, configured_threads(),
             [&](std::size_t, std::size_t kb, std::size_t ke) {
               for (std::size_t k = kb; k < ke; ++k) {
                 const double theta = field.theta(k);
                 for (std::size_t i = 0; i < m; ++i) {
                   for (std::size_t j = i; j < m; ++j) {
                     ComplexAccum acc;
                     acc.add(tables.at(i, j, 0));
                     for (int p = 1; p <= max_order; ++p) {
                       const double w =
                           1.0 - static_cast<double>(p) / static_cast<double>(max_order + 1);
                       const std::complex<double> phase =
                           std::polar(1.0, static_cast<double>(p) * theta);
                       acc.add(w * tables.at(i, j, p) * phase);
                       acc.add(w * tables.at(i, j, -p) * std::conj(phase));
                     }
                     std::complex<double> v = acc.value();
                     if (i == j) v = std::complex<double>(v.real(), 0.0);
                     field.slot(k, i, j) = v;
                     if (i != j) field.slot(k, j, i) = std::conj(v);
                   }
                 }
               }
             });
  for (std::size_t k = 0; k < grid_size; ++k) {
    for (std::size_t i = 0; i < m; ++i) {
      if (field.diagonal(k, i) < -1e-9) {
        throw ConsistencyError("cross-spectral diagonal density negative beyond tolerance");
      }
    }
  }
  return field;
}

namespace {

// Multiplicative deviation of value from target (>0), +inf when value <= 0.
double ratio_deviation(double value, double target) {
  if (value <= 0.0) return std::numeric_limits<double>::infinity();
  return std::max(value / target, target / value) - 1.0;
}

}  // namespace

MultiplicityCertificate multiplicity_witness(std::span<const Observable> family,
                                             double eps, double tau,
                                             std::size_t grid_size, int max_order,
                                             double coverage_goal, double threshold,
                                             bool include_real_eta) {
  if (!(eps > 0.0 && eps < 0.5)) {
    throw InvalidArgument("multiplicity_witness requires eps in (0, 1/2)");
  }
  const DensityMatrixField field = density_matrix(family, grid_size, max_order);
  const std::size_t m = family.size();
  const std::size_t G = field.grid_size();

  MultiplicityCertificate cert;
  cert.family_size = m;
  cert.epsilon = eps;
  cert.tau = tau;
  cert.threshold = threshold;
  cert.coverage_goal = coverage_goal;
  cert.flatness.assign(m, 0.0);
  cert.cond1_ok = true;
  cert.cond2_ok = true;
  constexpr std::size_t kMaxWitnesses = 16;

  for (std::size_t k = 0; k < G; ++k) {
    if (angular_distance(field.theta(k)) < tau) continue;
    for (std::size_t i = 0; i < m; ++i) {
      const double dev = ratio_deviation(field.diagonal(k, i), 1.0);
      cert.flatness[i] = std::max(cert.flatness[i], dev);
      if (dev > eps) {
        cert.cond1_ok = false;
        if (cert.failures.size() < kMaxWitnesses) {
          cert.failures.push_back(
              {"cond1", i, i, '1', field.theta(k), field.diagonal(k, i)});
        }
      }
    }
    std::vector<std::pair<char, std::complex<double>>> etas = {
        {'1', {1.0, 0.0}}, {'i', {0.0, 1.0}}};
    if (include_real_eta) etas.push_back({'-', {-1.0, 0.0}});
    std::size_t pair_slot = 0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        for (const auto& [tag, eta] : etas) {
          if (pair_slot >= cert.pair_deviations.size()) {
            cert.pair_deviations.push_back({i, j, tag, 0.0});
          }
          // Density of sigma(f_i + eta f_j) from the matrix field.
          const double value = field.diagonal(k, i) + field.diagonal(k, j) +
                               2.0 * (std::conj(eta) * field.at(k, i, j)).real();
          const double dev = ratio_deviation(value, 2.0);
          cert.pair_deviations[pair_slot].deviation =
              std::max(cert.pair_deviations[pair_slot].deviation, dev);
          ++pair_slot;
          if (dev > eps) {
            cert.cond2_ok = false;
            if (cert.failures.size() < kMaxWitnesses) {
              cert.failures.push_back({"cond2", i, j, tag, field.theta(k), value});
            }
          }
        }
      }
    }
  }

  cert.lambda_min_profile.resize(G);
  for_chunks(G, 64, configured_threads(),
             [&](std::size_t, std::size_t kb, std::size_t ke) {
               for (std::size_t k = kb; k < ke; ++k) {
                 cert.lambda_min_profile[k] = field.lambda_min(k);
               }
             });
  std::size_t covered = 0;
  for (double lm : cert.lambda_min_profile) {
    if (lm > threshold) ++covered;
  }
  cert.coverage = static_cast<double>(covered) / static_cast<double>(G);
  const bool pass = cert.cond1_ok && cert.cond2_ok && cert.coverage >= coverage_goal;
  cert.certified_bound = pass ? m : 0;
  return cert;
}

FlatnessReport flatness_report(const Observable& f, double eps, double tau,
                               std::size_t grid_size, int max_order) {
  const DensityGrid density = to_density(spectral_measure(f, max_order), grid_size, max_order);
  const DensityGrid one = DensityGrid::constant(grid_size, 1.0);
  FlatnessReport report;
  report.max_ratio_deviation = strong_deviation(one, density, tau);
  report.holds = report.max_ratio_deviation <= eps;
  return report;
}

}  // namespace lebspec
