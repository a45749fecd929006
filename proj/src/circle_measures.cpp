#include "lebspec/circle_measures.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lebspec/sum.hpp"

namespace lebspec {

double wrap_angle(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0) t += kTwoPi;
  return t;
}

double angular_distance(double theta) {
  const double t = wrap_angle(theta);
  return std::min(t, kTwoPi - t);
}

namespace {

bool is_power_of_two(std::size_t x) { return x != 0 && (x & (x - 1)) == 0; }

void check_grid_size(std::size_t G) {
  if (!is_power_of_two(G) || G < 256) {
    throw InvalidArgument("density grid size must be a power of two >= 256, got " +
                          std::to_string(G));
  }
}

}  // namespace

DensityGrid::DensityGrid(std::vector<double> v) : values(std::move(v)) {
  check_grid_size(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!(values[k] >= 0.0)) {
      throw InvalidArgument("density value at grid index " + std::to_string(k) +
                            " is negative or NaN");
    }
  }
}

DensityGrid DensityGrid::constant(std::size_t G, double value) {
  return DensityGrid(std::vector<double>(G, value));
}

double DensityGrid::theta(std::size_t k) const {
  return kTwoPi * static_cast<double>(k) / static_cast<double>(values.size());
}

double DensityGrid::mass() const {
  Accum acc;
  for (double v : values) acc.add(v);
  return acc.value() / static_cast<double>(values.size());
}

DensityGrid& DensityGrid::operator+=(double c) {
  for (double& v : values) {
    v += c;
    if (!(v >= 0.0)) throw InvalidArgument("density shift produced a negative value");
  }
  return *this;
}

GoodSpec::GoodSpec(double alpha_, double tau_) : alpha(alpha_), tau(tau_) {
  if (!(alpha > 0.0)) throw InvalidArgument("goodness requires alpha > 0");
  if (!(tau > 0.0 && tau < kPi)) throw InvalidArgument("goodness requires tau in (0, pi)");
}

CircleMeasure::CircleMeasure(int max_order, std::vector<std::complex<double>> coeffs)
    : max_order_(max_order), coeffs_(std::move(coeffs)) {
  if (max_order_ < 1) throw InvalidArgument("max_order must be >= 1");
  if (coeffs_.size() != static_cast<std::size_t>(2 * max_order_ + 1)) {
    throw InvalidArgument("coefficient array must have length 2*max_order+1");
  }
  // Enforce Hermitian symmetry exactly: keep p >= 0, mirror the rest.
  const std::size_t c = static_cast<std::size_t>(max_order_);
  coeffs_[c] = std::complex<double>(coeffs_[c].real(), 0.0);
  const double bound = coeffs_[c].real() + 1e-9 * std::max(1.0, std::abs(coeffs_[c].real()));
  for (int p = 1; p <= max_order_; ++p) {
    const std::size_t hi = c + static_cast<std::size_t>(p);
    if (std::abs(coeffs_[hi]) > bound) {
      throw InvalidArgument("coefficient at p=" + std::to_string(p) +
                            " exceeds the mass (measure not positive)");
    }
    coeffs_[c - static_cast<std::size_t>(p)] = std::conj(coeffs_[hi]);
  }
}

CircleMeasure CircleMeasure::from_atoms(std::span<const Atom> atoms, int max_order) {
  if (max_order < 1) throw InvalidArgument("max_order must be >= 1");
  for (const Atom& a : atoms) {
    if (!(a.weight >= 0.0)) throw InvalidArgument("atom weights must be >= 0");
  }
  std::vector<std::complex<double>> coeffs(static_cast<std::size_t>(2 * max_order + 1));
  const std::size_t c = static_cast<std::size_t>(max_order);
  for (int p = 0; p <= max_order; ++p) {
    ComplexAccum acc;
    for (const Atom& a : atoms) {
      acc.add(a.weight * std::polar(1.0, -static_cast<double>(p) * a.angle));
    }
    coeffs[c + static_cast<std::size_t>(p)] = acc.value();
  }
  CircleMeasure m(max_order, std::move(coeffs));
  std::vector<Atom> owned(atoms.begin(), atoms.end());
  for (Atom& a : owned) a.angle = wrap_angle(a.angle);
  m.attach_atoms(std::move(owned));
  return m;
}

CircleMeasure CircleMeasure::dirac(double angle, double weight, int max_order) {
  const Atom a{wrap_angle(angle), weight};
  return from_atoms(std::span<const Atom>(&a, 1), max_order);
}

CircleMeasure CircleMeasure::lebesgue(double mass, int max_order) {
  if (!(mass >= 0.0)) throw InvalidArgument("mass must be >= 0");
  std::vector<std::complex<double>> coeffs(static_cast<std::size_t>(2 * max_order + 1));
  coeffs[static_cast<std::size_t>(max_order)] = mass;
  return CircleMeasure(max_order, std::move(coeffs));
}

std::complex<double> CircleMeasure::coeff(int p) const {
  if (p < -max_order_ || p > max_order_) {
    throw InvalidArgument("coefficient index out of range");
  }
  return coeffs_[static_cast<std::size_t>(p + max_order_)];
}

const std::vector<CircleMeasure::Atom>* CircleMeasure::atom_support() const {
  return atoms_ ? &*atoms_ : nullptr;
}

const DensityGrid* CircleMeasure::density_support() const {
  return density_ ? &*density_ : nullptr;
}

void CircleMeasure::attach_atoms(std::vector<Atom> atoms) {
  atoms_ = std::move(atoms);
  density_.reset();
}

void CircleMeasure::attach_density(DensityGrid grid) {
  density_ = std::move(grid);
  atoms_.reset();
}

CircleMeasure CircleMeasure::truncated(int order) const {
  if (order < 1 || order > max_order_) {
    throw InvalidArgument("truncation order out of range");
  }
  std::vector<std::complex<double>> coeffs(static_cast<std::size_t>(2 * order + 1));
  for (int p = -order; p <= order; ++p) {
    coeffs[static_cast<std::size_t>(p + order)] = coeff(p);
  }
  return CircleMeasure(order, std::move(coeffs));
}

bool CircleMeasure::toeplitz_psd(double tol) const {
  const int n = max_order_ + 1;
  Eigen::MatrixXcd M(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      M(i, j) = coeff(i - j);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(M, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff() >= -tol;
}

CircleMeasure& CircleMeasure::operator+=(const CircleMeasure& other) {
  if (other.max_order_ != max_order_) {
    throw InvalidArgument("measure addition requires equal max_order");
  }
  for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] += other.coeffs_[k];
  atoms_.reset();
  density_.reset();
  return *this;
}

CircleMeasure& CircleMeasure::operator*=(double scale) {
  if (!(scale >= 0.0)) throw InvalidArgument("measure scale must be >= 0");
  for (auto& z : coeffs_) z *= scale;
  if (atoms_) {
    for (Atom& a : *atoms_) a.weight *= scale;
  }
  if (density_) {
    for (double& v : density_->values) v *= scale;
  }
  return *this;
}

CircleMeasure from_density(const DensityGrid& d, int max_order) {
  const std::size_t G = d.size();
  if (G < static_cast<std::size_t>(4 * max_order)) {
    throw InvalidArgument("grid too coarse: need G >= 4*max_order, got G=" +
                          std::to_string(G) + " for order " + std::to_string(max_order));
  }
  std::vector<std::complex<double>> coeffs(static_cast<std::size_t>(2 * max_order + 1));
  const std::size_t c = static_cast<std::size_t>(max_order);
  for (int p = 0; p <= max_order; ++p) {
    ComplexAccum acc;
    for (std::size_t k = 0; k < G; ++k) {
      acc.add(d.values[k] * std::polar(1.0, -static_cast<double>(p) * d.theta(k)));
    }
    coeffs[c + static_cast<std::size_t>(p)] = acc.value() / static_cast<double>(G);
  }
  CircleMeasure m(max_order, std::move(coeffs));
  m.attach_density(d);
  return m;
}

DensityGrid to_density(const CircleMeasure& m, std::size_t G, int order) {
  if (order < 0 || order > m.max_order()) {
    throw InvalidArgument("Fejer order exceeds max_order");
  }
  check_grid_size(G);
  if (G < static_cast<std::size_t>(4 * order)) {
    throw InvalidArgument("grid too coarse for Fejer evaluation: need G >= 4*order");
  }
  // Fejer mean: sum over |p| <= order of (1 - |p|/(order+1)) coeff(p) e^{ip theta}.
  std::vector<double> values(G);
  const double neg_tol = 1e-9 * std::max(1.0, std::abs(m.mass()));
  for (std::size_t k = 0; k < G; ++k) {
    const double theta = kTwoPi * static_cast<double>(k) / static_cast<double>(G);
    Accum acc;
    acc.add(m.mass());
    for (int p = 1; p <= order; ++p) {
      const double w = 1.0 - static_cast<double>(p) / static_cast<double>(order + 1);
      const std::complex<double> term =
          m.coeff(p) * std::polar(1.0, static_cast<double>(p) * theta);
      acc.add(2.0 * w * term.real());
    }
    double v = acc.value();
    if (v < 0.0) {
      if (v < -neg_tol) {
        throw InvalidArgument("Fejer density negative beyond tolerance (measure not positive): " +
                              std::to_string(v));
      }
      v = 0.0;
    }
    values[k] = v;
  }
  return DensityGrid(std::move(values));
}

double weak_distance(const CircleMeasure& a, const CircleMeasure& b) {
  if (a.max_order() != b.max_order()) {
    throw InvalidArgument("weak_distance requires equal max_order (got " +
                          std::to_string(a.max_order()) + " and " +
                          std::to_string(b.max_order()) + ")");
  }
  Accum acc;
  for (int p = -a.max_order(); p <= a.max_order(); ++p) {
    acc.add(std::ldexp(std::abs(a.coeff(p) - b.coeff(p)), -std::abs(p)));
  }
  return acc.value();
}

namespace {

std::complex<double> z_delta(double delta, double tau) {
  return (1.0 - delta) * std::polar(1.0, -tau) + delta * std::polar(1.0, -2.0 * tau);
}

CircleMeasure spread_from_atoms(const std::vector<CircleMeasure::Atom>& atoms,
                                double mass, double delta, int P) {
  std::vector<std::complex<double>> z(atoms.size());
  std::vector<std::complex<double>> zp(atoms.size(), 1.0);
  for (std::size_t i = 0; i < atoms.size(); ++i) z[i] = z_delta(delta, atoms[i].angle);
  std::vector<std::complex<double>> coeffs(static_cast<std::size_t>(2 * P + 1));
  coeffs[static_cast<std::size_t>(P)] = mass;
  for (int p = 1; p <= P; ++p) {
    ComplexAccum acc;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      zp[i] *= z[i];
      acc.add(atoms[i].weight * zp[i]);
    }
    coeffs[static_cast<std::size_t>(P + p)] = acc.value();
  }
  return CircleMeasure(P, std::move(coeffs));
}

CircleMeasure spread_from_density(const DensityGrid& d, double mass, double delta, int P) {
  const std::size_t G = d.size();
  if (G < static_cast<std::size_t>(8 * P)) {
    throw InvalidArgument("grid too coarse for spread quadrature: need G >= 8*max_order");
  }
  std::vector<std::complex<double>> z(G);
  std::vector<std::complex<double>> zp(G, 1.0);
  for (std::size_t k = 0; k < G; ++k) z[k] = z_delta(delta, d.theta(k));
  std::vector<std::complex<double>> coeffs(static_cast<std::size_t>(2 * P + 1));
  coeffs[static_cast<std::size_t>(P)] = mass;
  for (int p = 1; p <= P; ++p) {
    ComplexAccum acc;
    for (std::size_t k = 0; k < G; ++k) {
      zp[k] *= z[k];
      acc.add(d.values[k] * zp[k]);
    }
    coeffs[static_cast<std::size_t>(P + p)] = acc.value() / static_cast<double>(G);
  }
  return CircleMeasure(P, std::move(coeffs));
}

// Binomial contraction: z_delta^p = sum_k C(p,k)(1-delta)^{p-k} delta^k e^{-i(p+k)tau},
// so coeff_delta(p) = sum_k C(p,k)(1-delta)^{p-k} delta^k coeff(p+k). Exact whenever
// the input coefficients are exact up to order 2p.
CircleMeasure spread_from_coeffs(const CircleMeasure& m, double delta, int P) {
  std::vector<std::complex<double>> coeffs(static_cast<std::size_t>(2 * P + 1));
  coeffs[static_cast<std::size_t>(P)] = m.mass();
  for (int p = 1; p <= P; ++p) {
    // w_k = C(p,k)(1-delta)^{p-k} delta^k, built by the stable ratio recurrence.
    double w = 1.0;
    for (int i = 0; i < p; ++i) w *= (1.0 - delta);
    ComplexAccum acc;
    for (int k = 0; k <= p; ++k) {
      if (w != 0.0) acc.add(w * m.coeff(p + k));
      if (k < p && delta > 0.0) {
        w *= static_cast<double>(p - k) / static_cast<double>(k + 1) * delta / (1.0 - delta);
      } else if (k < p) {
        w = 0.0;
      }
    }
    coeffs[static_cast<std::size_t>(P + p)] = acc.value();
  }
  return CircleMeasure(P, std::move(coeffs));
}

}  // namespace

CircleMeasure spread_out(const CircleMeasure& m, double delta, int max_order) {
  if (!(delta >= 0.0 && delta <= 0.5)) {
    throw InvalidArgument("spread_out requires delta in [0, 1/2], got " +
                          std::to_string(delta));
  }
  if (max_order < 1) throw InvalidArgument("max_order must be >= 1");
  if (const auto* atoms = m.atom_support()) {
    return spread_from_atoms(*atoms, m.mass(), delta, max_order);
  }
  if (const auto* grid = m.density_support()) {
    return spread_from_density(*grid, m.mass(), delta, max_order);
  }
  if (m.max_order() >= 2 * max_order) {
    return spread_from_coeffs(m, delta, max_order);
  }
  if (delta == 0.0 && m.max_order() >= max_order) {
    return m.truncated(max_order);  // z_0(tau) = e^{-i tau} reproduces the coefficients
  }
  throw InvalidArgument(
      "spread_out needs an atom/density support or coefficients up to 2*max_order");
}

bool is_good(const DensityGrid& d, const GoodSpec& spec) {
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (d.values[k] < 0.0) return false;
    if (angular_distance(d.theta(k)) > spec.tau && !(d.values[k] > spec.alpha)) {
      return false;
    }
  }
  return true;
}

double strong_deviation(const DensityGrid& a, const DensityGrid& b, double tau) {
  if (a.size() != b.size()) {
    throw InvalidArgument("strong closeness requires equal grid sizes");
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (angular_distance(a.theta(k)) < tau) continue;
    const double x = a.values[k];
    const double y = b.values[k];
    if (x == 0.0 && y == 0.0) continue;
    if (x <= 0.0 || y <= 0.0) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, std::max(x / y, y / x) - 1.0);
  }
  return worst;
}

bool strong_close(const DensityGrid& good_ref, const DensityGrid& other,
                  double eps, double tau) {
  if (!(eps > 0.0)) throw InvalidArgument("strong closeness requires eps > 0");
  // Boundary cases (deviation == eps) are inside the closed condition; the
  // 1e-12 slack keeps them from flipping on rounding of eps itself.
  return strong_deviation(good_ref, other, tau) <= eps + 1e-12;
}

void validate_schedule(std::span<const ScheduleRow> schedule) {
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const ScheduleRow& r = schedule[i];
    if (!(r.alpha > 0.0)) {
      throw InvalidArgument("schedule violated at index n=" + std::to_string(r.n) +
                            ": alpha must be > 0");
    }
    const double bound = std::min(std::ldexp(1.0, -r.n), r.alpha / 2.0);
    if (!(r.eps < bound)) {
      throw InvalidArgument("schedule violated at index n=" + std::to_string(r.n) +
                            ": eps must be < min(2^-n, alpha/2) = " + std::to_string(bound));
    }
    if (!(r.tau > 0.0 && r.tau < kPi)) {
      throw InvalidArgument("schedule violated at index n=" + std::to_string(r.n) +
                            ": tau must lie in (0, pi)");
    }
    if (i > 0) {
      if (!(r.tau < schedule[i - 1].tau)) {
        throw InvalidArgument("schedule violated at index n=" + std::to_string(r.n) +
                              ": tau must decrease strictly");
      }
      if (r.rho > schedule[i - 1].rho) {
        throw InvalidArgument("schedule violated at index n=" + std::to_string(r.n) +
                              ": rho must be nonincreasing");
      }
    }
    if (!(r.rho > 0.0)) {
      throw InvalidArgument("schedule violated at index n=" + std::to_string(r.n) +
                            ": rho must be > 0");
    }
  }
}

ConvergenceReport check_convergence(std::span<const DensityGrid> phis,
                                    std::span<const CircleMeasure> sigmas,
                                    std::span<const ScheduleRow> schedule) {
  if (phis.size() != sigmas.size() || phis.size() != schedule.size() || phis.empty()) {
    throw InvalidArgument("check_convergence requires matching nonempty sequences");
  }
  validate_schedule(schedule);
  ConvergenceReport report;
  report.all_pass = true;
  for (std::size_t i = 0; i < phis.size(); ++i) {
    ConvergenceStepCheck check;
    check.n = schedule[i].n;
    check.good = is_good(phis[i], GoodSpec(schedule[i].alpha, schedule[i].tau));
    const CircleMeasure lifted = from_density(phis[i], sigmas[i].max_order());
    check.weak = weak_distance(sigmas[i], lifted);
    check.weak_ok = check.weak < schedule[i].rho;
    if (i + 1 < phis.size()) {
      check.has_strong = true;
      check.strong_dev = strong_deviation(phis[i], phis[i + 1], schedule[i].tau);
      check.strong = check.strong_dev <= schedule[i].eps;
      for (std::size_t j = 0; j < schedule.size(); ++j) {
        double gap = 0.0;
        for (std::size_t k = 0; k < phis[i].size(); ++k) {
          if (angular_distance(phis[i].theta(k)) < schedule[j].tau) continue;
          gap = std::max(gap, std::abs(phis[i + 1].values[k] - phis[i].values[k]));
        }
        check.cauchy_gaps.push_back(gap);
      }
    }
    report.all_pass = report.all_pass && check.good && check.weak_ok &&
                      (!check.has_strong || check.strong);
    report.steps.push_back(std::move(check));
  }
  return report;
}

}  // namespace lebspec
