#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "lebspec/errors.hpp"

namespace lebspec {

inline constexpr double kTwoPi = 6.28318530717958647692528676655900577;
inline constexpr double kPi = 3.14159265358979323846264338327950288;

// Angle folded into [0, 2*pi).
double wrap_angle(double theta);
// Distance from theta to 0 on the circle, in [0, pi].
double angular_distance(double theta);

/// Nonnegative density sampled on the uniform grid theta_k = 2*pi*k/G.
/// Represents the measure phi(theta) dtheta/(2*pi); its mass is the grid
/// mean of the values. G must be a power of two >= 256.
struct DensityGrid {
  std::vector<double> values;

  explicit DensityGrid(std::vector<double> v);
  static DensityGrid constant(std::size_t G, double value);

  std::size_t size() const { return values.size(); }
  double theta(std::size_t k) const;
  double mass() const;

  DensityGrid& operator+=(double c);  // pointwise shift (target arithmetic)
};

/// Goodness parameters: the density must exceed alpha outside (-tau, tau).
struct GoodSpec {
  double alpha;
  double tau;
  GoodSpec(double alpha_, double tau_);
};

/// Positive measure on the circle held as truncated Fourier coefficients
///   coeff(p) = integral of e^{-ip tau} dsigma(tau),  |p| <= max_order,
/// Hermitian-symmetric by construction (coeff(-p) == conj(coeff(p))).
/// A measure may carry its support (atom list or density grid); spread_out
/// uses the support for quadrature when present.
class CircleMeasure {
 public:
  struct Atom {
    double angle;
    double weight;
  };

  CircleMeasure(int max_order, std::vector<std::complex<double>> coeffs);

  static CircleMeasure from_atoms(std::span<const Atom> atoms, int max_order);
  static CircleMeasure dirac(double angle, double weight, int max_order);
  static CircleMeasure lebesgue(double mass, int max_order);

  int max_order() const { return max_order_; }
  double mass() const { return coeffs_[static_cast<std::size_t>(max_order_)].real(); }
  std::complex<double> coeff(int p) const;
  /// All coefficients in order p = -max_order .. max_order.
  std::span<const std::complex<double>> coeffs() const { return coeffs_; }

  const std::vector<Atom>* atom_support() const;
  const DensityGrid* density_support() const;
  void attach_atoms(std::vector<Atom> atoms);
  void attach_density(DensityGrid grid);

  /// Coefficient-wise truncation to a smaller order (support dropped).
  CircleMeasure truncated(int order) const;

  /// Positivity certificate: the (P+1)x(P+1) Toeplitz matrix [coeff(i-j)]
  /// is PSD up to tol. Checked on demand, not on mutation.
  bool toeplitz_psd(double tol = 1e-9) const;

  CircleMeasure& operator+=(const CircleMeasure& other);
  CircleMeasure& operator*=(double scale);
  friend CircleMeasure operator+(CircleMeasure a, const CircleMeasure& b) {
    a += b;
    return a;
  }
  friend CircleMeasure operator*(CircleMeasure a, double s) {
    a *= s;
    return a;
  }

 private:
  int max_order_;
  std::vector<std::complex<double>> coeffs_;  // size 2*max_order_+1
  std::optional<std::vector<Atom>> atoms_;
  std::optional<DensityGrid> density_;
};

/// Quadrature of phi(theta) dtheta/(2*pi): coeff(p) = (1/G) sum phi_k e^{-ip theta_k}.
/// Requires G >= 4*max_order. The grid is attached as the support.
CircleMeasure from_density(const DensityGrid& d, int max_order);

/// Fejer mean of the given order evaluated on a G-point grid; nonnegative for
/// positive measures, grid mean equals the mass. Requires order <= max_order
/// and G >= 4*order.
DensityGrid to_density(const CircleMeasure& m, std::size_t G, int order);

/// Weak-topology metric: d(a,b) = sum over |p| <= P of 2^{-|p|} |a(p) - b(p)|.
/// Both measures must share the same max_order.
double weak_distance(const CircleMeasure& a, const CircleMeasure& b);

/// Spread-out measure: coeff_delta(p) = integral of z_delta(tau)^p dsigma,
/// z_delta(tau) = (1-delta) e^{-i tau} + delta e^{-2i tau}; mass preserved
/// exactly. delta in [0, 1/2]. Evaluation: exact summation over an attached
/// atom list; rectangle rule over an attached density (G >= 8*max_order);
/// otherwise the exact binomial contraction of the coefficients, which needs
/// input order >= 2*max_order.
CircleMeasure spread_out(const CircleMeasure& m, double delta, int max_order);

/// True iff all values are >= 0 and every grid point with angular distance
/// to 0 greater than tau has value > alpha.
bool is_good(const DensityGrid& d, const GoodSpec& spec);

/// Two-sided multiplicative bound off (-tau, tau):
///   good_ref/(1+eps) <= other <= (1+eps) good_ref at every grid point with
/// angular distance >= tau. Grids must have equal size.
bool strong_close(const DensityGrid& good_ref, const DensityGrid& other,
                  double eps, double tau);

/// Worst multiplicative deviation max(b/a, a/b) - 1 over grid points off
/// (-tau, tau); +inf if exactly one of the two vanishes somewhere there.
double strong_deviation(const DensityGrid& a, const DensityGrid& b, double tau);

struct ScheduleRow {
  int n;
  double alpha;
  double tau;
  double eps;
  double rho;
};

/// Throws InvalidArgument naming the first violated index unless every row
/// satisfies eps_n < min(2^-n, alpha_n/2), tau is strictly decreasing and
/// rho is nonincreasing.
void validate_schedule(std::span<const ScheduleRow> schedule);

struct ConvergenceStepCheck {
  int n = 0;
  bool good = false;
  bool has_strong = false;  // false on the last element of the sequence
  bool strong = false;
  double strong_dev = 0.0;   // measured deviation of phi_{n+1} vs phi_n off tau_n
  double weak = 0.0;         // d(sigma_n, phi_n dtheta)
  bool weak_ok = false;
  std::vector<double> cauchy_gaps;  // max |phi_{n+1}-phi_n| off each schedule tau
};

struct ConvergenceReport {
  std::vector<ConvergenceStepCheck> steps;
  bool all_pass = false;
};

/// Certifies the convergence-lemma hypotheses at the computed horizon:
/// goodness of each phi_n at (alpha_n, tau_n), eps_n-strong closeness of
/// consecutive densities off tau_n, weak closeness of sigma_n to phi_n dtheta
/// below rho_n, plus a Cauchy gap diagnostic.
ConvergenceReport check_convergence(std::span<const DensityGrid> phis,
                                    std::span<const CircleMeasure> sigmas,
                                    std::span<const ScheduleRow> schedule);

}  // namespace lebspec
