#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "lebspec/systems.hpp"

using namespace lebspec;
using Complex = std::complex<double>;

namespace {

Observable two_atom_swap_pm() {
  return pm_observable(build_cyclic(2), {1, 0});
}

Observable random_observable(SystemPtr sys, Rng& rng, std::uint32_t classes) {
  std::vector<std::uint32_t> labels(sys->size());
  for (auto& l : labels) l = static_cast<std::uint32_t>(rng.below(classes));
  Partition part(std::move(labels));
  std::vector<Complex> class_values(part.class_count);
  for (auto& v : class_values) v = Complex(rng.uniform() * 2 - 1, rng.uniform() * 2 - 1);
  std::vector<Complex> values(sys->size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = class_values[part.labels[i]];
  return make_centered(std::move(sys), std::move(values), std::move(part)).first;
}

Observable compose_with_dynamics(const Observable& f) {
  std::vector<Complex> values(f.size());
  std::vector<std::uint32_t> labels(f.size());
  for (std::size_t x = 0; x < values.size(); ++x) {
    values[x] = f.values()[f.system()->perm[x]];
    labels[x] = f.partition().labels[f.system()->perm[x]];
  }
  return Observable(f.system(), std::move(values), Partition(std::move(labels)));
}

}  // namespace

TEST_CASE("build_cyclic and cycles") {
  CHECK(build_cyclic(1)->perm == std::vector<std::uint32_t>{0});
  CHECK(build_cyclic(4)->perm == std::vector<std::uint32_t>{1, 2, 3, 0});
  const auto cycles = build_cyclic(5)->cycles();
  REQUIRE(cycles.size() == 1);
  CHECK(cycles[0].size() == 5);
  CHECK_THROWS_AS(make_system({0, 0}), InvalidArgument);
  CHECK_THROWS_AS(make_system({1, 2}), InvalidArgument);
}

TEST_CASE("product systems") {
  SUBCASE("coprime cycles give one long cycle") {
    const auto p = product(build_cyclic(2), build_cyclic(3));
    REQUIRE(p->size() == 6);
    const auto cycles = p->cycles();
    REQUIRE(cycles.size() == 1);
    CHECK(cycles[0].size() == 6);
  }
  SUBCASE("identity factor reproduces the other system") {
    const auto s = build_cyclic(5);
    const auto p = product(build_cyclic(1), s);
    CHECK(p->perm == s->perm);
  }
  SUBCASE("equal cycles split") {
    const auto p = product(build_cyclic(2), build_cyclic(2));
    const auto cycles = p->cycles();
    REQUIRE(cycles.size() == 2);
    CHECK(cycles[0].size() == 2);
    CHECK(cycles[1].size() == 2);
  }
  SUBCASE("size cap") {
    CHECK_THROWS_AS(product(build_cyclic(1 << 13), build_cyclic(1 << 13)), InvalidArgument);
  }
}

TEST_CASE("partitions and observables") {
  SUBCASE("canonical labels in first-occurrence order") {
    const Partition p({7, 3, 7, 9});
    CHECK(p.labels == std::vector<std::uint32_t>{0, 1, 0, 2});
    CHECK(p.class_count == 3);
  }
  SUBCASE("joint refinement") {
    const Partition a({0, 0, 1, 1});
    const Partition b({0, 1, 0, 1});
    const Partition j = joint_refinement(a, b);
    CHECK(j.class_count == 4);
  }
  SUBCASE("zero-mean invariant enforced") {
    auto sys = build_cyclic(4);
    CHECK_THROWS_AS(Observable(sys, {1.0, 1.0, 1.0, 1.0}, Partition({0, 0, 0, 0})),
                    InvalidArgument);
  }
  SUBCASE("constancy on classes enforced") {
    auto sys = build_cyclic(2);
    CHECK_THROWS_AS(Observable(sys, {1.0, -1.0}, Partition({0, 0})), InvalidArgument);
  }
  SUBCASE("pm_observable recenters and keeps two classes") {
    const Observable f = pm_observable(build_cyclic(8), {1, 1, 1, 0, 0, 0, 0, 0});
    double mean = 0.0;
    for (const auto& v : f.values()) mean += v.real();
    CHECK(std::abs(mean) < 1e-12);
    CHECK(f.partition().class_count == 2);
  }
}

TEST_CASE("bernoulli_approx") {
  SUBCASE("sizes") {
    const auto [sys, part] = bernoulli_approx(1, 42);
    CHECK(sys->size() == 2);
    CHECK(part.labels.size() == 2);
  }
  SUBCASE("autocorrelation of the labeling at lags 1..64") {
    const auto [sys, part] = bernoulli_approx(16, 7);
    const std::size_t n = sys->size();
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = part.labels[i] ? 1.0 : -1.0;
    const double bound = 4.0 / std::sqrt(double(n));
    for (int lag = 1; lag <= 64; ++lag) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[(i + std::size_t(lag)) % n];
      CHECK(std::abs(acc / double(n)) <= bound);
    }
  }
  SUBCASE("cross-correlation between two seeds at lag 0") {
    const auto [sys1, part1] = bernoulli_approx(16, 7);
    const auto [sys2, part2] = bernoulli_approx(16, 8);
    const std::size_t n = sys1->size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += (part1.labels[i] ? 1.0 : -1.0) * (part2.labels[i] ? 1.0 : -1.0);
    }
    CHECK(std::abs(acc / double(n)) <= 4.0 / std::sqrt(double(n)));
  }
}

TEST_CASE("correlation") {
  SUBCASE("n = 0 gives the squared norm") {
    Rng rng(derive_seed(3, streams::kTestData));
    const Observable f = random_observable(build_cyclic(100), rng, 5);
    const Complex c = correlation(f, f, 0);
    CHECK(c.imag() == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(c.real() == doctest::Approx(f.norm_squared()).epsilon(1e-14));
    CHECK(c.real() >= 0.0);
  }
  SUBCASE("two-atom swap alternates sign") {
    const Observable f = two_atom_swap_pm();
    for (long n = 0; n <= 6; ++n) {
      CHECK(correlation(f, f, n).real() == doctest::Approx(n % 2 ? -1.0 : 1.0));
    }
  }
  SUBCASE("cycle characters are Koopman eigenfunctions") {
    // f(i) = e^{2 pi i k i / N} on an N-cycle: <U^n f, f> = e^{2 pi i k n / N}.
    const std::size_t N = 12;
    const int k = 5;
    auto sys = build_cyclic(N);
    std::vector<Complex> values(N);
    std::vector<std::uint32_t> labels(N);
    for (std::size_t i = 0; i < N; ++i) {
      values[i] = std::polar(1.0, kTwoPi * k * double(i) / double(N));
      labels[i] = static_cast<std::uint32_t>(i);
    }
    const Observable f =
        make_centered(sys, std::move(values), Partition(std::move(labels))).first;
    for (long n = 0; n <= 8; ++n) {
      const Complex expected = std::polar(1.0, kTwoPi * k * double(n) / double(N));
      CHECK(std::abs(correlation(f, f, n) - expected) < 1e-12);
    }
  }
  SUBCASE("conjugate symmetry and Koopman unitarity") {
    Rng rng(derive_seed(5, streams::kTestData));
    auto sys = build_cyclic(64);
    const Observable f = random_observable(sys, rng, 4);
    const Observable g = random_observable(sys, rng, 3);
    for (long n : {-5L, -1L, 0L, 3L, 7L}) {
      CHECK(std::abs(correlation(f, g, -n) - std::conj(correlation(g, f, n))) < 1e-14);
    }
    const Observable fT = compose_with_dynamics(f);
    const Observable gT = compose_with_dynamics(g);
    for (long n : {0L, 1L, 4L}) {
      CHECK(std::abs(correlation(fT, gT, n) - correlation(f, g, n)) < 1e-14);
    }
  }
  SUBCASE("mismatched systems rejected") {
    const Observable f = two_atom_swap_pm();
    const Observable g = two_atom_swap_pm();  // different instance
    CHECK_THROWS_AS(correlation(f, g, 1), InvalidArgument);
  }
}

TEST_CASE("spectral_measure") {
  SUBCASE("zero observable") {
    auto sys = build_cyclic(6);
    const Observable zero(sys, std::vector<Complex>(6, 0.0), Partition({0, 0, 0, 0, 0, 0}));
    const CircleMeasure m = spectral_measure(zero, 8);
    for (int p = -8; p <= 8; ++p) CHECK(std::abs(m.coeff(p)) == 0.0);
  }
  SUBCASE("two-atom swap gives the Dirac at pi") {
    const CircleMeasure m = spectral_measure(two_atom_swap_pm(), 16);
    const CircleMeasure dirac = CircleMeasure::dirac(kPi, 1.0, 16);
    for (int p = -16; p <= 16; ++p) CHECK(std::abs(m.coeff(p) - dirac.coeff(p)) < 1e-12);
    CHECK(m.toeplitz_psd());
  }
  SUBCASE("character k sits at angle 2 pi k / N") {
    const std::size_t N = 16;
    const int k = 3;
    const Observable f = character(build_cyclic(N), k);
    const CircleMeasure m = spectral_measure(f, 12);
    const CircleMeasure dirac = CircleMeasure::dirac(kTwoPi * k / double(N), 1.0, 12);
    for (int p = -12; p <= 12; ++p) CHECK(std::abs(m.coeff(p) - dirac.coeff(p)) < 1e-12);
  }
  SUBCASE("mass equals the mean squared modulus exactly") {
    Rng rng(derive_seed(9, streams::kTestData));
    for (int rep = 0; rep < 10; ++rep) {
      const Observable f = random_observable(build_cyclic(256), rng, 6);
      CHECK(spectral_measure(f, 4).mass() == f.norm_squared());
    }
  }
  SUBCASE("Toeplitz PSD certificate on random observables") {
    Rng rng(derive_seed(15, streams::kTestData));
    for (int rep = 0; rep < 5; ++rep) {
      const Observable f = random_observable(build_cyclic(128), rng, 5);
      CHECK(spectral_measure(f, 24).toeplitz_psd());
    }
  }
}

TEST_CASE("cross_spectral") {
  SUBCASE("g = f reproduces the spectral measure") {
    const Observable f = two_atom_swap_pm();
    const CrossSpectralTable t = cross_spectral(f, f, 8);
    const CircleMeasure m = spectral_measure(f, 8);
    for (int p = -8; p <= 8; ++p) CHECK(std::abs(t.direct_at(p) - m.coeff(p)) < 1e-12);
  }
  SUBCASE("independent factors have an exactly zero cross table") {
    const auto sys = product(build_cyclic(16), build_cyclic(15));
    std::vector<Complex> fa(sys->size()), fb(sys->size());
    std::vector<std::uint32_t> la(sys->size()), lb(sys->size());
    for (std::size_t i = 0; i < 16; ++i) {
      for (std::size_t j = 0; j < 15; ++j) {
        fa[i * 15 + j] = (i % 2) ? 1.0 : -1.0;
        la[i * 15 + j] = static_cast<std::uint32_t>(i % 2);
        fb[i * 15 + j] = std::polar(1.0, kTwoPi * double(j) / 15.0);
        lb[i * 15 + j] = static_cast<std::uint32_t>(j);
      }
    }
    const Observable f = make_centered(sys, std::move(fa), Partition(std::move(la))).first;
    const Observable g = make_centered(sys, std::move(fb), Partition(std::move(lb))).first;
    const CrossSpectralTable t = cross_spectral(f, g, 8);
    for (int p = -8; p <= 8; ++p) CHECK(std::abs(t.direct_at(p)) < 1e-13);
  }
  SUBCASE("swap with g = f o T alternates with opposite sign") {
    const Observable f = two_atom_swap_pm();
    const Observable g = compose_with_dynamics(f);
    const CrossSpectralTable t = cross_spectral(f, g, 8);
    for (int p = 0; p <= 8; ++p) {
      CHECK(t.direct_at(p).real() == doctest::Approx(p % 2 ? 1.0 : -1.0));
    }
  }
  SUBCASE("polarization agrees with the direct table on random pairs") {
    Rng rng(derive_seed(27, streams::kTestData));
    for (int rep = 0; rep < 10; ++rep) {
      const std::size_t n = 64 + rng.below(961);
      std::vector<std::uint32_t> perm(n);
      for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<std::uint32_t>(i);
      for (std::size_t i = n; i > 1; --i) {
        std::swap(perm[i - 1], perm[rng.below(i)]);
      }
      auto sys = make_system(std::move(perm));
      const Observable f = random_observable(sys, rng, 4 + std::uint32_t(rng.below(5)));
      const Observable g = random_observable(sys, rng, 4 + std::uint32_t(rng.below(5)));
      const CrossSpectralTable t = cross_spectral(f, g, 32);
      CHECK(t.max_disagreement <= 1e-10);
      for (int p = -32; p <= 32; ++p) {
        CHECK(std::abs(t.direct_at(p) - t.polarized_at(p)) <= 1e-10);
      }
    }
  }
}

TEST_CASE("meilijson_mc") {
  SUBCASE("delta = 0 is exact with zero variance") {
    Rng rng(derive_seed(33, streams::kTestData));
    const Observable f = random_observable(build_cyclic(512), rng, 4);
    for (int p : {1, 3, 7}) {
      const Complex mc = meilijson_mc(f, 0.0, p, 1000, 99);
      CHECK(std::abs(mc - correlation(f, f, p)) < 1e-12);
    }
  }
  SUBCASE("two-atom swap at delta = 1/2, p = 1 estimates z(pi) = 0") {
    const Observable f = two_atom_swap_pm();
    const std::size_t M = 100000;
    const Complex mc = meilijson_mc(f, 0.5, 1, M, 7);
    CHECK(std::abs(mc) <= 3.0 / std::sqrt(double(M)));
  }
  SUBCASE("p = 1 expectation is (1-delta) c(1) + delta c(2)") {
    Rng rng(derive_seed(37, streams::kTestData));
    const Observable f = random_observable(build_cyclic(200), rng, 5);
    const double delta = 0.25;
    const Complex exact =
        (1.0 - delta) * correlation(f, f, 1) + delta * correlation(f, f, 2);
    const std::size_t M = 200000;
    const Complex mc = meilijson_mc(f, delta, 1, M, 11);
    CHECK(std::abs(mc - exact) <= 3.0 * f.norm_squared() / std::sqrt(double(M)));
  }
  SUBCASE("oracle agreement with spread_out coefficients") {
    Rng rng(derive_seed(41, streams::kTestData));
    const Observable f = random_observable(build_cyclic(4096), rng, 3);
    const std::size_t M = 100000;
    const double bound = 3.0 * f.norm_squared() / std::sqrt(double(M));
    for (double delta : {0.1, 0.4}) {
      const CircleMeasure spread = spread_out(spectral_measure(f, 16), delta, 8);
      for (int p : {1, 4, 8}) {
        const Complex mc =
            meilijson_mc(f, delta, p, M, derive_seed(43, 0, std::uint64_t(p)));
        CHECK(std::abs(mc - spread.coeff(p)) <= bound);
      }
    }
  }
  SUBCASE("argument validation") {
    const Observable f = two_atom_swap_pm();
    CHECK_THROWS_AS(meilijson_mc(f, 0.7, 1, 10, 1), InvalidArgument);
    CHECK_THROWS_AS(meilijson_mc(f, 0.1, 0, 10, 1), InvalidArgument);
  }
}
