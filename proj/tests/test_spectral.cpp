#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "quasistab/grid.hpp"

using namespace quasistab;

namespace {

constexpr double kPi = std::numbers::pi;

SpectralField random_field(const PeriodicGrid& grid, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(grid.n());
  for (auto& x : v) x = dist(rng);
  return SpectralField(grid, std::move(v));
}

std::vector<double> sampled(const PeriodicGrid& grid,
                            const std::function<double(double)>& f) {
  std::vector<double> v(grid.n());
  for (int i = 0; i < grid.n(); ++i) v[i] = f(grid.x(i));
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("grid invariants and validation") {
  PeriodicGrid g(256);
  CHECK(g.n() == 256);
  CHECK(g.period() == doctest::Approx(2 * kPi).epsilon(1e-15));
  CHECK(g.spacing() * g.n() == doctest::Approx(g.period()).epsilon(1e-15));
  PeriodicGrid h(64, 3.0);
  CHECK(h.spacing() == doctest::Approx(3.0 / 64).epsilon(1e-15));

  CHECK_THROWS_AS(PeriodicGrid(6), ConfigError);    // too small
  CHECK_THROWS_AS(PeriodicGrid(9), ConfigError);    // odd
  CHECK_THROWS_AS(PeriodicGrid(16, 0.0), ConfigError);
  CHECK_THROWS_AS(PeriodicGrid(16, -1.0), ConfigError);
}

TEST_CASE("transform round-trip over 1000 random fields") {
  std::mt19937_64 rng(12345);
  const int sizes[] = {8, 16, 64, 256};
  for (int rep = 0; rep < 1000; ++rep) {
    PeriodicGrid grid(sizes[rep % 4]);
    SpectralField f = random_field(grid, rng);
    SpectralField back = SpectralField::from_coeffs(grid, f.coeffs());
    double scale = 0.0;
    for (double v : f.values()) scale = std::max(scale, std::abs(v));
    REQUIRE(max_abs_diff(f.values(), back.values()) <= 1e-12 * std::max(1.0, scale));
  }
}

TEST_CASE("conjugate symmetry convention") {
  PeriodicGrid grid(32);
  std::mt19937_64 rng(7);
  SpectralField f = random_field(grid, rng);
  for (int k = 1; k < grid.n() / 2; ++k) {
    CHECK(f.coeff(-k) == std::conj(f.coeff(k)));
  }
  // Nyquist coefficient of a real field is real.
  CHECK(std::abs(f.coeff(grid.n() / 2).imag()) <= 1e-14);
}

TEST_CASE("Parseval identity to 1e-10 relative") {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 200; ++rep) {
    PeriodicGrid grid(rep % 2 == 0 ? 64 : 256, rep % 3 == 0 ? 5.0 : 2 * kPi);
    SpectralField f = random_field(grid, rng);
    double lhs = 0.0;
    for (double v : f.values()) lhs += v * v * grid.spacing();
    double sum = 0.0;
    const auto& c = f.coeffs();
    sum += std::norm(c[0]);
    for (int k = 1; k < grid.n() / 2; ++k) sum += 2.0 * std::norm(c[k]);
    sum += std::norm(c[grid.n() / 2]);
    double rhs = grid.period() * sum;
    REQUIRE(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("integral_mean") {
  PeriodicGrid grid(128);
  CHECK(integral_mean(SpectralField(grid, std::vector<double>(128, 3.0))) ==
        doctest::Approx(3.0).epsilon(1e-14));
  SpectralField c1(grid, sampled(grid, [](double x) { return std::cos(x); }));
  CHECK(std::abs(integral_mean(c1)) <= 1e-14);
  SpectralField c5(grid, sampled(grid, [](double x) { return 2.0 + std::cos(5 * x); }));
  CHECK(integral_mean(c5) == doctest::Approx(2.0).epsilon(1e-14));
  // equals c_0 up to 1e-12
  CHECK(std::abs(integral_mean(c5) - c5.coeff(0).real()) <= 1e-12);
}

TEST_CASE("sobolev_norm closed-form values") {
  PeriodicGrid grid(64);
  SpectralField konst(grid, std::vector<double>(64, 5.0));
  CHECK(sobolev_norm(konst, 0.0) == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(sobolev_norm(konst, 2.5) == doctest::Approx(5.0).epsilon(1e-14));

  SpectralField cosx(grid, sampled(grid, [](double x) { return std::cos(x); }));
  CHECK(sobolev_norm(cosx, 0.0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-13));
  CHECK(sobolev_norm(cosx, 1.0) == doctest::Approx(1.0).epsilon(1e-13));

  CHECK_THROWS_AS(sobolev_norm(cosx, -3.0), ConfigError);
  CHECK_THROWS_AS(sobolev_norm(cosx, 4.5), ConfigError);
}

TEST_CASE("apply_multiplier examples") {
  PeriodicGrid grid(128);
  std::mt19937_64 rng(3);
  SpectralField u = random_field(grid, rng);

  MultiplierSymbol one([](int) { return 1.0; }, "identity");
  CHECK(max_abs_diff(apply_multiplier(u, one).values(), u.values()) <= 1e-13);

  // Roundoff in the forward transform leaves ~1e-17 ghosts on every mode;
  // the multiplier amplifies them by up to |m(n/2)|, so the comparison
  // tolerance has to carry that factor.
  MultiplierSymbol lap([](int k) { return -double(k) * k; }, "second derivative");
  SpectralField c3(grid, sampled(grid, [](double x) { return std::cos(3 * x); }));
  SpectralField want(grid, sampled(grid, [](double x) { return -9 * std::cos(3 * x); }));
  CHECK(max_abs_diff(apply_multiplier(c3, lap).values(), want.values()) <= 1e-10);

  MultiplierSymbol hs([](int k) { double a = std::abs(k); return a * (1 - a * a); });
  SpectralField c2(grid, sampled(grid, [](double x) { return std::cos(2 * x); }));
  SpectralField want2(grid, sampled(grid, [](double x) { return -6 * std::cos(2 * x); }));
  CHECK(max_abs_diff(apply_multiplier(c2, hs).values(), want2.values()) <= 1e-9);
}

TEST_CASE("apply_multiplier is linear") {
  PeriodicGrid grid(64);
  std::mt19937_64 rng(42);
  MultiplierSymbol sym([](int k) { return std::cos(0.3 * k) - 0.1 * k * k; });
  for (int rep = 0; rep < 50; ++rep) {
    SpectralField u = random_field(grid, rng);
    SpectralField v = random_field(grid, rng);
    double a = 0.7, b = -1.3;
    std::vector<double> combo(grid.n());
    for (int i = 0; i < grid.n(); ++i) combo[i] = a * u.values()[i] + b * v.values()[i];
    SpectralField lhs = apply_multiplier(SpectralField(grid, combo), sym);
    SpectralField au = apply_multiplier(u, sym);
    SpectralField bv = apply_multiplier(v, sym);
    std::vector<double> rhs(grid.n());
    for (int i = 0; i < grid.n(); ++i) rhs[i] = a * au.values()[i] + b * bv.values()[i];
    REQUIRE(max_abs_diff(lhs.values(), rhs) <= 1e-12);
  }
}

TEST_CASE("undefined symbol value raises a configuration error") {
  PeriodicGrid grid(32);
  SpectralField f(grid, sampled(grid, [](double x) { return std::sin(2 * x); }));
  MultiplierSymbol bad([](int k) {
    return k == 5 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  });
  CHECK_THROWS_AS(apply_multiplier(f, bad), ConfigError);
}

TEST_CASE("project_low_modes examples and idempotence") {
  PeriodicGrid grid(64);
  SpectralField f(grid, sampled(grid, [](double x) {
    return 1.0 + std::cos(x) + std::cos(4 * x);
  }));
  SpectralField p1 = project_low_modes(f, 1);
  SpectralField want(grid, sampled(grid, [](double x) { return 1.0 + std::cos(x); }));
  CHECK(max_abs_diff(p1.values(), want.values()) <= 1e-13);

  SpectralField p0 = project_low_modes(f, 0);
  for (double v : p0.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-13));

  SpectralField twice = project_low_modes(p1, 1);
  CHECK(max_abs_diff(twice.values(), p1.values()) <= 1e-14);

  CHECK_THROWS_AS(project_low_modes(f, 32), ConfigError);
}

TEST_CASE("project_low_modes commutes with apply_multiplier") {
  PeriodicGrid grid(64);
  std::mt19937_64 rng(11);
  MultiplierSymbol sym([](int k) { return 1.0 / (1.0 + k * k); });
  for (int rep = 0; rep < 20; ++rep) {
    SpectralField f = random_field(grid, rng);
    int kmax = 1 + rep % 20;
    SpectralField a = project_low_modes(apply_multiplier(f, sym), kmax);
    SpectralField b = apply_multiplier(project_low_modes(f, kmax), sym);
    REQUIRE(max_abs_diff(a.values(), b.values()) <= 1e-13);
  }
}

TEST_CASE("from_modes and coefficient readback") {
  PeriodicGrid grid(64);
  SpectralField f = SpectralField::from_modes(grid, 0.5, {{2, 1.0, 0.0}, {5, 0.0, -0.25}});
  SpectralField want(grid, sampled(grid, [](double x) {
    return 0.5 + std::cos(2 * x) - 0.25 * std::sin(5 * x);
  }));
  CHECK(max_abs_diff(f.values(), want.values()) <= 1e-13);
  CHECK(f.coeff(2).real() == doctest::Approx(0.5).epsilon(1e-12));
  // sin amplitude B appears as c_k = -i B / 2
  CHECK(f.coeff(5).imag() == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("spectral derivative and translation") {
  PeriodicGrid grid(64);
  SpectralField f(grid, sampled(grid, [](double x) { return std::sin(3 * x); }));
  SpectralField d1 = spectral_derivative(f, 1);
  SpectralField want(grid, sampled(grid, [](double x) { return 3 * std::cos(3 * x); }));
  CHECK(max_abs_diff(d1.values(), want.values()) <= 1e-12);

  SpectralField d2 = spectral_derivative(f, 2);
  SpectralField want2(grid, sampled(grid, [](double x) { return -9 * std::sin(3 * x); }));
  CHECK(max_abs_diff(d2.values(), want2.values()) <= 1e-12);

  double sh = 0.37;
  SpectralField t = translate(f, sh);
  SpectralField wantt(grid, sampled(grid, [&](double x) { return std::sin(3 * (x - sh)); }));
  CHECK(max_abs_diff(t.values(), wantt.values()) <= 1e-12);

  // non-default period
  PeriodicGrid g3(64, 3.0);
  SpectralField h(g3, sampled(g3, [](double x) { return std::cos(2 * kPi * x / 3.0); }));
  SpectralField dh = spectral_derivative(h, 1);
  SpectralField wanth(g3, sampled(g3, [](double x) {
    return -(2 * kPi / 3.0) * std::sin(2 * kPi * x / 3.0);
  }));
  CHECK(max_abs_diff(dh.values(), wanth.values()) <= 1e-12);
}
