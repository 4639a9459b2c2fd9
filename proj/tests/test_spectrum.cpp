#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "kktrace/dynamics.hpp"
#include "kktrace/spectrum.hpp"

using namespace kktrace;

namespace {

FlatParams flat_u1(double q0, double alpha = 0, double beta = 0) {
  FlatParams p;
  p.group = std::make_shared<GroupData>(GroupData::u1());
  p.lambda0 = Eigen::VectorXd::Constant(1, q0);
  p.alpha = alpha;
  p.beta = beta;
  return p;
}

FlatParams flat_su2(double alpha = 0, double beta = 0) {
  FlatParams p;
  p.group = std::make_shared<GroupData>(GroupData::su2());
  p.lambda0 = 0.5 * p.group->positive_roots()[0];
  p.alpha = alpha;
  p.beta = beta;
  return p;
}

bool contains(const SpectrumTable& t, double lambda, long mult, double tol = 1e-10) {
  for (const auto& e : t.eigenvalues)
    if (std::fabs(e.lambda - lambda) < tol && e.multiplicity == mult) return true;
  return false;
}

}  // namespace

TEST_CASE("flat spectrum closed-form examples") {
  // (U(1), q0=1, m=1, k=0): lambda = +-1
  SpectrumTable t1 = flat_spectrum(flat_u1(1.0), 1, -1.5, 1.5);
  CHECK(contains(t1, 1.0, 1));
  CHECK(contains(t1, -1.0, 1));

  // (U(1), q0=2, m=2, k=3): +-5 = +-sqrt(9+16); k=+-3 degenerate
  SpectrumTable t2 = flat_spectrum(flat_u1(2.0), 2, -5.2, 5.2);
  CHECK(contains(t2, 5.0, 2));
  CHECK(contains(t2, -5.0, 2));

  // (U(1), q0=1, alpha=1/2, m=2): lambda = +-sqrt((k-1)^2+4);
  // ktilde = k-1 pairs k and 2-k, so every level except ktilde=0 is double
  SpectrumTable t3 = flat_spectrum(flat_u1(1.0, 0.5), 2, -12, 12);
  for (int k = 1; k <= 5; ++k) {
    double lam = std::sqrt((k - 1.0) * (k - 1.0) + 4.0);
    if (lam < 12) CHECK(contains(t3, lam, k == 1 ? 1 : 2, 1e-9));
  }

  // SU(2): multiplicity d_m = m+1 per (k, sign) at zero flux
  SpectrumTable ts = flat_spectrum(flat_su2(), 3, -8, 8);
  double c3 = 0.5 * 9 + 3;  // 7.5
  CHECK(contains(ts, std::sqrt(c3), 4));
  CHECK(contains(ts, std::sqrt(1.0 + c3), 8));  // k = +-1

  // window cutoff guard
  CHECK_THROWS_AS(flat_spectrum(flat_u1(1.0), 1, -1e9, 1e9, 1000), Error);
}

TEST_CASE("flat table matches the raw metric dispersion route") {
  // Independent enumeration straight from the inverse-metric components,
  // including the SU(2) weight bookkeeping.
  for (bool su2 : {false, true}) {
    FlatParams p = su2 ? flat_su2(0.4, 0.3) : flat_u1(2.0, 0.4, 0.3);
    int m = 2;
    double lo = -9, hi = 9;
    SpectrumTable t = flat_spectrum(p, m, lo, hi);

    const GroupData& g = *p.group;
    OrbitWeight w{p.lambda0, m};
    double cm = casimir_eigenvalue(g, w);
    double gen = torus_generator_norm(g);
    WeightSystem ws = weight_system(g, w);

    std::vector<std::pair<double, long>> expect;
    for (const auto& e : ws.entries) {
      double nu = double(e.angle_coords[e.angle_coords.size() - 1]) / gen;
      for (int k = -40; k <= 40; ++k) {
        // g^-1(xi,xi) = 0 with xi = (-lambda, k, weight) and the constant
        // inverse metric; quadratic formula in lambda
        double kt = k - p.alpha * nu;
        double A = 1.0, B = -2.0 * p.beta * kt;
        double C = -(1.0 - p.beta * p.beta) * kt * kt - cm;
        // note cm = f nu^2 summed over the fiber; the Casimir carries the
        // full vertical norm for the weight ladder
        double disc = B * B - 4 * A * C;
        for (int s = -1; s <= 1; s += 2) {
          double lam = (-B + s * std::sqrt(disc)) / 2;
          if (lam >= lo && lam <= hi) expect.emplace_back(lam, e.multiplicity);
        }
      }
    }
    std::sort(expect.begin(), expect.end());
    std::vector<std::pair<double, long>> merged;
    for (auto& pr : expect) {
      if (!merged.empty() && std::fabs(pr.first - merged.back().first) < 1e-10)
        merged.back().second += pr.second;
      else
        merged.push_back(pr);
    }
    REQUIRE(merged.size() == t.eigenvalues.size());
    for (std::size_t i = 0; i < merged.size(); ++i) {
      CHECK(std::fabs(merged[i].first - t.eigenvalues[i].lambda) < 1e-8);
      CHECK(merged[i].second == t.eigenvalues[i].multiplicity);
    }
  }
}

TEST_CASE("discretized path agrees with closed forms on constant coefficients") {
  ModelSpec m = ModelSpec::from_json_text(
      R"({"schema_version":1,"group":"U1","lambda0":[1],"level":1,
          "A":0.5,"eta":0.25})");
  FlatParams p = flat_u1(1.0, 0.5, 0.25);
  Spectrum1dOptions opts;
  opts.grid = 64;
  opts.certify = true;
  for (int mm : {1, 2, 5}) {
    SpectrumTable ft = flat_spectrum(p, mm, -14, 14);
    SpectrumTable gt = generic_spectrum_1d(m, mm, -14, 14, opts);
    REQUIRE(ft.eigenvalues.size() == gt.eigenvalues.size());
    for (std::size_t i = 0; i < ft.eigenvalues.size(); ++i) {
      CHECK(std::fabs(ft.eigenvalues[i].lambda - gt.eigenvalues[i].lambda) <
            1e-8 * std::max(1.0, std::fabs(ft.eigenvalues[i].lambda)));
      CHECK(ft.eigenvalues[i].multiplicity == gt.eigenvalues[i].multiplicity);
    }
  }
}

TEST_CASE("spectral convergence of the variable-coefficient solve") {
  ModelSpec m = ModelSpec::from_json_text(
      R"({"schema_version":1,"group":"U1","lambda0":[1],"level":1,
          "N":{"const":1.0,"cos":[0.1]}})");
  Spectrum1dOptions o;
  o.certify = false;
  auto eig = [&](int grid) {
    Spectrum1dOptions oo = o;
    oo.grid = grid;
    SpectrumTable t = generic_spectrum_1d(m, 4, 3.5, 9.0, oo);
    std::vector<double> v;
    for (const auto& e : t.eigenvalues) v.push_back(e.lambda);
    return v;
  };
  auto a = eig(20), b = eig(28), c = eig(56);
  REQUIRE(a.size() == b.size());
  REQUIRE(b.size() == c.size());
  double e1 = 0, e2 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    e1 = std::max(e1, std::fabs(a[i] - c[i]));
    e2 = std::max(e2, std::fabs(b[i] - c[i]));
  }
  // spectral accuracy: error collapses by far more than 10^2 per doubling
  CHECK(e2 < e1 / 100.0 + 1e-12);
  // With flux the time-reversal pairs split and the spectrum is real and
  // simple (at zero flux the pairs are only exponentially split and cluster).
  ModelSpec mf = ModelSpec::from_json_text(
      R"({"schema_version":1,"group":"U1","lambda0":[1],"level":1,
          "N":{"const":1.0,"cos":[0.1]},"A":0.3})");
  SpectrumTable t = generic_spectrum_1d(mf, 4, 3.5, 9.0, Spectrum1dOptions{});
  CHECK(t.nonreal.empty());
  CHECK(!t.eigenvalues.empty());
  for (const auto& e : t.eigenvalues) CHECK(e.multiplicity == 1);
}

TEST_CASE("Krein regime: non-real eigenvalues for negative potentials") {
  ModelSpec m = ModelSpec::from_json_text(
      R"({"schema_version":1,"group":"U1","lambda0":[1],"level":1,"V":-10.0})");
  Spectrum1dOptions o;
  o.grid = 48;
  SpectrumTable t = generic_spectrum_1d(m, 2, -10, 10, o);
  // lambda^2 = k^2 + 4 - 10: k=0 gives +-i sqrt(6)
  bool found = false;
  for (const auto& z : t.nonreal)
    if (std::fabs(z.imag() - std::sqrt(6.0)) < 1e-8 && std::fabs(z.real()) < 1e-9)
      found = true;
  CHECK(found);

  // positivity threshold: smallest m with m^2 > 10 is 4
  PositivityScan scan = positivity_threshold(m, 8, 14.0, o);
  CHECK(scan.m0 == 4);
  CHECK_FALSE(scan.levels[2].all_real);  // m = 3 is a witness
}

TEST_CASE("positivity threshold comparison SU(2) vs U(1)") {
  // c_m = m^2/2 + m exceeds m^2 only for m <= 2, so compare at V = -1.2:
  // SU(2) clears the well at m = 1, U(1) needs m = 2.
  ModelSpec mu1 = ModelSpec::from_json_text(
      R"({"schema_version":1,"group":"U1","lambda0":[1],"level":1,"V":-1.2})");
  ModelSpec msu = ModelSpec::from_json_text(
      R"({"schema_version":1,"group":"SU2","lambda0":[0.7071067811865476],
          "level":1,"V":-1.2})");
  Spectrum1dOptions o;
  o.grid = 48;
  PositivityScan s1 = positivity_threshold(mu1, 6, 9.0, o);
  PositivityScan s2 = positivity_threshold(msu, 6, 9.0, o);
  CHECK(s1.m0 == 2);
  CHECK(s2.m0 == 1);
  CHECK(s2.m0 < s1.m0);
}

TEST_CASE("energy form") {
  ModelSpec m = ModelSpec::from_json_text(
      R"({"schema_version":1,"group":"U1","lambda0":[1],"level":1,"eta":0.3})");
  Spectrum1dOptions o;
  o.grid = 32;
  o.keep_modes = true;
  std::vector<ModeFunction> modes;
  o.modes_out = &modes;
  generic_spectrum_1d(m, 2, -8, 8, o);
  REQUIRE(!modes.empty());
  int checked = 0;
  for (const auto& mf : modes) {
    // flat closed form (mean-normalized): Q = 2 lambda (lambda - beta ktilde)
    // for an unnormalized Fourier mode; after normalization Q = 1.
    double q = energy_form(m, mf);
    CHECK(q == doctest::Approx(1.0).epsilon(1e-8));
    ++checked;
  }
  CHECK(checked >= 10);

  // zero mode gives zero
  ModeFunction zero;
  zero.coeffs = Eigen::VectorXcd::Zero(9);
  zero.lambda = 1.0;
  CHECK(energy_form(m, zero) == doctest::Approx(0.0));

  // V = 0 sweep: 200 modes all positive
  ModelSpec m2 = ModelSpec::from_json_text(
      R"({"schema_version":1,"group":"U1","lambda0":[1],"level":1,
          "N":{"const":1.0,"cos":[0.08]}})");
  int positive = 0;
  for (int mm = 1; mm <= 5; ++mm) {
    Spectrum1dOptions oo;
    oo.grid = 64;
    oo.keep_modes = true;
    std::vector<ModeFunction> mfs;
    oo.modes_out = &mfs;
    generic_spectrum_1d(m2, mm, -22, 22, oo);
    for (const auto& mf : mfs)
      if (mf.q_value > 0) ++positive;
  }
  CHECK(positive >= 200);
}

TEST_CASE("factorization corollary for flat SU(2)") {
  for (int m = 1; m <= 8; ++m) {
    FactorizationReport rep = factorization_check(flat_su2(), m, -12, 12);
    CHECK(rep.exact);
    CHECK(rep.dm == m + 1);
    for (const auto& line : rep.lines)
      CHECK(line.hm_multiplicity == rep.dm * line.bundle_multiplicity);
  }
  // m=5, k=0 modes: H_m multiplicity 6 vs bundle multiplicity 1
  FactorizationReport rep5 = factorization_check(flat_su2(), 5, -12, 12);
  double lam0 = std::sqrt(0.5 * 25 + 5);
  bool seen = false;
  for (const auto& line : rep5.lines)
    if (std::fabs(line.lambda - lam0) < 1e-9) {
      seen = true;
      CHECK(line.hm_multiplicity == 6);
      CHECK(line.bundle_multiplicity == 1);
    }
  CHECK(seen);

  // U(1) factorization is trivial; the check requires non-abelian input
  CHECK_THROWS_AS(factorization_check(flat_u1(1.0), 1, -5, 5), Error);
}

TEST_CASE("eigenvalue count grows linearly in the window") {
  FlatParams p = flat_u1(1.0);
  SpectrumTable t = flat_spectrum(p, 10, 0, 400);
  long c200 = t.count_in(0, 200), c400 = t.count_in(0, 400);
  CHECK(std::fabs(double(c400) / double(c200) - 2.0) < 0.05 * 2.0);
}

TEST_CASE("spectral symmetry under lambda -> -lambda") {
  ModelSpec m = ModelSpec::from_json_text(
      R"({"schema_version":1,"group":"U1","lambda0":[1],"level":1,
          "N":{"const":1.0,"cos":[0.1]},"V":{"const":0.5,"cos":[0.2]}})");
  Spectrum1dOptions o;
  o.grid = 48;
  SpectrumTable t = generic_spectrum_1d(m, 3, -11, 11, o);
  for (const auto& e : t.eigenvalues) {
    bool mirrored = false;
    for (const auto& f : t.eigenvalues)
      if (std::fabs(f.lambda + e.lambda) < 1e-8 &&
          f.multiplicity == e.multiplicity)
        mirrored = true;
    CHECK(mirrored);
  }
}
