#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "kktrace/geometry.hpp"

using namespace kktrace;

namespace {

ModelSpec flat_u1(double alpha = 0.0, double eta = 0.0) {
  std::string text = R"({"schema_version":1,"group":"U1","lambda0":[4],"level":1,
                         "A":)" + std::to_string(alpha) +
                     R"(,"eta":)" + std::to_string(eta) + "}";
  return ModelSpec::from_json_text(text);
}

Eigen::VectorXd q1(double v) {
  Eigen::VectorXd q(1);
  q << v;
  return q;
}

}  // namespace

TEST_CASE("hamiltonian closed forms") {
  // N=1, eta=0, h=1, A=0, p=3, |q|=4 -> 5
  ModelSpec m = flat_u1();
  PhasePoint pt{0.0, 3.0, q1(4.0)};
  CHECK(hamiltonian_hz(m, pt) == doctest::Approx(5.0).epsilon(1e-14));

  // eta = 0.5: 0.5*3 + 5
  ModelSpec ms = flat_u1(0.0, 0.5);
  CHECK(hamiltonian_hz(ms, pt) == doctest::Approx(6.5).epsilon(1e-14));

  // constant connection: sqrt((k - alpha nu)^2 + nu^2)
  double alpha = 0.7, k = 3.0, nu = 4.0;
  ModelSpec ma = flat_u1(alpha);
  PhasePoint pa{1.3, k, q1(nu)};
  CHECK(hamiltonian_hz(ma, pa) ==
        doctest::Approx(std::sqrt((k - alpha * nu) * (k - alpha * nu) + nu * nu))
            .epsilon(1e-14));
}

TEST_CASE("degree-1 homogeneity") {
  ModelSpec m = flat_u1(0.3, 0.4);
  PhasePoint pt{0.7, 2.1, q1(4.0)};
  double H = hamiltonian_hz(m, pt);
  for (double s : {0.5, 2.0, 10.0}) {
    PhasePoint ps{0.7, s * 2.1, q1(s * 4.0)};
    CHECK(std::fabs(hamiltonian_hz(m, ps) - s * H) < 1e-12 * s * H);
  }
}

TEST_CASE("positivity on random phase points") {
  std::string text = R"({"schema_version":1,"group":"U1","lambda0":[1],"level":1,
    "N":{"const":1.0,"cos":[0.1]},"eta":{"const":0.0,"sin":[0.2]},
    "h":{"const":1.0,"cos":[0.0,0.05]},"A":{"const":0.3,"cos":[0.2]}})";
  ModelSpec m = ModelSpec::from_json_text(text);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> ux(0, TWO_PI), up(-30, 30);
  for (int i = 0; i < 10000; ++i) {
    PhasePoint pt{ux(rng), up(rng), q1(1.0)};
    CHECK(hamiltonian_hz(m, pt) > 0.0);
  }
}

TEST_CASE("null defect vanishes on the future root") {
  ModelSpec m = flat_u1();
  CHECK(std::fabs(null_defect(m, -5.0, 0.0, 3.0, q1(4.0))) < 1e-12);
  // spacelike covector (zero charge slot allowed here; raw covector op)
  CHECK(null_defect(m, 0.0, 0.0, 1.0, q1(0.0)) > 0.0);

  // stationary model with shift: tau = -6.5 is the future root
  ModelSpec ms = flat_u1(0.0, 0.5);
  CHECK(std::fabs(null_defect(ms, -6.5, 0.0, 3.0, q1(4.0))) < 1e-10);

  // root-finding oracle on tau -> defect: bisection against -H
  std::string text = R"({"schema_version":1,"group":"U1","lambda0":[2],"level":1,
    "N":{"const":1.2,"cos":[0.1]},"eta":{"const":0.3},"h":{"const":0.9},
    "A":{"const":0.4}})";
  ModelSpec mv = ModelSpec::from_json_text(text);
  double x = 1.1, p = 2.3;
  Eigen::VectorXd q = q1(2.0);
  double H = hamiltonian_hz(mv, PhasePoint{x, p, q});
  double lo = -4 * H, hi = 0.0;
  REQUIRE(null_defect(mv, lo, x, p, q) < 0);
  REQUIRE(null_defect(mv, hi, x, p, q) > 0);
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (null_defect(mv, mid, x, p, q) < 0 ? lo : hi) = mid;
  }
  CHECK(std::fabs(0.5 * (lo + hi) + H) < 1e-10);

  // the defect is quadratic in tau with two roots of opposite pairing sign
  double ptilde = p - 0.4 * q[0];
  double other = mv.base.N(x) * std::sqrt(ptilde * ptilde / mv.base.h(x) +
                                           q.squaredNorm()) -
                 mv.base.beta(x) * ptilde;
  CHECK(std::fabs(null_defect(mv, other, x, p, q)) < 1e-10);
}

TEST_CASE("gradient matches finite differences") {
  std::string text = R"({"schema_version":1,"group":"U1","lambda0":[1],"level":1,
    "N":{"const":1.0,"cos":[0.15]},"eta":{"const":0.1,"sin":[0.1]},
    "h":{"const":1.1},"A":{"const":0.2,"cos":[0.3]}})";
  ModelSpec m = ModelSpec::from_json_text(text);
  PhasePoint pt{0.9, 1.7, q1(1.0)};
  HamiltonianGradient g = gradient_hz(m.base, m.conn, pt);

  const double h = 1e-5;
  auto H = [&](double x, double p, double q) {
    return hamiltonian_hz(m, PhasePoint{x, p, q1(q)});
  };
  double fdx = (H(pt.x + h, pt.p, 1.0) - H(pt.x - h, pt.p, 1.0)) / (2 * h);
  double fdp = (H(pt.x, pt.p + h, 1.0) - H(pt.x, pt.p - h, 1.0)) / (2 * h);
  double fdq = (H(pt.x, pt.p, 1.0 + h) - H(pt.x, pt.p, 1.0 - h)) / (2 * h);
  CHECK(std::fabs(g.dx - fdx) < 1e-6 * std::max(1.0, std::fabs(fdx)));
  CHECK(std::fabs(g.dp - fdp) < 1e-6 * std::max(1.0, std::fabs(fdp)));
  CHECK(std::fabs(g.dq[0] - fdq) < 1e-6 * std::max(1.0, std::fabs(fdq)));

  // closed forms: flat dH/dp = 3/5; constant geometry dH/dx = 0
  ModelSpec flat = flat_u1();
  HamiltonianGradient gf =
      gradient_hz(flat.base, flat.conn, PhasePoint{0.2, 3.0, q1(4.0)});
  CHECK(gf.dp == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(gf.dx == doctest::Approx(0.0));

  // beta model: dH/dp = beta + ptilde/|zeta|
  ModelSpec mb = flat_u1(0.0, 0.25);
  PhasePoint pb{0.0, 2.0, q1(1.5)};
  HamiltonianGradient gb = gradient_hz(mb.base, mb.conn, pb);
  double zeta = std::sqrt(2.0 * 2.0 + 1.5 * 1.5);
  CHECK(gb.dp == doctest::Approx(0.25 + 2.0 / zeta).epsilon(1e-13));
}

TEST_CASE("model validation") {
  // causality bound violated: eta^2/h >= N^2
  std::string bad = R"({"schema_version":1,"group":"U1","lambda0":[1],
                        "eta":1.5})";
  CHECK_THROWS_AS(ModelSpec::from_json_text(bad), Error);
  std::string badN = R"({"schema_version":1,"group":"U1","lambda0":[1],
                         "N":{"const":0.2,"cos":[0.5]}})";
  CHECK_THROWS_AS(ModelSpec::from_json_text(badN), Error);
  CHECK_THROWS_AS(ModelSpec::from_json_text("{\"group\":\"U1\"}"), Error);
  std::string badsv = R"({"schema_version":99,"group":"U1","lambda0":[1]})";
  CHECK_THROWS_AS(ModelSpec::from_json_text(badsv), Error);
}

TEST_CASE("phase point invariants") {
  ModelSpec m = flat_u1();  // lambda0 = 4
  CHECK(m.orbit_radius() == doctest::Approx(4.0));
  CHECK_THROWS_AS(make_phase_point(m, 0, 1, q1(3.9)), Error);
  PhasePoint ok = make_phase_point(m, 7.0, 1.0, q1(4.0));
  CHECK(ok.x == doctest::Approx(7.0 - TWO_PI));
}
