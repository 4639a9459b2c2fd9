#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>

#include "kktrace/lie.hpp"

using namespace kktrace;

namespace {

GroupData su3() {
  // <alpha,alpha> = 2 simple roots in orthonormal coordinates
  std::string text = R"json({
    "name": "SU(3)", "rank": 2, "inner_norm": 1.0,
    "positive_roots": [[1.4142135623730951, 0.0],
                       [-0.7071067811865476, 1.2247448713915890],
                       [0.7071067811865476, 1.2247448713915890]]})json";
  return GroupData::from_json_text(text);
}

Weight su2_fund() {
  return 0.5 * GroupData::su2().positive_roots()[0];
}

Weight su3_omega1(const GroupData& g) {
  Eigen::MatrixXd coroots(2, 2);
  for (int b = 0; b < 2; ++b)
    coroots.row(b) = 2.0 * g.simple_roots()[b].transpose() /
                     g.simple_roots()[b].dot(g.simple_roots()[b]);
  Eigen::VectorXd e1(2);
  e1 << 1, 0;
  return coroots.fullPivLu().solve(e1);
}

}  // namespace

TEST_CASE("builtin group data") {
  GroupData u1 = GroupData::u1();
  CHECK(u1.rank() == 1);
  CHECK(u1.positive_roots().empty());
  CHECK(u1.dim() == 1);

  GroupData su2 = GroupData::su2();
  CHECK(su2.rank() == 1);
  CHECK(su2.positive_roots().size() == 1);
  CHECK(su2.dim() == 3);
  CHECK(su2.ip(su2.positive_roots()[0], su2.positive_roots()[0]) ==
        doctest::Approx(2.0));
  CHECK(su2.weyl_elements().size() == 2);
}

TEST_CASE("weyl dimension closed forms vs brute force") {
  GroupData u1 = GroupData::u1(), su2 = GroupData::su2();
  Weight q(1);
  q << 3;
  for (int m = 1; m <= 12; ++m) {
    CHECK(weyl_dimension(u1, {q, m}) == 1);
    CHECK(weyl_dimension(su2, {su2_fund(), m}) == m + 1);
    CHECK(weight_system(u1, {q, m}).total_dim() == 1);
    CHECK(weight_system(su2, {su2_fund(), m}).total_dim() == m + 1);
  }
  GroupData g3 = su3();
  Weight w1 = su3_omega1(g3);
  CHECK(weyl_dimension(g3, {w1, 1}) == 3);  // frozen: fundamental of SU(3)
  for (int m = 1; m <= 8; ++m)
    CHECK(weyl_dimension(g3, {w1, m}) == weight_system(g3, {w1, m}).total_dim());
  // adjoint = (1,1): dimension 8, zero weight multiplicity 2
  Weight rho_hat = g3.rho_half();
  CHECK(weyl_dimension(g3, {rho_hat, 1}) == 8);
  WeightSystem ws = weight_system(g3, {rho_hat, 1});
  CHECK(ws.total_dim() == 8);
  bool found_zero = false;
  for (const auto& e : ws.entries)
    if (e.angle_coords.cwiseAbs().maxCoeff() == 0) {
      found_zero = true;
      CHECK(e.multiplicity == 2);
    }
  CHECK(found_zero);
}

TEST_CASE("invalid weights are rejected") {
  GroupData su2 = GroupData::su2();
  Weight bad(1);
  bad << -su2_fund()[0];
  CHECK_THROWS_AS(weyl_dimension(su2, {bad, 1}), Error);
  Weight frac(1);
  frac << 0.31 * su2_fund()[0];
  CHECK_THROWS_AS(weyl_dimension(su2, {frac, 1}), Error);
  GroupData u1 = GroupData::u1();
  Weight half(1);
  half << 0.5;
  CHECK_THROWS_AS(weyl_dimension(u1, {half, 1}), Error);
}

TEST_CASE("casimir eigenvalues") {
  GroupData u1 = GroupData::u1(), su2 = GroupData::su2();
  Weight q(1);
  q << 2;
  CHECK(casimir_eigenvalue(u1, {q, 0}) == doctest::Approx(0.0));
  for (int m = 1; m <= 6; ++m) {
    // U(1): Delta_G = -d^2/dtheta^2 on e^{i m q0 theta}
    CHECK(casimir_eigenvalue(u1, {q, m}) == doctest::Approx(4.0 * m * m));
    // SU(2), <alpha,alpha> = 2: m^2/2 + m = 2 j (j+1) at j = m/2
    double j = 0.5 * m;
    CHECK(casimir_eigenvalue(su2, {su2_fund(), m}) ==
          doctest::Approx(0.5 * m * m + m));
    CHECK(casimir_eigenvalue(su2, {su2_fund(), m}) ==
          doctest::Approx(2.0 * j * (j + 1)));
  }
  // strictly increasing in m
  double prev = 0;
  for (int m = 1; m <= 10; ++m) {
    double c = casimir_eigenvalue(su2, {su2_fund(), m});
    CHECK(c > prev);
    prev = c;
  }
}

TEST_CASE("orbit half dimension") {
  GroupData u1 = GroupData::u1(), su2 = GroupData::su2(), g3 = su3();
  Weight q(1);
  q << 1;
  CHECK(orbit_half_dimension(u1, {q, 1}) == 0);
  CHECK(orbit_half_dimension(su2, {su2_fund(), 1}) == 1);
  CHECK(orbit_half_dimension(g3, {g3.rho_half(), 1}) == 3);   // regular
  CHECK(orbit_half_dimension(g3, {su3_omega1(g3), 1}) == 2);  // fundamental
}

TEST_CASE("characters") {
  GroupData u1 = GroupData::u1(), su2 = GroupData::su2();
  Weight q(1);
  q << 2;
  Eigen::VectorXd th(1);

  for (int m = 1; m <= 12; ++m) {
    th << 0.0;
    CHECK(std::abs(character(su2, {su2_fund(), m}, th) -
                   complexd(m + 1, 0)) < 1e-10);
    th << 0.8;
    complexd expect(std::sin((m + 1) * 0.8) / std::sin(0.8), 0);
    CHECK(std::abs(character(su2, {su2_fund(), m}, th) - expect) < 1e-10);
    complexd u1c = character(u1, {q, m}, th);
    CHECK(std::abs(u1c - complexd(std::cos(2 * m * 0.8), std::sin(2 * m * 0.8))) <
          1e-12);
  }

  // higher rank: alternating sum route vs weight-sum route, and the
  // denominator-zero limit path at the identity
  GroupData g3 = su3();
  OrbitWeight w{su3_omega1(g3), 3};
  Eigen::VectorXd z(2);
  z << 1e-13, -1e-13;
  CHECK(std::abs(character(g3, w, z) - complexd(double(weyl_dimension(g3, w)), 0)) <
        1e-6);
  Eigen::VectorXd ang(2);
  ang << 0.9, 0.4;
  WeightSystem ws = weight_system(g3, w);
  complexd direct(0, 0);
  for (const auto& e : ws.entries) {
    double arg = e.angle_coords[0] * ang[0] + e.angle_coords[1] * ang[1];
    direct += double(e.multiplicity) * complexd(std::cos(arg), std::sin(arg));
  }
  CHECK(std::abs(character(g3, w, ang) - direct) < 1e-9);
}

TEST_CASE("stabilizer character") {
  GroupData u1 = GroupData::u1(), su2 = GroupData::su2();
  Weight q(1);
  q << 3;
  Eigen::VectorXd th(1);
  th << 0.0;
  CHECK(std::abs(stabilizer_character(u1, {q, 1}, th) - complexd(1, 0)) < 1e-15);
  th << 0.7;
  CHECK(std::abs(stabilizer_character(u1, {q, 1}, th) -
                 complexd(std::cos(2.1), std::sin(2.1))) < 1e-14);
  // homomorphism property on sampled pairs
  for (double a : {0.3, 1.1, 2.7})
    for (double b : {0.5, 4.9}) {
      Eigen::VectorXd ta(1), tb(1), tab(1);
      ta << a;
      tb << b;
      tab << a + b;
      complexd lhs = stabilizer_character(su2, {su2_fund(), 1}, tab);
      complexd rhs = stabilizer_character(su2, {su2_fund(), 1}, ta) *
                     stabilizer_character(su2, {su2_fund(), 1}, tb);
      CHECK(std::abs(lhs - rhs) < 1e-13);
    }
  // unit modulus
  th << 123.456;
  CHECK(std::abs(std::abs(stabilizer_character(su2, {su2_fund(), 2}, th)) - 1.0) <
        1e-14);
  Eigen::VectorXd wrong(2);
  wrong << 0.1, 0.2;
  CHECK_THROWS_AS(stabilizer_character(u1, {q, 1}, wrong), Error);
}

TEST_CASE("character orthogonality for SU(2)") {
  GroupData su2 = GroupData::su2();
  int n = 2048;
  for (int m1 : {0, 1, 3, 8})
    for (int m2 : {0, 2, 3, 8}) {
      complexd acc(0, 0);
      for (int i = 0; i < n; ++i) {
        double th = TWO_PI * (i + 0.5) / n;
        Eigen::VectorXd a = Eigen::VectorXd::Constant(1, th);
        complexd c1 = character(su2, {su2_fund(), m1}, a);
        complexd c2 = character(su2, {su2_fund(), m2}, a);
        acc += c1 * std::conj(c2) * 2.0 * std::sin(th) * std::sin(th);
      }
      acc /= double(n);
      CHECK(std::abs(acc - complexd(m1 == m2 ? 1 : 0, 0)) < 1e-8);
    }
}

TEST_CASE("root data file parsing") {
  CHECK_THROWS_AS(GroupData::from_json_text("{\"rank\": 0}"), Error);
  CHECK_THROWS_AS(
      GroupData::from_json_text(
          "{\"rank\": 1, \"inner_norm\": -1, \"positive_roots\": []}"),
      Error);
  // zero root rejected
  CHECK_THROWS_AS(GroupData::from_json_text(
                      "{\"rank\": 1, \"positive_roots\": [[0.0]]}"),
                  Error);
}
