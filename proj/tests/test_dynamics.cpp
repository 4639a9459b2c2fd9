#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kktrace/dynamics.hpp"

using namespace kktrace;

namespace {

ModelSpec from_text(const std::string& body) {
  return ModelSpec::from_json_text(body);
}

Eigen::VectorXd q1(double v) {
  Eigen::VectorXd q(1);
  q << v;
  return q;
}

const char* kFlat = R"({"schema_version":1,"group":"U1","lambda0":[4],"level":1})";

}  // namespace

TEST_CASE("wong rhs on the flat model") {
  ModelSpec m = from_text(kFlat);
  PhasePoint pt{0.4, 3.0, q1(4.0)};
  WongTangent t = wong_rhs(m, pt);
  CHECK(t.xdot == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(t.pdot == doctest::Approx(0.0));
  CHECK(t.qdot.norm() == doctest::Approx(0.0));
}

TEST_CASE("Lorentz force form for U(1)") {
  // A(x) = a sin x has curvature F = a cos x; Hamilton's equations reduce to
  // pdot = q F xdot.
  ModelSpec m = from_text(
      R"({"schema_version":1,"group":"U1","lambda0":[1],"level":1,
          "A":{"const":0.0,"sin":[0.35]}})");
  for (double x : {0.2, 1.1, 2.9, 4.4}) {
    PhasePoint pt{x, 1.7, q1(1.0)};
    WongTangent t = wong_rhs(m, pt);
    double F = m.conn.curvature(x);
    CHECK(t.pdot == doctest::Approx(pt.q[0] * F * t.xdot).epsilon(1e-12));
  }
}

TEST_CASE("SU(2) charge motion preserves the orbit radius") {
  ModelSpec m = from_text(
      R"({"schema_version":1,"group":"SU2","lambda0":[0.7071067811865476],
          "level":1,"A":0.4})");
  Eigen::VectorXd q(3);
  q << 0.3, 0.2, std::sqrt(0.5 - 0.09 - 0.04);
  PhasePoint pt{0.5, 1.2, q};
  WongTangent t = wong_rhs(m, pt);
  CHECK(std::fabs(q.dot(t.qdot)) < 1e-15);  // d|q|^2/dt = 0 exactly

  IntegrateOptions opts;
  opts.tol = 1e-12;
  FlowState fs = integrate(m, pt, 50.0, opts);
  CHECK(fs.report.charge_radius < 1e-9);
  CHECK(fs.report.energy < 1e-9);
}

TEST_CASE("flat trajectories are exact") {
  ModelSpec m = from_text(kFlat);
  PhasePoint pt{0.25, 3.0, q1(4.0)};
  IntegrateOptions opts;
  opts.tol = 1e-12;
  FlowState fs = integrate(m, pt, 100.0, opts);
  CHECK(fs.report.energy < 1e-9);
  double xdot = 0.6;
  CHECK(std::fabs(fs.point.x - (0.25 + xdot * 100.0)) < 1e-9);
  CHECK(std::fabs(fs.point.p - 3.0) < 1e-10);

  // fiber displacement: theta_dot = nu / H (A = 0)
  CHECK(std::fabs(fs.fiber_drift[0] - (4.0 / 5.0) * 100.0) < 1e-8);
}

TEST_CASE("fiber drift with constant flux") {
  ModelSpec m = from_text(
      R"({"schema_version":1,"group":"U1","lambda0":[1],"level":1,"A":0.25})");
  PhasePoint pt{0.0, 2.0, q1(1.0)};
  double H = hamiltonian_hz(m, pt);
  IntegrateOptions opts;
  opts.tol = 1e-12;
  double T = 37.0;
  FlowState fs = integrate(m, pt, T, opts);
  // theta_dot = nu/H - alpha xdot with everything constant
  double ptil = 2.0 - 0.25;
  double xdot = ptil / H;
  double expect = (1.0 / H) * T - 0.25 * xdot * T;
  CHECK(std::fabs(fs.fiber_drift[0] - expect) < 1e-8);
}

TEST_CASE("flat monodromy is a shear") {
  ModelSpec m = from_text(kFlat);
  PhasePoint pt{0.0, 3.0, q1(4.0)};
  IntegrateOptions opts;
  opts.tol = 1e-12;
  opts.track_monodromy = true;
  double T = 12.5;
  FlowState fs = integrate(m, pt, T, opts);
  const Eigen::MatrixXd& M = *fs.monodromy;
  double S = 5.0;
  double Hpp = 16.0 / (S * S * S);  // q^2 / H^3
  CHECK(std::fabs(M(0, 0) - 1.0) < 1e-9);
  CHECK(std::fabs(M(0, 1) - T * Hpp) < 1e-8);
  CHECK(std::fabs(M(1, 0)) < 1e-10);
  CHECK(std::fabs(M(1, 1) - 1.0) < 1e-9);
}

TEST_CASE("monodromy against finite differences") {
  ModelSpec m = from_text(
      R"({"schema_version":1,"group":"U1","lambda0":[1],"level":1,
          "N":{"const":1.0,"cos":[0.1]},"A":{"const":0.2,"sin":[0.15]}})");
  PhasePoint pt{0.4, 1.6, q1(1.0)};
  IntegrateOptions opts;
  opts.tol = 1e-12;
  opts.track_monodromy = true;
  double T = 8.0;
  FlowState fs = integrate(m, pt, T, opts);
  const Eigen::MatrixXd& M = *fs.monodromy;

  const double eps = 1e-6;
  IntegrateOptions o2;
  o2.tol = 1e-13;
  auto flow = [&](double dx, double dp) {
    FlowState f = integrate(m, PhasePoint{pt.x + dx, pt.p + dp, pt.q}, T, o2);
    return std::make_pair(f.point.x, f.point.p);
  };
  auto [xp, pp] = flow(eps, 0);
  auto [xm, pm] = flow(-eps, 0);
  CHECK(std::fabs((xp - xm) / (2 * eps) - M(0, 0)) < 1e-5);
  CHECK(std::fabs((pp - pm) / (2 * eps) - M(1, 0)) < 1e-5);
  auto [xp2, pp2] = flow(0, eps);
  auto [xm2, pm2] = flow(0, -eps);
  CHECK(std::fabs((xp2 - xm2) / (2 * eps) - M(0, 1)) < 1e-5);
  CHECK(std::fabs((pp2 - pm2) / (2 * eps) - M(1, 1)) < 1e-5);

  // symplecticity of the (x,p) block
  Eigen::Matrix2d J;
  J << 0, 1, -1, 0;
  Eigen::Matrix2d B = M.topLeftCorner<2, 2>();
  CHECK((B.transpose() * J * B - J).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("time reversal") {
  ModelSpec m = from_text(
      R"({"schema_version":1,"group":"U1","lambda0":[1],"level":1,
          "N":{"const":1.0,"cos":[0.1]},"eta":{"const":0.0,"sin":[0.1]}})");
  PhasePoint pt{1.0, 1.5, q1(1.0)};
  IntegrateOptions opts;
  opts.tol = 1e-12;
  FlowState fwd = integrate(m, pt, 60.0, opts);
  FlowState back = integrate(
      m, PhasePoint{fwd.point.x, fwd.point.p, fwd.point.q}, -60.0, opts);
  double err = std::hypot(back.point.x - pt.x, back.point.p - pt.p);
  CHECK(err < 100 * opts.tol);
}

TEST_CASE("tolerance contract") {
  ModelSpec m = from_text(kFlat);
  PhasePoint pt{0, 1, q1(4.0)};
  IntegrateOptions opts;
  opts.tol = 1e-3;  // out of range
  CHECK_THROWS_AS(integrate(m, pt, 1.0, opts), Error);
}
