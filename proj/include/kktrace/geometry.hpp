#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>
#include <vector>

#include "kktrace/dual.hpp"
#include "kktrace/lie.hpp"
#include "kktrace/trig.hpp"
#include "kktrace/util.hpp"

namespace kktrace {

/// Stationary base data on a circle: lapse N, shift 1-form eta, spatial
/// metric h, potential V. Construction enforces N > 0, h > 0 and the
/// causality bound N^2 > eta^2/h on a sample grid.
struct BaseGeometry {
  double circumference = TWO_PI;
  TrigPoly N = TrigPoly::constant(1.0);
  TrigPoly eta = TrigPoly::constant(0.0);
  TrigPoly h = TrigPoly::constant(1.0);
  TrigPoly V = TrigPoly::constant(0.0);
  int grid = 256;  // sampling resolution for bound checks / solvers

  void validate() const;

  template <typename S>
  S beta(const S& x) const {  // shift vector component, eta / h
    return eta.eval(x) / h.eval(x);
  }
};

/// Connection in a global trivializing gauge: a single periodic coefficient
/// A(x) along the torus direction of the structure group. Non-trivial
/// topology enters through the flux/holonomy of A.
struct ConnectionSpec {
  TrigPoly A = TrigPoly::constant(0.0);
  std::shared_ptr<const GroupData> group;

  double curvature(double x) const { return A.derivative()(x); }
};

/// Full model: base + bundle + orbit weight. orbit.m is the charge level the
/// classical (reduced) dynamics runs at; the trace asymptotics scale it by m.
struct ModelSpec {
  std::string name;
  BaseGeometry base;
  ConnectionSpec conn;
  OrbitWeight orbit;
  int schema_version = 1;

  static ModelSpec from_json_text(const std::string& text);
  static ModelSpec from_json_file(const std::string& path);

  /// Orbit radius |m * lambda0| in the dual norm on g*.
  double orbit_radius() const;
  bool abelian() const { return conn.group->is_torus(); }
  /// Dimension of the charge coordinates (1 abelian, 3 for SU(2)-like rank 1).
  int charge_dim() const;
};

/// Point of the charged reduced phase space. For U(1) the charge q has one
/// component; for SU(2) it lives in an orthonormal basis of g* (3 components)
/// constrained to the orbit sphere, with the Cartan axis last.
struct PhasePoint {
  double x = 0;
  double p = 0;
  Eigen::VectorXd q;  // g* coordinates, |q| = orbit radius

  double charge_radius() const { return q.norm(); }
};

/// Construct a phase point, checking the orbit-radius constraint (1e-9) and
/// H_Z > 0; throws Error(Domain) on violation.
PhasePoint make_phase_point(const ModelSpec& model, double x, double p,
                            const Eigen::VectorXd& q);

/// Reduced Hamiltonian, degree-1 homogeneous form
///   H_Z = N sqrt(ptilde^2/h + |q|^2) + beta ptilde,  ptilde = p - <A(x),q>
/// where <A(x),q> = A(x) q_last (the connection points along the torus axis,
/// stored last in the charge coordinates). This is the future-root
/// Hamiltonian of the null cone; null_defect audits it.
template <typename S>
S hamiltonian_hz_t(const BaseGeometry& geom, const ConnectionSpec& conn,
                   const S& x, const S& p, const S* q, int qdim) {
  S qn2(0.0);
  for (int i = 0; i < qdim; ++i) qn2 += q[i] * q[i];
  S ptilde = p - conn.A.eval(x) * q[qdim - 1];
  S s2 = ptilde * ptilde / geom.h.eval(x) + qn2;
  using std::sqrt;
  return geom.N.eval(x) * sqrt(s2) + geom.beta(x) * ptilde;
}

double hamiltonian_hz(const BaseGeometry& geom, const ConnectionSpec& conn,
                      const PhasePoint& pt);
double hamiltonian_hz(const ModelSpec& model, const PhasePoint& pt);

/// Inverse Kaluza-Klein metric applied to the full covector (tau, p, q):
///   g^-1(xi,xi) = -(tau + beta ptilde)^2 / N^2 + ptilde^2/h + |q|^2.
/// Zero iff the covector is null; tau = -H_Z(p,q) is the future root.
double null_defect(const BaseGeometry& geom, const ConnectionSpec& conn,
                   double tau, double x, double p, const Eigen::VectorXd& q);
double null_defect(const ModelSpec& model, double tau, double x, double p,
                   const Eigen::VectorXd& q);

struct HamiltonianGradient {
  double dx;           // dH/dx
  double dp;           // dH/dp
  Eigen::VectorXd dq;  // dH/dq (g* coordinates)
};

/// Analytic partials of hamiltonian_hz (forward-mode duals; finite
/// differences are kept as a test oracle only).
HamiltonianGradient gradient_hz(const BaseGeometry& geom,
                                const ConnectionSpec& conn,
                                const PhasePoint& pt);

}  // namespace kktrace
