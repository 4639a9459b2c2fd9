#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "kktrace/geometry.hpp"

namespace kktrace {

/// Tangent of the reduced flow at a phase point: Hamilton's equations for
/// (x,p) plus infinitesimal coadjoint rotation of the charge.
struct WongTangent {
  double xdot = 0;
  double pdot = 0;
  Eigen::VectorXd qdot;
};

WongTangent wong_rhs(const ModelSpec& model, const PhasePoint& pt);

struct DriftReport {
  double energy = 0;        // |H(end) - H(start)|
  double charge_radius = 0; // ||q(end)| - |q(start)||
  long rhs_evaluations = 0;
  long steps = 0;
};

struct FlowState {
  PhasePoint point;
  double time = 0;
  std::optional<Eigen::MatrixXd> monodromy;  // over (x,p,q) tangent coords
  Eigen::VectorXd fiber_drift;  // integrated fiber displacement, character units
  DriftReport report;
};

struct IntegrateOptions {
  double tol = 1e-10;          // in [1e-13, 1e-6]
  bool track_monodromy = false;
  bool record_trajectory = false;
  double max_step = 0;         // 0: unconstrained; >0 caps |h| (dense output)
};

/// Adaptive Gragg-Bulirsch-Stoer integration of the reduced flow over [0,T]
/// (T may be negative). The charge is projected back to the orbit sphere
/// after each accepted step; the variational (monodromy) system uses the
/// analytic Jacobian of the right-hand side. Throws Error(Numerical) on
/// step-size underflow, carrying the blow-up time in the message.
FlowState integrate(const ModelSpec& model, const PhasePoint& start, double T,
                    const IntegrateOptions& opts);

struct TrajectorySample {
  double t, x, p, H, qnorm;
  Eigen::VectorXd q;
};

/// As integrate(), also returning samples at accepted steps.
FlowState integrate_recorded(const ModelSpec& model, const PhasePoint& start,
                             double T, const IntegrateOptions& opts,
                             std::vector<TrajectorySample>& samples);

/// CSV dump: t, x, p, q components, H, |q|.
void write_trajectory_csv(const std::string& path,
                          const std::vector<TrajectorySample>& samples);

/// Norm of the character-unit torus generators, used to convert integrated
/// orthonormal fiber angles into stabilizer-character units.
double torus_generator_norm(const GroupData& g);

/// Structure constant of rank-1 non-abelian charge motion in the orthonormal
/// basis of g*: [e_a, e_b] = lambda_s eps_abc e_c.
double su2_structure_constant(const GroupData& g);

}  // namespace kktrace
