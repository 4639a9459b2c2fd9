#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "kktrace/dynamics.hpp"
#include "kktrace/geometry.hpp"

namespace kktrace {

/// Conserved g*-valued charge of the reduced flow (the connection pairing).
Eigen::VectorXd moment_map(const PhasePoint& pt);

enum class ComponentKind { IsolatedNondegenerate, Family, ZeroTime };

struct PeriodicOrbit {
  double T = 0;             // period of the relative closure
  double T_primitive = 0;   // smallest positive period of the loop
  int winding = 0;          // base winding number over one period T
  PhasePoint start;
  Eigen::VectorXd drift_g;  // stabilizer-torus angles (character units)
  double det_I_minus_P = 1;
  complexd holonomy{1, 0};
  ComponentKind component_kind = ComponentKind::IsolatedNondegenerate;
  double residual = 0;      // closure residual in phase coordinates
  int extra_null_dims = 0;  // shooting-Jacobian nullity beyond the flow pair
  bool degeneracy_warning = false;
  double energy = 0;
};

struct OrbitSearchConfig {
  std::vector<int> windings = {1, -1};
  int grid_seeds = 24;             // coarse seeds per winding on the surface
  std::vector<PhasePoint> user_seeds;
  double newton_tol = 1e-10;
  int max_newton_iter = 60;
  double family_tol = 1e-5;        // singular-value cutoff beyond the flow null
  double dedup_phase_tol = 1e-6;
  double dedup_period_tol = 1e-6;
  double scan_time = 0.0;          // 0: automatic
};

/// Newton shooting for relative periodic orbits on H^-1(E). Seeds that fail
/// to converge are dropped; an empty list is not an error. Throws
/// Error(InvalidInput) when E is not a regular value along candidates.
std::vector<PeriodicOrbit> find_periodic_orbits(const ModelSpec& model,
                                                double E,
                                                const OrbitSearchConfig& cfg);

/// det(I - P) of the symplectic-quotient return map obtained from the
/// monodromy by restricting to ker dH and quotienting the flow direction.
/// A 0-dimensional quotient gives 1 (empty product). transversal_seed picks
/// the complement construction; the result is independent of it to 1e-6.
double poincare_det(const ModelSpec& model, const PhasePoint& z0,
                    const Eigen::MatrixXd& monodromy, int transversal_seed = 0);

/// Low-level quotient determinant on explicit data: leaf tangent basis
/// (ambient x L), energy gradient, flow direction (ambient coords), and the
/// monodromy on ambient coordinates. Used directly by the synthetic tests.
double quotient_return_determinant(const Eigen::MatrixXd& leaf_basis,
                                   const Eigen::VectorXd& grad_H,
                                   const Eigen::VectorXd& flow_dir,
                                   const Eigen::MatrixXd& monodromy,
                                   int transversal_seed);

struct VolumeSamplerConfig {
  std::uint64_t seed = 1;
  long max_samples = 40'000'000;
  double target_rel_se = 3e-3;   // stop once the standard error is below this
  double shell_factor = 1e-3;    // delta = shell_factor * E
  int x_cells = 64;
  bool richardson = true;
};

struct VolumeEstimate {
  double value = 0;       // Vol(H^-1(E)) under Omega = omega^n / n!
  double std_error = 0;
  double delta = 0;
  long samples = 0;
};

/// Monte Carlo thin-shell estimate of the invariant volume of H^-1(E),
/// Richardson-extrapolated over delta and delta/2. Deterministic for a fixed
/// seed. Throws Error(Precision) with the partial estimate in the message if
/// the target standard error is not reached within max_samples.
VolumeEstimate energy_surface_volume(const ModelSpec& model, double E,
                                     const VolumeSamplerConfig& cfg);

/// chi_{xi0}(drift) e^{iTE} for an orbit's recorded drift element.
complexd orbit_holonomy(const ModelSpec& model, const PeriodicOrbit& orbit,
                        double E);

/// JSON export of an orbit atlas.
void write_orbit_atlas_json(const std::string& path,
                            const std::vector<PeriodicOrbit>& atlas);

}  // namespace kktrace
