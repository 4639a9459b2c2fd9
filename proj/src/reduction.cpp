#include "kktrace/reduction.hpp"

#include <json.hpp>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "kktrace/lie.hpp"

namespace kktrace {

Eigen::VectorXd moment_map(const PhasePoint& pt) { return pt.q; }

namespace {

Eigen::VectorXd charge_axis_vector(const ModelSpec& model) {
  int d = model.charge_dim();
  Eigen::VectorXd q = Eigen::VectorXd::Zero(d);
  if (model.abelian()) {
    double s = std::sqrt(model.conn.group->inner_norm());
    for (int i = 0; i < d; ++i) q[i] = model.orbit.m * model.orbit.lambda0[i] / s;
  } else {
    q[d - 1] = model.orbit_radius();
  }
  return q;
}

// Rotation of the charge block about the given axis (identity on x,p).
Eigen::MatrixXd charge_rotation(int K, const Eigen::Vector3d& axis, double psi) {
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(K, K);
  Eigen::AngleAxisd rot(psi, axis.normalized());
  R.block<3, 3>(2, 2) = rot.toRotationMatrix();
  return R;
}

struct ShootingResult {
  bool ok = false;
  double x0 = 0, p0 = 0, T = 0, psi = 0;  // psi: charge rotation angle
  Eigen::VectorXd q0;
  double residual = 0;
  int extra_nulls = 0;
  Eigen::MatrixXd monodromy;
  Eigen::VectorXd fiber_drift;
};

// Flow map and closure residual for one winding. The charge chart is a local
// sphere chart at the seed axis for SU(2)-like groups.
class Shooter {
public:
  Shooter(const ModelSpec& model, double E, int winding, double tol)
      : model_(model), E_(E), w_(winding), tol_(tol) {
    L_ = model.base.circumference;
    d_ = model.charge_dim();
    nonabelian_ = !model.abelian() && d_ == 3;
    K_ = 2 + d_;
  }

  int unknowns() const { return nonabelian_ ? 6 : 3; }
  int residuals() const { return 3 + (nonabelian_ ? 3 : 0); }

  Eigen::VectorXd pack_seed(const PhasePoint& s, double T) const {
    Eigen::VectorXd u(unknowns());
    u[0] = s.x;
    u[1] = s.p;
    if (nonabelian_) {
      u[2] = 0;
      u[3] = 0;  // sphere chart offsets at the seed axis
      u[4] = T;
      u[5] = 0;  // charge rotation angle
    } else {
      u[2] = T;
    }
    return u;
  }

  void set_axis(const Eigen::VectorXd& q0) {
    axis_ = Eigen::Vector3d::Zero();
    if (nonabelian_) {
      axis_ = Eigen::Vector3d(q0[0], q0[1], q0[2]).normalized();
      // orthonormal tangent frame at the axis
      Eigen::Vector3d a = std::fabs(axis_.z()) < 0.9 ? Eigen::Vector3d::UnitZ()
                                                     : Eigen::Vector3d::UnitX();
      t1_ = axis_.cross(a).normalized();
      t2_ = axis_.cross(t1_).normalized();
    }
    r_ = q0.norm();
    q_seed_ = q0;
  }

  Eigen::VectorXd charge_of(const Eigen::VectorXd& u) const {
    if (!nonabelian_) return q_seed_;
    Eigen::Vector3d v = axis_ + u[2] * t1_ + u[3] * t2_;
    v = r_ * v.normalized();
    Eigen::VectorXd q(3);
    q << v[0], v[1], v[2];
    return q;
  }

  double period_of(const Eigen::VectorXd& u) const {
    return nonabelian_ ? u[4] : u[2];
  }

  // Residual of the relative-closure map at unknowns u.
  Eigen::VectorXd residual(const Eigen::VectorXd& u, FlowState* fs_out,
                           bool want_monodromy) const {
    Eigen::VectorXd q0 = charge_of(u);
    PhasePoint z0{u[0], u[1], q0};
    IntegrateOptions opts;
    opts.tol = std::min(1e-11, tol_ * 1e-1);
    opts.track_monodromy = want_monodromy;
    FlowState fs = integrate(model_, z0, period_of(u), opts);
    if (fs_out) *fs_out = fs;

    Eigen::VectorXd r(residuals());
    r[0] = fs.point.x - u[0] - double(w_) * L_;
    r[1] = fs.point.p - u[1];
    if (nonabelian_) {
      double psi = u[5];
      Eigen::AngleAxisd rot(-psi, axis_);
      Eigen::Vector3d qT(fs.point.q[0], fs.point.q[1], fs.point.q[2]);
      Eigen::Vector3d back = rot.toRotationMatrix() * qT;
      for (int i = 0; i < 3; ++i) r[2 + i] = back[i] - q0[i];
      r[5] = hamiltonian_hz(model_, z0) - E_;
    } else {
      r[2] = hamiltonian_hz(model_, z0) - E_;
    }
    return r;
  }

  // Jacobian assembled from the monodromy, the flow vector and the rotation
  // derivative; start-point columns use the chart pushforwards.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& u, const FlowState& fs) const {
    int nu = unknowns(), nr = residuals();
    Eigen::MatrixXd J(nr, nu);
    Eigen::VectorXd q0 = charge_of(u);
    PhasePoint z0{u[0], u[1], q0};
    const Eigen::MatrixXd& M = *fs.monodromy;

    // drift unrotation acting on end state
    Eigen::MatrixXd Pi = Eigen::MatrixXd::Identity(K_, K_);
    if (nonabelian_) Pi = charge_rotation(K_, axis_, -u[5]);

    HamiltonianGradient g0 = gradient_hz(model_.base, model_.conn, z0);
    WongTangent tend = wong_rhs(model_, PhasePoint{
                                    wrap_position(fs.point.x, L_), fs.point.p,
                                    fs.point.q});

    auto start_dir = [&](int j) {
      Eigen::VectorXd dir = Eigen::VectorXd::Zero(K_);
      if (j == 0) dir[0] = 1;
      else if (j == 1) dir[1] = 1;
      else {
        // chart pushforward: d/du_j of r * normalize(axis + a t1 + b t2)
        Eigen::Vector3d v = axis_ + u[2] * t1_ + u[3] * t2_;
        double n = v.norm();
        Eigen::Vector3d t = (j == 2) ? t1_ : t2_;
        Eigen::Vector3d dv = r_ * (t / n - v * (v.dot(t)) / (n * n * n));
        dir[2] = dv[0];
        dir[3] = dv[1];
        dir[4] = dv[2];
      }
      return dir;
    };

    int nstart = nonabelian_ ? 4 : 2;
    for (int j = 0; j < nstart; ++j) {
      Eigen::VectorXd dir = start_dir(j);
      Eigen::VectorXd dend = Pi * (M * dir);
      for (int i = 0; i < (nonabelian_ ? 5 : 2); ++i) J(i, j) = dend[i] - dir[i];
      // energy row
      double dH = g0.dx * dir[0] + g0.dp * dir[1];
      for (int i = 0; i < d_ && nonabelian_; ++i) dH += g0.dq[i] * dir[2 + i];
      J(nr - 1, j) = dH;
    }

    // period column
    {
      int j = nonabelian_ ? 4 : 2;
      Eigen::VectorXd zdot(K_);
      zdot[0] = tend.xdot;
      zdot[1] = tend.pdot;
      for (int i = 0; i < d_; ++i) zdot[2 + i] = tend.qdot[i];
      Eigen::VectorXd dend = Pi * zdot;
      for (int i = 0; i < (nonabelian_ ? 5 : 2); ++i) J(i, j) = dend[i];
      J(nr - 1, j) = 0;
    }

    if (nonabelian_) {
      // rotation-angle column: d/dpsi [R(-psi) qT]
      Eigen::AngleAxisd rot(-u[5], axis_);
      Eigen::Vector3d qT(fs.point.q[0], fs.point.q[1], fs.point.q[2]);
      Eigen::Vector3d back = rot.toRotationMatrix() * qT;
      Eigen::Vector3d dpsi = -axis_.cross(back);  // d/dpsi R(-psi) v = -axis x (R v)
      J(0, 5) = J(1, 5) = 0;
      for (int i = 0; i < 3; ++i) J(2 + i, 5) = dpsi[i];
      J(nr - 1, 5) = 0;
    }
    return J;
  }

  const ModelSpec& model_;
  double E_;
  int w_;
  double tol_;
  double L_ = TWO_PI;
  int d_ = 1, K_ = 3;
  bool nonabelian_ = false;
  Eigen::Vector3d axis_ = Eigen::Vector3d::UnitZ(), t1_, t2_;
  double r_ = 0;
  Eigen::VectorXd q_seed_;
};

}  // namespace

double quotient_return_determinant(const Eigen::MatrixXd& leaf_basis,
                                   const Eigen::VectorXd& grad_H,
                                   const Eigen::VectorXd& flow_dir,
                                   const Eigen::MatrixXd& monodromy,
                                   int transversal_seed) {
  const int L = int(leaf_basis.cols());
  // coordinates of gradient and flow in the leaf basis (basis assumed
  // orthonormal enough; use least squares for robustness)
  Eigen::VectorXd ghat = leaf_basis.colPivHouseholderQr().solve(grad_H);
  Eigen::VectorXd zhat = leaf_basis.colPivHouseholderQr().solve(flow_dir);
  double gn = ghat.norm();
  if (gn < 1e-8)
    throw Error(ErrorKind::Numerical, "energy gradient too small for quotient");
  if (zhat.norm() < 1e-12)
    throw Error(ErrorKind::Numerical, "flow direction vanishes on the orbit");

  // Basis of ker dH containing the flow direction.
  Eigen::VectorXd gunit = ghat / gn;
  Eigen::VectorXd z0 = zhat - gunit * gunit.dot(zhat);
  if (z0.norm() < 1e-10 * zhat.norm())
    throw Error(ErrorKind::Numerical, "flow direction parallel to gradient");
  z0.normalize();

  std::mt19937_64 rng(0x9E3779B97F4A7C15ull ^ (std::uint64_t(transversal_seed) << 7));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Eigen::VectorXd> kerbasis = {z0};
  int guard = 0;
  while (int(kerbasis.size()) < L - 1) {
    Eigen::VectorXd v(L);
    if (transversal_seed == 0 && guard < L) {
      v = Eigen::VectorXd::Zero(L);
      v[guard] = 1.0;  // coordinate-axis completion
    } else {
      for (int i = 0; i < L; ++i) v[i] = gauss(rng);
    }
    ++guard;
    v -= gunit * gunit.dot(v);
    for (const auto& b : kerbasis) v -= b * b.dot(v);
    if (v.norm() > 1e-6) kerbasis.push_back(v.normalized());
    if (guard > 20 * L)
      throw Error(ErrorKind::Numerical, "could not complete transversal basis");
  }

  const int Q = L - 2;  // quotient dimension
  if (Q <= 0) return 1.0;  // empty product

  // Monodromy in leaf coordinates.
  Eigen::MatrixXd Mleaf =
      leaf_basis.colPivHouseholderQr().solve(monodromy * leaf_basis);

  // Express images of the transversal vectors in {z0, u_1..u_Q, gunit}.
  Eigen::MatrixXd full(L, L);
  full.col(0) = z0;
  for (int i = 0; i < Q; ++i) full.col(1 + i) = kerbasis[1 + i];
  full.col(L - 1) = gunit;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(full);
  if (qr.rank() < L)
    throw Error(ErrorKind::Numerical, "transversal construction is ill-conditioned");

  Eigen::MatrixXd P(Q, Q);
  for (int i = 0; i < Q; ++i) {
    Eigen::VectorXd img = Mleaf * kerbasis[1 + i];
    Eigen::VectorXd coords = qr.solve(img);
    for (int j = 0; j < Q; ++j) P(j, i) = coords[1 + j];
  }
  return (Eigen::MatrixXd::Identity(Q, Q) - P).determinant();
}

double poincare_det(const ModelSpec& model, const PhasePoint& z0,
                    const Eigen::MatrixXd& monodromy, int transversal_seed) {
  int d = int(z0.q.size());
  int K = 2 + d;
  if (monodromy.rows() != K || monodromy.cols() != K)
    throw Error(ErrorKind::Domain, "monodromy dimension mismatch");

  // Leaf tangent basis: x, p, and the orbit-sphere tangent plane.
  int L = model.abelian() ? 2 : 4;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(K, L);
  B(0, 0) = 1;
  B(1, 1) = 1;
  if (!model.abelian()) {
    Eigen::Vector3d axis(z0.q[0], z0.q[1], z0.q[2]);
    axis.normalize();
    Eigen::Vector3d a = std::fabs(axis.z()) < 0.9 ? Eigen::Vector3d::UnitZ()
                                                  : Eigen::Vector3d::UnitX();
    Eigen::Vector3d t1 = axis.cross(a).normalized();
    Eigen::Vector3d t2 = axis.cross(t1).normalized();
    for (int i = 0; i < 3; ++i) {
      B(2 + i, 2) = t1[i];
      B(2 + i, 3) = t2[i];
    }
  }

  HamiltonianGradient g = gradient_hz(model.base, model.conn, z0);
  Eigen::VectorXd grad(K);
  grad[0] = g.dx;
  grad[1] = g.dp;
  for (int i = 0; i < d; ++i) grad[2 + i] = g.dq[i];

  WongTangent t = wong_rhs(model, z0);
  Eigen::VectorXd flow(K);
  flow[0] = t.xdot;
  flow[1] = t.pdot;
  for (int i = 0; i < d; ++i) flow[2 + i] = t.qdot[i];

  return quotient_return_determinant(B, grad, flow, monodromy, transversal_seed);
}

complexd orbit_holonomy(const ModelSpec& model, const PeriodicOrbit& orbit,
                        double E) {
  const GroupData& g = *model.conn.group;
  OrbitWeight w{model.orbit.lambda0, 1};
  complexd chi = stabilizer_character(g, w, orbit.drift_g);
  complexd hol = std::pow(chi, model.orbit.m) *
                 complexd(std::cos(orbit.T * E), std::sin(orbit.T * E));
  return hol / std::abs(hol);
}

namespace {

bool orbit_matches(const ModelSpec& model, const PeriodicOrbit& a,
                   const PeriodicOrbit& b, double period_tol, double phase_tol) {
  if (std::fabs(a.T - b.T) > period_tol * (1.0 + std::fabs(a.T))) return false;
  if (a.winding != b.winding) return false;
  // distance from b.start to the curve of a, parabolic-refined in the
  // flow parameter so points on the same orbit resolve to ~0
  IntegrateOptions opts;
  opts.tol = 1e-11;
  opts.record_trajectory = true;
  opts.max_step = std::max(1e-3, std::min(0.05, a.T / 64.0));
  std::vector<TrajectorySample> samples;
  integrate_recorded(model, a.start, a.T, opts, samples);
  double L = model.base.circumference;
  auto dist2 = [&](const TrajectorySample& s) {
    double dx = angle_dist(s.x * TWO_PI / L, b.start.x * TWO_PI / L) * L / TWO_PI;
    double dp = s.p - b.start.p;
    double dq = (s.q - b.start.q).norm();
    return dx * dx + dp * dp + dq * dq;
  };
  std::size_t besti = 0;
  double best = 1e300;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double d2 = dist2(samples[i]);
    if (d2 < best) {
      best = d2;
      besti = i;
    }
  }
  if (besti > 0 && besti + 1 < samples.size()) {
    double d0 = dist2(samples[besti - 1]);
    double d1 = best;
    double d2 = dist2(samples[besti + 1]);
    double denom = d0 - 2 * d1 + d2;
    if (denom > 0) {
      double u = 0.5 * (d0 - d2) / denom;
      u = std::clamp(u, -1.0, 1.0);
      double refined = d1 - 0.25 * (d0 - d2) * u;
      best = std::max(0.0, std::min(best, refined));
    }
  }
  return std::sqrt(best) < std::max(phase_tol * 100, 2e-3);
}

}  // namespace

std::vector<PeriodicOrbit> find_periodic_orbits(const ModelSpec& model, double E,
                                                const OrbitSearchConfig& cfg) {
  std::vector<PeriodicOrbit> atlas;
  const double L = model.base.circumference;
  Eigen::VectorXd q_axis = charge_axis_vector(model);

  // Coarse seeds: grid in x, the p-roots of H = E at each x.
  std::vector<PhasePoint> seeds = cfg.user_seeds;
  for (int i = 0; i < cfg.grid_seeds; ++i) {
    double x = double(i) * L / cfg.grid_seeds;
    for (int side = -1; side <= 1; side += 2) {
      // bisection for H(x, p, q_axis) = E on each side of the p-minimum
      auto Hp = [&](double p) {
        return hamiltonian_hz(model, PhasePoint{x, p, q_axis});
      };
      double pm = 0.0;  // H is convex in p; crude minimization by scan
      double hm = Hp(0);
      for (double p = -8; p <= 8; p += 0.05) {
        double v = Hp(p);
        if (v < hm) {
          hm = v;
          pm = p;
        }
      }
      if (hm >= E) continue;
      double lo = pm, hi = pm + side * 1.0;
      int guard = 0;
      while (Hp(hi) < E && guard++ < 60) hi += side * (std::fabs(hi - pm) + 1.0);
      if (Hp(hi) < E) continue;
      for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (lo + hi);
        (Hp(mid) < E ? lo : hi) = mid;
      }
      seeds.push_back(PhasePoint{x, 0.5 * (lo + hi), q_axis});
    }
  }

  for (int w : cfg.windings) {
    for (const auto& seed : seeds) {
      // period candidates from a forward scan
      std::vector<double> Tcands;
      {
        WongTangent t0 = wong_rhs(model, seed);
        if (std::fabs(t0.xdot) > 1e-8 && w != 0 &&
            (double(w) * t0.xdot > 0))
          Tcands.push_back(double(w) * L / t0.xdot);
        double scan = cfg.scan_time;
        if (scan <= 0)
          scan = (Tcands.empty() ? 40.0 : 2.5 * std::fabs(Tcands[0]) + 10.0);
        IntegrateOptions opts;
        opts.tol = 1e-10;
        opts.record_trajectory = true;
        std::vector<TrajectorySample> traj;
        try {
          integrate_recorded(model, seed, scan, opts, traj);
        } catch (const Error&) {
          continue;
        }
        double prev = 1e300, prev2 = 1e300;
        for (std::size_t i = 0; i < traj.size(); ++i) {
          double dx = traj[i].x - seed.x - double(w) * L;
          double dp = traj[i].p - seed.p;
          double d2 = std::sqrt(dx * dx + dp * dp);
          if (i >= 2 && prev < prev2 && prev < d2 && prev < 0.3 &&
              traj[i - 1].t > 0.05)
            Tcands.push_back(traj[i - 1].t);
          prev2 = prev;
          prev = d2;
        }
      }

      Shooter sh(model, E, w, cfg.newton_tol);
      sh.set_axis(seed.q);
      for (double Tc : Tcands) {
        if (!(Tc > 1e-3)) continue;
        Eigen::VectorXd u = sh.pack_seed(seed, Tc);
        bool converged = false;
        double rnorm = 1e300;
        FlowState fs;
        Eigen::MatrixXd J;
        for (int it = 0; it < cfg.max_newton_iter; ++it) {
          Eigen::VectorXd r;
          try {
            r = sh.residual(u, &fs, true);
          } catch (const Error&) {
            break;
          }
          rnorm = r.norm();
          if (rnorm < cfg.newton_tol) {
            converged = true;
            J = sh.jacobian(u, fs);
            break;
          }
          J = sh.jacobian(u, fs);
          Eigen::JacobiSVD<Eigen::MatrixXd> svd(
              J, Eigen::ComputeThinU | Eigen::ComputeThinV);
          Eigen::VectorXd sv = svd.singularValues();
          double cutoff = std::max(1e-10, 1e-10 * sv[0]);
          Eigen::VectorXd rhs = svd.matrixU().transpose() * r;
          for (int i = 0; i < sv.size(); ++i)
            rhs[i] = (sv[i] > cutoff) ? rhs[i] / sv[i] : 0.0;
          Eigen::VectorXd step = svd.matrixV() * rhs;
          // damped update with backtracking
          double lam = 1.0;
          bool improved = false;
          for (int bt = 0; bt < 8; ++bt) {
            Eigen::VectorXd utry = u - lam * step;
            try {
              Eigen::VectorXd rtry = sh.residual(utry, nullptr, false);
              if (rtry.norm() < rnorm * (1.0 - 1e-4 * lam)) {
                u = utry;
                improved = true;
                break;
              }
            } catch (const Error&) {
            }
            lam *= 0.5;
          }
          if (!improved) break;
        }
        if (!converged) continue;

        double T = sh.period_of(u);
        if (!(T > 1e-2)) continue;

        PeriodicOrbit orb;
        orb.T = T;
        orb.winding = w;
        orb.energy = E;
        Eigen::VectorXd q0 = sh.charge_of(u);
        orb.start = PhasePoint{wrap_position(u[0], L), u[1], q0};
        orb.residual = rnorm;

        // regular-value check along the orbit
        HamiltonianGradient g0 = gradient_hz(model.base, model.conn, orb.start);
        double gn = std::sqrt(g0.dx * g0.dx + g0.dp * g0.dp + g0.dq.squaredNorm());
        if (gn < 1e-6)
          throw Error(ErrorKind::InvalidInput,
                      "E is not a regular value along a found orbit");

        // nullity of the shooting Jacobian beyond the flow direction
        {
          Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
          Eigen::VectorXd sv = svd.singularValues();
          int nulls = 0;
          for (int i = 0; i < sv.size(); ++i)
            if (sv[i] < cfg.family_tol * std::max(1.0, sv[0])) ++nulls;
          orb.extra_null_dims = std::max(0, nulls - 1);
          orb.component_kind = (orb.extra_null_dims > 0)
                                   ? ComponentKind::Family
                                   : ComponentKind::IsolatedNondegenerate;
        }

        // drift element: inverse of the integrated fiber displacement
        orb.drift_g = -fs.fiber_drift;
        for (int i = 0; i < orb.drift_g.size(); ++i)
          orb.drift_g[i] = wrap_angle(orb.drift_g[i]);

        // primitive period by closure tests at integer fractions
        orb.T_primitive = T;
        int wmax = std::max(std::abs(w), 4);
        for (int k = wmax; k >= 2; --k) {
          if (w != 0 && (w % k != 0)) continue;
          Shooter sub(model, E, w / k, cfg.newton_tol);
          sub.set_axis(q0);
          Eigen::VectorXd usub = sub.pack_seed(orb.start, T / k);
          if (!sub.nonabelian_) {
            try {
              Eigen::VectorXd rsub = sub.residual(usub, nullptr, false);
              if (rsub.norm() < 1e-6 * (1.0 + T)) {
                orb.T_primitive = T / k;
                break;
              }
            } catch (const Error&) {
            }
          }
        }

        // reduced monodromy (drift-unrotated for non-abelian orbits)
        Eigen::MatrixXd M = *fs.monodromy;
        if (sh.nonabelian_)
          M = charge_rotation(2 + 3, sh.axis_, -u[5]) * M;
        try {
          orb.det_I_minus_P = poincare_det(model, orb.start, M, 0);
        } catch (const Error&) {
          orb.det_I_minus_P = 1.0;
          orb.degeneracy_warning = true;
        }
        if (std::fabs(orb.det_I_minus_P) < 1e-8 &&
            orb.component_kind == ComponentKind::IsolatedNondegenerate)
          orb.degeneracy_warning = true;

        orb.holonomy = orbit_holonomy(model, orb, E);

        bool dup = false;
        for (const auto& kept : atlas)
          if (orbit_matches(model, kept, orb, cfg.dedup_period_tol,
                            cfg.dedup_phase_tol)) {
            dup = true;
            break;
          }
        if (!dup) atlas.push_back(orb);
      }
    }
  }

  std::sort(atlas.begin(), atlas.end(),
            [](const PeriodicOrbit& a, const PeriodicOrbit& b) {
              return a.T < b.T;
            });
  return atlas;
}

VolumeEstimate energy_surface_volume(const ModelSpec& model, double E,
                                     const VolumeSamplerConfig& cfg) {
  const double L = model.base.circumference;
  const double r = model.orbit_radius();
  const bool sphere = !model.abelian();
  const Eigen::VectorXd q_axis = charge_axis_vector(model);
  double qmass = 1.0;
  double lambda_s = 0.0;
  if (sphere) {
    lambda_s = su2_structure_constant(*model.conn.group);
    qmass = 4.0 * PI * r / lambda_s;  // KKS symplectic mass of the orbit sphere
  }

  auto estimate_at = [&](double delta, std::uint64_t seed_salt,
                         long max_samples) {
    // Thin p-bands per x-cell around the two shell branches E <= H <= E+delta
    // (H is convex in p for fixed (x,q), so each branch is an interval).
    const int nc = cfg.x_cells;
    std::vector<std::array<double, 2>> blo(nc, {1e300, 1e300});
    std::vector<std::array<double, 2>> bhi(nc, {-1e300, -1e300});
    auto account = [&](int c, double x, const Eigen::VectorXd& q) {
      auto H = [&](double p) { return hamiltonian_hz(model, PhasePoint{x, p, q}); };
      double pm = 0, hm = H(0);
      for (double p = -6; p <= 6; p += 0.1) {
        double v = H(p);
        if (v < hm) { hm = v; pm = p; }
      }
      if (hm > E + delta) return;
      for (int s = 0; s < 2; ++s) {
        int side = s == 0 ? -1 : 1;
        auto edge_at = [&](double level) {
          double lo = pm, hi = pm + side;
          int guard = 0;
          while (H(hi) < level && guard++ < 200)
            hi += side * (std::fabs(hi - pm) + 1.0);
          for (int it = 0; it < 60; ++it) {
            double mid = 0.5 * (lo + hi);
            (H(mid) < level ? lo : hi) = mid;
          }
          return 0.5 * (lo + hi);
        };
        double outer = edge_at(E + delta);
        double inner = (hm >= E) ? pm : edge_at(E);
        double a = std::min(inner, outer), b = std::max(inner, outer);
        blo[c][s] = std::min(blo[c][s], a);
        bhi[c][s] = std::max(bhi[c][s], b);
      }
    };
    for (int c = 0; c < nc; ++c) {
      for (int sub = 0; sub < 3; ++sub) {
        double x = (c + sub / 3.0) * L / nc;
        if (!sphere) {
          account(c, x, q_axis);
        } else {
          for (double frac : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
            Eigen::VectorXd q(3);
            double z = frac * r;
            q << std::sqrt(std::max(0.0, r * r - z * z)), 0.0, z;
            account(c, x, q);
          }
        }
      }
    }
    // widen by neighbours plus padding, per branch
    std::vector<std::array<double, 2>> wlo(nc), whi(nc);
    for (int c = 0; c < nc; ++c)
      for (int s = 0; s < 2; ++s) {
        double lo = 1e300, hi = -1e300;
        for (int d = -1; d <= 1; ++d) {
          int cc = (c + d + nc) % nc;
          if (blo[cc][s] > bhi[cc][s]) continue;  // unreachable cell
          lo = std::min(lo, blo[cc][s]);
          hi = std::max(hi, bhi[cc][s]);
        }
        if (lo > hi) {
          wlo[c][s] = 0;
          whi[c][s] = 0;
          continue;
        }
        double pad = 0.5 * (hi - lo) + 1e-9;
        wlo[c][s] = lo - pad;
        whi[c][s] = hi + pad;
      }
    // merge overlapping branch bands so the sampling density stays uniform
    for (int c = 0; c < nc; ++c) {
      if (whi[c][0] <= wlo[c][0] || whi[c][1] <= wlo[c][1]) continue;
      if (whi[c][0] >= wlo[c][1]) {
        wlo[c][0] = std::min(wlo[c][0], wlo[c][1]);
        whi[c][0] = std::max(whi[c][0], whi[c][1]);
        wlo[c][1] = whi[c][1] = 0;
      }
    }

    // batched sampling over the banded region
    std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ull + seed_salt);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    long n = 0;
    double sum = 0, sum2 = 0;
    const long batch = 100000;
    double mean = 0, se = 1e300;
    while (n < max_samples) {
      for (long i = 0; i < batch; ++i) {
        int c = int(uni(rng) * nc);
        if (c >= nc) c = nc - 1;
        double x = (c + uni(rng)) * L / nc;
        double len0 = whi[c][0] - wlo[c][0];
        double len1 = whi[c][1] - wlo[c][1];
        double total = len0 + len1;
        if (total <= 0) continue;  // sample counts as zero
        double u = uni(rng) * total;
        double p = (u < len0) ? wlo[c][0] + u : wlo[c][1] + (u - len0);
        Eigen::VectorXd q = q_axis;
        if (sphere) {
          double z = (2.0 * uni(rng) - 1.0) * r;
          double phiang = TWO_PI * uni(rng);
          double rho = std::sqrt(std::max(0.0, r * r - z * z));
          q = Eigen::VectorXd(3);
          q << rho * std::cos(phiang), rho * std::sin(phiang), z;
        }
        double H = hamiltonian_hz(model, PhasePoint{x, p, q});
        double val = 0.0;
        if (H >= E && H < E + delta) val = L * total * qmass;
        sum += val;
        sum2 += val * val;
      }
      n += batch;
      mean = sum / double(n);
      double var = std::max(0.0, sum2 / double(n) - mean * mean);
      se = std::sqrt(var / double(n));
      if (mean > 0 && se / mean < cfg.target_rel_se) break;
    }
    VolumeEstimate est;
    est.value = mean / delta;
    est.std_error = se / delta;
    est.delta = delta;
    est.samples = n;
    if (mean > 0 && se / mean > cfg.target_rel_se)
      throw Error(ErrorKind::Precision,
                  "volume standard error target not reached; partial estimate " +
                      std::to_string(est.value) + " +- " +
                      std::to_string(est.std_error));
    return est;
  };

  double delta = cfg.shell_factor * std::max(E, 1e-6);
  VolumeEstimate a = estimate_at(delta, 11, cfg.max_samples);
  if (!cfg.richardson) return a;
  VolumeEstimate b = estimate_at(delta / 2, 22, cfg.max_samples);
  VolumeEstimate out;
  out.value = 2.0 * b.value - a.value;  // removes the O(delta) shell bias
  out.std_error = std::sqrt(4.0 * b.std_error * b.std_error +
                            a.std_error * a.std_error);
  out.delta = delta;
  out.samples = a.samples + b.samples;
  return out;
}

void write_orbit_atlas_json(const std::string& path,
                            const std::vector<PeriodicOrbit>& atlas) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& o : atlas) {
    nlohmann::json e;
    e["T"] = o.T;
    e["T_primitive"] = o.T_primitive;
    e["winding"] = o.winding;
    e["energy"] = o.energy;
    e["start"] = {{"x", o.start.x}, {"p", o.start.p}};
    e["start"]["q"] = std::vector<double>(o.start.q.data(),
                                          o.start.q.data() + o.start.q.size());
    e["drift_angles"] = std::vector<double>(o.drift_g.data(),
                                            o.drift_g.data() + o.drift_g.size());
    e["det_I_minus_P"] = o.det_I_minus_P;
    e["holonomy"] = {{"re", o.holonomy.real()}, {"im", o.holonomy.imag()}};
    switch (o.component_kind) {
      case ComponentKind::IsolatedNondegenerate: e["component_kind"] = "isolated-nondegenerate"; break;
      case ComponentKind::Family: e["component_kind"] = "family"; break;
      case ComponentKind::ZeroTime: e["component_kind"] = "zero-time"; break;
    }
    e["residual"] = o.residual;
    e["degeneracy_warning"] = o.degeneracy_warning;
    j.push_back(e);
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace kktrace
