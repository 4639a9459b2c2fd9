#include "kktrace/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace kktrace {

double su2_structure_constant(const GroupData& g) {
  if (g.is_torus() || g.rank() != 1)
    throw Error(ErrorKind::Domain, "structure constant defined for rank-1 non-abelian groups");
  const Weight& a = g.positive_roots()[0];
  return std::sqrt(g.ip(a, a));
}

double torus_generator_norm(const GroupData& g) {
  if (g.is_torus()) return std::sqrt(g.inner_norm());
  return 2.0 / su2_structure_constant(g);  // |coroot|
}

namespace {

// Evaluate H, grad H and (optionally) the Hessian at z = (x, p, q...).
template <int K>
void h_derivatives(const BaseGeometry& geom, const ConnectionSpec& conn,
                   const double* z, double* grad, double* hess /*KxK or null*/) {
  constexpr int D = K - 2;
  if (!hess) {
    using Dn = Dual<K>;
    Dn x = Dn::seed(z[0], 0);
    Dn p = Dn::seed(z[1], 1);
    Dn q[D > 0 ? D : 1];
    for (int i = 0; i < D; ++i) q[i] = Dn::seed(z[2 + i], 2 + i);
    Dn H = hamiltonian_hz_t<Dn>(geom, conn, x, p, q, D);
    for (int i = 0; i < K; ++i) grad[i] = H.d[i];
    return;
  }
  using DD = Dual<K, Dual<K>>;
  DD zz[K];
  for (int i = 0; i < K; ++i) {
    zz[i].v = Dual<K>::seed(z[i], i);
    zz[i].d[i] = Dual<K>(1.0);
  }
  DD H = hamiltonian_hz_t<DD>(geom, conn, zz[0], zz[1], zz + 2, D);
  for (int i = 0; i < K; ++i) {
    grad[i] = H.d[i].v;
    for (int j = 0; j < K; ++j) hess[i * K + j] = H.d[i].d[j];
  }
}

struct RhsContext {
  const ModelSpec* model;
  int qdim;           // 1 (abelian rank 1), rank, or 3
  int drift_dim;      // rank for torus groups, 1 for SU(2)-like
  double lambda_s;    // structure constant (0 for abelian)
  double gen_norm;    // character-unit conversion
  bool track_monodromy;

  int core_dim() const { return 2 + qdim; }
  int state_dim() const {
    int k = core_dim();
    return k + drift_dim + (track_monodromy ? k * k : 0);
  }
};

// Combined right-hand side: core flow, fiber drift quadrature, variational
// system dM/dt = J M when tracked. State layout: [x p q | phi | M columns].
template <int K>
void combined_rhs(const RhsContext& ctx, const double* y, double* dy) {
  constexpr int D = K - 2;
  const BaseGeometry& geom = ctx.model->base;
  const ConnectionSpec& conn = ctx.model->conn;

  double grad[K];
  double hess[K * K];
  h_derivatives<K>(geom, conn, y, grad, ctx.track_monodromy ? hess : nullptr);

  const double xdot = grad[1];
  dy[0] = xdot;
  dy[1] = -grad[0];

  double J[K][K];
  if (ctx.track_monodromy) {
    for (int j = 0; j < K; ++j) {
      J[0][j] = hess[1 * K + j];
      J[1][j] = -hess[0 * K + j];
    }
  }

  bool charge_fixed = true;
  if constexpr (D == 3) {
    if (ctx.lambda_s != 0.0) {
      charge_fixed = false;
      // qdot = lambda_s A(x) xdot (e3 x q)
      const double* q = y + 2;
      double A = conn.A(y[0]);
      double c = ctx.lambda_s * A * xdot;
      double e3q[3] = {-q[1], q[0], 0.0};
      for (int i = 0; i < 3; ++i) dy[2 + i] = c * e3q[i];
      if (ctx.track_monodromy) {
        double Aprime = conn.A.derivative()(y[0]);
        for (int j = 0; j < K; ++j) {
          double dc = ctx.lambda_s * (Aprime * xdot * (j == 0 ? 1.0 : 0.0) +
                                      A * hess[1 * K + j]);
          for (int i = 0; i < 3; ++i) J[2 + i][j] = dc * e3q[i];
        }
        // d(e3 x q)/dq part
        J[2 + 0][2 + 1] += -c;
        J[2 + 1][2 + 0] += c;
      }
    }
  }
  if (charge_fixed) {
    for (int i = 0; i < D; ++i) dy[2 + i] = 0.0;
    if (ctx.track_monodromy)
      for (int i = 0; i < D; ++i)
        for (int j = 0; j < K; ++j) J[2 + i][j] = 0.0;
  }

  // Fiber drift (character units): torus components, or the charge-axis rate.
  double* dphi = dy + K;
  if (ctx.lambda_s == 0.0) {
    for (int a = 0; a < ctx.drift_dim && a < D; ++a)
      dphi[a] = grad[2 + a] / ctx.gen_norm;
  } else if constexpr (D == 3) {
    const double* q = y + 2;
    double qn = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]);
    double rate = 0.0;
    for (int i = 0; i < 3; ++i) rate += (q[i] / qn) * grad[2 + i];
    dphi[0] = rate / ctx.gen_norm;
  }

  if (ctx.track_monodromy) {
    const double* M = y + K + ctx.drift_dim;
    double* dM = dy + K + ctx.drift_dim;
    // column-major: M[(col)*K + row]
    for (int c = 0; c < K; ++c)
      for (int r = 0; r < K; ++r) {
        double acc = 0;
        for (int k = 0; k < K; ++k) acc += J[r][k] * M[c * K + k];
        dM[c * K + r] = acc;
      }
  }
}

using RhsFn = void (*)(const RhsContext&, const double*, double*);

template <int K>
RhsFn rhs_for() {
  return &combined_rhs<K>;
}

// Modified midpoint with n substeps over an interval of length H.
void mmid(const RhsContext& ctx, RhsFn f, const std::vector<double>& y0,
          double H, int n, std::vector<double>& out, long& evals) {
  const std::size_t m = y0.size();
  double h = H / n;
  std::vector<double> ym = y0, yk(m), dz(m);
  f(ctx, y0.data(), dz.data());
  ++evals;
  for (std::size_t i = 0; i < m; ++i) yk[i] = y0[i] + h * dz[i];
  for (int k = 1; k < n; ++k) {
    f(ctx, yk.data(), dz.data());
    ++evals;
    for (std::size_t i = 0; i < m; ++i) {
      double ynext = ym[i] + 2.0 * h * dz[i];
      ym[i] = yk[i];
      yk[i] = ynext;
    }
  }
  f(ctx, yk.data(), dz.data());
  ++evals;
  out.resize(m);
  for (std::size_t i = 0; i < m; ++i)
    out[i] = 0.5 * (ym[i] + yk[i] + h * dz[i]);
}

}  // namespace

WongTangent wong_rhs(const ModelSpec& model, const PhasePoint& pt) {
  HamiltonianGradient g = gradient_hz(model.base, model.conn, pt);
  WongTangent t;
  t.xdot = g.dp;
  t.pdot = -g.dx;
  t.qdot = Eigen::VectorXd::Zero(pt.q.size());
  if (!model.abelian() && pt.q.size() == 3) {
    double lam = su2_structure_constant(*model.conn.group);
    double c = lam * model.conn.A(pt.x) * t.xdot;
    t.qdot[0] = -c * pt.q[1];
    t.qdot[1] = c * pt.q[0];
  }
  return t;
}

FlowState integrate_recorded(const ModelSpec& model, const PhasePoint& start,
                             double T, const IntegrateOptions& opts,
                             std::vector<TrajectorySample>& samples) {
  if (opts.tol < 1e-13 || opts.tol > 1e-6)
    throw Error(ErrorKind::InvalidInput, "integration tol must be in [1e-13, 1e-6]");

  RhsContext ctx;
  ctx.model = &model;
  ctx.qdim = int(start.q.size());
  ctx.track_monodromy = opts.track_monodromy;
  const GroupData& g = *model.conn.group;
  if (model.abelian()) {
    ctx.drift_dim = g.rank();
    ctx.lambda_s = 0.0;
  } else {
    ctx.drift_dim = 1;
    ctx.lambda_s = su2_structure_constant(g);
  }
  ctx.gen_norm = torus_generator_norm(g);

  RhsFn f;
  int K = ctx.core_dim();
  if (K == 3) f = rhs_for<3>();
  else if (K == 5) f = rhs_for<5>();
  else throw Error(ErrorKind::Domain, "unsupported charge dimension");

  const double r0 = start.q.norm();
  const double H0 = hamiltonian_hz(model, start);

  std::vector<double> y(ctx.state_dim(), 0.0);
  y[0] = start.x;
  y[1] = start.p;
  for (int i = 0; i < ctx.qdim; ++i) y[2 + i] = start.q[i];
  if (opts.track_monodromy)
    for (int i = 0; i < K; ++i) y[K + ctx.drift_dim + i * K + i] = 1.0;

  // x is wrapped into [0, L) after each step (the flow is periodic in x) so
  // the error control sees a bounded state; the winding offset restores the
  // unwrapped position for callers.
  double x_offset = 0.0;
  const double Lcirc = model.base.circumference;

  auto record = [&](double t) {
    if (!opts.record_trajectory) return;
    TrajectorySample s;
    s.t = t;
    s.x = y[0] + x_offset;
    s.p = y[1];
    s.q = Eigen::VectorXd(ctx.qdim);
    for (int i = 0; i < ctx.qdim; ++i) s.q[i] = y[2 + i];
    PhasePoint pt{wrap_position(y[0], model.base.circumference), y[1], s.q};
    s.H = hamiltonian_hz(model, pt);
    s.qnorm = s.q.norm();
    samples.push_back(s);
  };

  long evals = 0, steps = 0;
  double t = 0.0;
  const double dir = (T >= 0) ? 1.0 : -1.0;
  double h = dir * std::min(0.1, std::fabs(T));
  if (opts.max_step > 0) h = dir * std::min(std::fabs(h), opts.max_step);
  if (T == 0.0) h = 0.0;

  static const int seq[] = {2, 4, 6, 8, 10, 12, 14, 16};
  const int jmax = 8;
  std::vector<std::vector<double>> tab(jmax);
  std::vector<double> trial;

  record(0.0);
  while (dir * (T - t) > 1e-14 * std::max(1.0, std::fabs(T))) {
    if (std::fabs(h) < 1e-14 * std::max(1.0, std::fabs(T)))
      throw Error(ErrorKind::Numerical,
                  "integration step underflow at t=" + std::to_string(t));
    if (dir * (t + h) > dir * T) h = T - t;

    bool accepted = false;
    int used_j = 0;
    double err = 0.0;
    for (int j = 0; j < jmax; ++j) {
      mmid(ctx, f, y, h, seq[j], trial, evals);
      tab[j] = trial;
      // Neville extrapolation in (h/n)^2 toward h->0
      for (int k = j - 1; k >= 0; --k) {
        double fac = double(seq[j]) / double(seq[k]);
        fac = fac * fac - 1.0;
        for (std::size_t i = 0; i < trial.size(); ++i)
          tab[k][i] = tab[k + 1][i] + (tab[k + 1][i] - tab[k][i]) / fac;
      }
      if (j > 0) {
        // local error controlled per unit time, so the global drift stays
        // at the tolerance level independently of the step count
        double frac = std::min(1.0, std::fabs(h) / std::max(1.0, std::fabs(T)));
        err = 0.0;
        for (std::size_t i = 0; i < trial.size(); ++i) {
          double scale = opts.tol * frac *
                         (1.0 + std::max(std::fabs(y[i]), std::fabs(tab[0][i])));
          err = std::max(err, std::fabs(tab[0][i] - tab[1][i]) / scale);
        }
        if (err <= 1.0) {
          accepted = true;
          used_j = j;
          break;
        }
      }
    }

    if (!accepted) {
      h *= 0.25;
      continue;
    }

    y = tab[0];
    t += h;
    ++steps;
    if (y[0] < 0 || y[0] >= Lcirc) {
      double off = Lcirc * std::floor(y[0] / Lcirc);
      y[0] -= off;
      x_offset += off;
    }
    // keep the charge on the orbit sphere
    if (ctx.lambda_s != 0.0) {
      double qn = 0;
      for (int i = 0; i < ctx.qdim; ++i) qn += y[2 + i] * y[2 + i];
      qn = std::sqrt(qn);
      if (qn > 0)
        for (int i = 0; i < ctx.qdim; ++i) y[2 + i] *= r0 / qn;
    }
    record(t);

    double factor = 5.0;
    if (err > 1e-16)
      factor = 0.9 * std::pow(err, -1.0 / (2.0 * used_j + 1.0));
    h *= std::clamp(factor, 0.2, 5.0);
    if (opts.max_step > 0 && std::fabs(h) > opts.max_step) h = dir * opts.max_step;
  }

  FlowState out;
  Eigen::VectorXd qf(ctx.qdim);
  for (int i = 0; i < ctx.qdim; ++i) qf[i] = y[2 + i];
  out.point = PhasePoint{y[0] + x_offset, y[1], qf};
  out.time = T;
  out.fiber_drift = Eigen::VectorXd(ctx.drift_dim);
  for (int a = 0; a < ctx.drift_dim; ++a) out.fiber_drift[a] = y[K + a];
  if (opts.track_monodromy) {
    Eigen::MatrixXd M(K, K);
    for (int c = 0; c < K; ++c)
      for (int r = 0; r < K; ++r) M(r, c) = y[K + ctx.drift_dim + c * K + r];
    out.monodromy = M;
  }
  out.report.energy = std::fabs(hamiltonian_hz(model, PhasePoint{
                                    wrap_position(y[0], model.base.circumference),
                                    y[1], qf}) - H0);
  out.report.charge_radius = std::fabs(qf.norm() - r0);
  out.report.rhs_evaluations = evals;
  out.report.steps = steps;
  return out;
}

FlowState integrate(const ModelSpec& model, const PhasePoint& start, double T,
                    const IntegrateOptions& opts) {
  std::vector<TrajectorySample> unused;
  IntegrateOptions o = opts;
  o.record_trajectory = false;
  return integrate_recorded(model, start, T, o, unused);
}

void write_trajectory_csv(const std::string& path,
                          const std::vector<TrajectorySample>& samples) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + path);
  out << "t,x,p";
  if (!samples.empty())
    for (int i = 0; i < samples[0].q.size(); ++i) out << ",q" << i;
  out << ",H,qnorm\n";
  char buf[64];
  auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof buf, "%.17g%c", v, sep);
    out << buf;
  };
  for (const auto& s : samples) {
    put(s.t, ',');
    put(s.x, ',');
    put(s.p, ',');
    for (int i = 0; i < s.q.size(); ++i) put(s.q[i], ',');
    put(s.H, ',');
    put(s.qnorm, '\n');
  }
}

}  // namespace kktrace
