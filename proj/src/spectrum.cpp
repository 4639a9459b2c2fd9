#include "kktrace/spectrum.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <functional>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "kktrace/dynamics.hpp"

namespace kktrace {

long SpectrumTable::count_in(double lo, double hi) const {
  long n = 0;
  for (const auto& e : eigenvalues)
    if (e.lambda >= lo && e.lambda <= hi) n += e.multiplicity;
  return n;
}

namespace {

// Fiber data entering the scalar reduction: vertical momentum (orthonormal
// units) and multiplicity (copies of kappa_m) per weight of the level-m rep.
struct FiberMode {
  double momentum;
  long multiplicity;
};

std::vector<FiberMode> fiber_modes(const GroupData& g, const OrbitWeight& w) {
  double gen = torus_generator_norm(g);
  WeightSystem ws = weight_system(g, w);
  std::map<long, long> by_coord;  // angle coordinate along the torus axis
  for (const auto& e : ws.entries)
    by_coord[e.angle_coords[e.angle_coords.size() - 1]] += e.multiplicity;
  std::vector<FiberMode> out;
  for (auto& [n, mult] : by_coord)
    out.push_back({double(n) / gen, mult});
  return out;
}

void push_sorted(std::vector<SpectrumEntry>& entries, double cluster_tol) {
  std::sort(entries.begin(), entries.end(),
            [](const SpectrumEntry& a, const SpectrumEntry& b) {
              return a.lambda < b.lambda;
            });
  std::vector<SpectrumEntry> merged;
  for (const auto& e : entries) {
    if (!merged.empty() && std::fabs(e.lambda - merged.back().lambda) < cluster_tol) {
      // weighted representative keeps clusters stable
      auto& b = merged.back();
      b.lambda = (b.lambda * double(b.multiplicity) + e.lambda * double(e.multiplicity)) /
                 double(b.multiplicity + e.multiplicity);
      b.multiplicity += e.multiplicity;
    } else {
      merged.push_back(e);
    }
  }
  entries = std::move(merged);
}

}  // namespace

SpectrumTable flat_spectrum(const FlatParams& params, int m, double window_lo,
                            double window_hi, long max_k) {
  if (!params.group) throw Error(ErrorKind::InvalidInput, "flat model needs a group");
  if (std::fabs(params.beta) >= 1.0)
    throw Error(ErrorKind::InvalidInput, "flat model requires |beta| < 1");
  if (window_hi <= window_lo)
    throw Error(ErrorKind::InvalidInput, "empty spectral window");

  const GroupData& g = *params.group;
  OrbitWeight w{params.lambda0, m};
  double cm = casimir_eigenvalue(g, w);
  auto fibers = fiber_modes(g, w);

  double span = std::max(std::fabs(window_lo), std::fabs(window_hi));
  double ktmax = (span + std::sqrt(std::max(cm, 0.0))) / (1.0 - std::fabs(params.beta)) + 2.0;
  double fibshift = 0;
  for (const auto& f : fibers)
    fibshift = std::max(fibshift, std::fabs(params.alpha * f.momentum));
  if (ktmax + fibshift > double(max_k))
    throw Error(ErrorKind::Incomplete, "window too large for the k cutoff");

  SpectrumTable table;
  table.m = m;
  table.window_lo = window_lo;
  table.window_hi = window_hi;
  table.method = SpectrumMethod::ClosedForm;

  std::vector<SpectrumEntry> entries;
  for (const auto& f : fibers) {
    double shift = params.alpha * f.momentum;
    long klo = long(std::floor(-ktmax + shift)), khi = long(std::ceil(ktmax + shift));
    for (long k = klo; k <= khi; ++k) {
      double kt = double(k) - shift;
      double root = std::sqrt(kt * kt + cm);
      for (int s = -1; s <= 1; s += 2) {
        double lam = params.beta * kt + double(s) * root;
        if (lam >= window_lo && lam <= window_hi)
          entries.push_back({lam, f.multiplicity});
      }
    }
  }
  push_sorted(entries, 1e-10);
  table.eigenvalues = std::move(entries);
  return table;
}

namespace {

// Toeplitz multiplication matrix of a smooth periodic function on the
// Fourier basis restricted to the given mode list. Smooth coefficients decay
// fast, so lags are grown adaptively until the tail is at rounding level
// instead of covering the full requested span.
class ToeplitzBuilder {
public:
  ToeplitzBuilder(const std::function<double(double)>& f, double L,
                  int sample_grid, int max_lag) {
    int cap = std::min(max_lag, 48);
    for (;;) {
      kmax_ = cap;
      int n = std::max({sample_grid, 4 * cap + 8, 64});
      std::vector<double> samples(n);
      for (int i = 0; i < n; ++i) samples[i] = f(double(i) * L / n);
      coeffs_ = fourier_coefficients(samples, cap);
      double top = 1e-300;
      for (const auto& c : coeffs_) top = std::max(top, std::abs(c));
      double tail = 0;
      for (int k = std::max(0, cap - 4); k <= cap; ++k)
        tail = std::max(tail, std::abs(coeffs_[k + kmax_]));
      if (cap >= max_lag || tail < 1e-13 * top) break;
      cap = std::min(max_lag, 2 * cap);
    }
  }

  complexd coeff(long lag) const {
    if (std::labs(lag) > kmax_) return complexd(0, 0);
    return coeffs_[lag + kmax_];
  }

  Eigen::MatrixXcd matrix(const std::vector<long>& modes) const {
    int n = int(modes.size());
    Eigen::MatrixXcd M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = coeff(modes[i] - modes[j]);
    return M;
  }

private:
  int kmax_;
  std::vector<complexd> coeffs_;
};

struct ScalarAssembly {
  // Pencil matrices for lambda^2 A + lambda B + L = 0 on the Fourier basis
  // (weak form, Hermitian structure). Also the energy-form matrices.
  Eigen::MatrixXcd A, B, L;
  Eigen::MatrixXcd Qmass, Qrest;
  std::vector<long> modes;
  double wavenumber = 1.0;  // 2 pi / circumference
  bool has_shift = false;
};

ScalarAssembly assemble_scalar(const ModelSpec& model, double nu, double cm,
                               const std::vector<long>& modes, int sample_grid) {
  const BaseGeometry& b = model.base;
  const double L = b.circumference;
  ScalarAssembly out;
  out.modes = modes;
  out.wavenumber = TWO_PI / L;

  long maxmode = 0, minmode = 0;
  for (long k : modes) {
    maxmode = std::max(maxmode, k);
    minmode = std::min(minmode, k);
  }
  int lag = int(maxmode - minmode + 2);

  auto Nf = [&](double x) { return b.N(x); };
  auto hf = [&](double x) { return b.h(x); };
  auto betaf = [&](double x) { return b.beta(x); };
  auto wf = [&](double x) { return Nf(x) * std::sqrt(hf(x)); };
  int sg = sample_grid;

  ToeplitzBuilder mass([&](double x) { return wf(x) / (Nf(x) * Nf(x)); }, L, sg, lag);
  ToeplitzBuilder kinG([&](double x) {
    double be = betaf(x);
    return wf(x) * (1.0 / hf(x) - be * be / (Nf(x) * Nf(x)));
  }, L, sg, lag);
  ToeplitzBuilder pot([&](double x) { return wf(x) * (cm + b.V(x)); }, L, sg, lag);
  ToeplitzBuilder shift([&](double x) { return wf(x) * betaf(x) / (Nf(x) * Nf(x)); },
                        L, sg, lag);
  ToeplitzBuilder conn([&](double x) { return model.conn.A(x); }, L, sg, lag);
  ToeplitzBuilder qmassb([&](double x) { return std::sqrt(hf(x)) / Nf(x); }, L, sg, lag);
  ToeplitzBuilder qpotb([&](double x) { return std::sqrt(hf(x)) / Nf(x) * (cm + b.V(x)); },
                        L, sg, lag);

  int nn = int(modes.size());
  // covariant derivative Dtilde = diag(i kappa_k) - i nu A(x)
  Eigen::MatrixXcd Dt = Eigen::MatrixXcd::Zero(nn, nn);
  for (int i = 0; i < nn; ++i)
    Dt(i, i) = complexd(0, out.wavenumber * double(modes[i]));
  if (nu != 0.0 && !model.conn.A.is_constant())
    Dt -= complexd(0, nu) * conn.matrix(modes);
  else if (nu != 0.0)
    Dt -= complexd(0, nu * model.conn.A.constant_part()) *
          Eigen::MatrixXcd::Identity(nn, nn);

  Eigen::MatrixXcd Mw = mass.matrix(modes);
  Eigen::MatrixXcd G = kinG.matrix(modes);
  out.A = -Mw;
  out.L = Dt.adjoint() * G * Dt + pot.matrix(modes);
  out.has_shift = !(model.base.eta.is_constant() &&
                    model.base.eta.constant_part() == 0.0);
  if (out.has_shift) {
    // b = g^{tx} = -beta/N^2; weak form B = i (M_{wb} Dt - Dt^* M_{wb})
    Eigen::MatrixXcd S = shift.matrix(modes);
    out.B = complexd(0, -1) * (S * Dt - Dt.adjoint() * S);
  } else {
    out.B = Eigen::MatrixXcd::Zero(nn, nn);
  }
  out.Qmass = qmassb.matrix(modes);
  out.Qrest = Dt.adjoint() * kinG.matrix(modes) * Dt + qpotb.matrix(modes);
  return out;
}

struct ScalarEigs {
  std::vector<double> real;             // real eigenvalues
  std::vector<Eigen::VectorXcd> vecs;   // matching eigenvectors (may be empty)
  std::vector<complexd> nonreal;
};

ScalarEigs solve_scalar(const ScalarAssembly& a, double nonreal_tol,
                        bool want_vecs) {
  ScalarEigs out;
  int n = int(a.modes.size());
  if (!a.has_shift) {
    // lambda^2 (w/N^2) v = L v : definite Hermitian pencil
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> es(
        a.L, -a.A, want_vecs ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
      throw Error(ErrorKind::Numerical, "Hermitian pencil eigensolve failed");
    double mu_scale = 1.0;
    for (int i = 0; i < n; ++i)
      mu_scale = std::max(mu_scale, std::fabs(es.eigenvalues()[i]));
    const double mu_zero = 1e-11 * mu_scale;  // lambda^2 ~ 0 counts as real
    for (int i = 0; i < n; ++i) {
      double mu = es.eigenvalues()[i];  // lambda^2
      if (mu < 0 && mu > -mu_zero) mu = 0.0;
      if (mu >= 0) {
        double lam = std::sqrt(mu);
        out.real.push_back(lam);
        out.real.push_back(-lam);
        if (want_vecs) {
          out.vecs.push_back(es.eigenvectors().col(i));
          out.vecs.push_back(es.eigenvectors().col(i));
        }
      } else {
        double lam = std::sqrt(-mu);
        out.nonreal.push_back(complexd(0, lam));
        out.nonreal.push_back(complexd(0, -lam));
      }
    }
    return out;
  }

  // companion linearization [[0, I], [-A^-1 L, -A^-1 B]]
  Eigen::MatrixXcd Ainv = a.A.fullPivLu().inverse();
  Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
  C.block(0, n, n, n) = Eigen::MatrixXcd::Identity(n, n);
  C.block(n, 0, n, n) = -Ainv * a.L;
  C.block(n, n, n, n) = -Ainv * a.B;
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(C, want_vecs);
  if (es.info() != Eigen::Success)
    throw Error(ErrorKind::Numerical, "companion eigensolve failed");
  for (int i = 0; i < 2 * n; ++i) {
    complexd lam = es.eigenvalues()[i];
    if (std::fabs(lam.imag()) <= nonreal_tol) {
      out.real.push_back(lam.real());
      if (want_vecs) out.vecs.push_back(es.eigenvectors().col(i).head(n));
    } else {
      out.nonreal.push_back(lam);
    }
  }
  return out;
}

// Fourier mode list for the window, optionally band-limited using the local
// wavenumber range (beta == 0, constant A fast path).
std::vector<long> mode_list(const ModelSpec& model, double nu, double cm,
                            double window_lo, double window_hi, int grid,
                            int band_buffer) {
  const double wn = TWO_PI / model.base.circumference;
  if (band_buffer <= 0) {
    int K = grid / 2;
    std::vector<long> modes;
    for (long k = -K; k <= K; ++k) modes.push_back(k);
    return modes;
  }
  if (!model.conn.A.is_constant())
    throw Error(ErrorKind::InvalidInput, "band-limited path requires constant A");
  double shift = model.conn.A.constant_part() * nu;
  double span = std::max(std::fabs(window_lo), std::fabs(window_hi));
  double lo_abs = (window_lo <= 0 && window_hi >= 0)
                      ? 0.0
                      : std::min(std::fabs(window_lo), std::fabs(window_hi));
  double kapmax = 0, kapmin = 1e300;
  for (int i = 0; i < model.base.grid; ++i) {
    double x = double(i) * model.base.circumference / model.base.grid;
    double N = model.base.N(x), h = model.base.h(x);
    double Vx = model.base.V(x);
    double k2hi = h * (span * span / (N * N) - cm - Vx);
    double k2lo = h * (lo_abs * lo_abs / (N * N) - cm - Vx);
    kapmax = std::max(kapmax, k2hi > 0 ? std::sqrt(k2hi) : 0.0);
    kapmin = std::min(kapmin, k2lo > 0 ? std::sqrt(k2lo) : 0.0);
  }
  kapmax /= wn;  // to integer mode units
  kapmin /= wn;
  std::vector<long> modes;
  long lo1 = long(std::floor(-kapmax + shift)) - band_buffer;
  long hi1 = long(std::ceil(-kapmin + shift)) + band_buffer;
  long lo2 = long(std::floor(kapmin + shift)) - band_buffer;
  long hi2 = long(std::ceil(kapmax + shift)) + band_buffer;
  for (long k = lo1; k <= hi1; ++k) modes.push_back(k);
  for (long k = std::max(lo2, hi1 + 1); k <= hi2; ++k) modes.push_back(k);
  return modes;
}

}  // namespace

SpectrumTable generic_spectrum_1d(const ModelSpec& model, int m,
                                  double window_lo, double window_hi,
                                  const Spectrum1dOptions& opts) {
  if (window_hi <= window_lo)
    throw Error(ErrorKind::InvalidInput, "empty spectral window");
  const GroupData& g = *model.conn.group;
  OrbitWeight w{model.orbit.lambda0, m};
  double cm = casimir_eigenvalue(g, w);

  std::vector<FiberMode> fibers;
  if (model.abelian()) {
    double gen = torus_generator_norm(g);
    Eigen::VectorXd ac = g.angle_coordinates(Eigen::VectorXd(double(m) * model.orbit.lambda0));
    fibers.push_back({ac[ac.size() - 1] / gen, 1});
  } else {
    if (!model.conn.A.is_constant())
      throw Error(ErrorKind::InvalidInput,
                  "variable connections for non-abelian groups are not supported");
    fibers = fiber_modes(g, w);
  }

  SpectrumTable table;
  table.m = m;
  table.window_lo = window_lo;
  table.window_hi = window_hi;
  table.method = SpectrumMethod::Discretized;
  table.grid = opts.grid;

  std::vector<SpectrumEntry> entries;
  auto run_all = [&](int band_buffer, int grid,
                     std::vector<SpectrumEntry>& into,
                     std::vector<ModeFunction>* modes_out) {
    for (const auto& f : fibers) {
      std::vector<long> modes = mode_list(model, f.momentum, cm, window_lo,
                                          window_hi, grid, band_buffer);
      ScalarAssembly a =
          assemble_scalar(model, f.momentum, cm, modes, model.base.grid);
      ScalarEigs eig = solve_scalar(a, opts.nonreal_tol, opts.keep_modes);
      for (std::size_t i = 0; i < eig.real.size(); ++i) {
        double lam = eig.real[i];
        if (lam < window_lo || lam > window_hi) continue;
        into.push_back({lam, f.multiplicity});
        if (modes_out && opts.keep_modes && i < eig.vecs.size()) {
          ModeFunction mf;
          mf.m = m;
          mf.lambda = lam;
          mf.fiber_momentum = f.momentum;
          mf.casimir = cm;
          mf.coeffs = eig.vecs[i];
          complexd q = (eig.vecs[i].adjoint() *
                        (lam * lam * a.Qmass + a.Qrest) * eig.vecs[i])(0, 0);
          mf.q_value = q.real();
          if (mf.q_value > 1e-12) {
            mf.coeffs /= std::sqrt(mf.q_value);
          }
          modes_out->push_back(mf);
        }
      }
      for (const auto& z : eig.nonreal) table.nonreal.push_back(z);
    }
  };

  run_all(opts.band_buffer, opts.grid, entries, opts.modes_out);
  push_sorted(entries, opts.cluster_tol);
  table.eigenvalues = entries;

  if (opts.certify) {
    std::vector<SpectrumEntry> wide;
    int buf2 = opts.band_buffer > 0 ? 2 * opts.band_buffer : 0;
    int grid2 = opts.band_buffer > 0 ? opts.grid : 2 * opts.grid;
    run_all(buf2, grid2, wide, nullptr);
    push_sorted(wide, opts.cluster_tol);
    // compare counts away from the window edges to avoid flicker there
    double margin = 1e-6 * (1.0 + window_hi - window_lo);
    long c1 = 0, c2 = 0;
    for (const auto& e : table.eigenvalues)
      if (e.lambda > window_lo + margin && e.lambda < window_hi - margin)
        c1 += e.multiplicity;
    for (const auto& e : wide)
      if (e.lambda > window_lo + margin && e.lambda < window_hi - margin)
        c2 += e.multiplicity;
    if (c1 != c2)
      throw Error(ErrorKind::Incomplete,
                  "window count not stable under refinement (" +
                      std::to_string(c1) + " vs " + std::to_string(c2) +
                      ") for m=" + std::to_string(m));
    double worst = 0;
    for (std::size_t i = 0; i < table.eigenvalues.size() && i < wide.size(); ++i)
      worst = std::max(worst, std::fabs(table.eigenvalues[i].lambda - wide[i].lambda));
    table.convergence_estimate = worst;
  }
  return table;
}

double energy_form(const ModelSpec& model, const ModeFunction& mode) {
  int n = int(mode.coeffs.size());
  if (n == 0) return 0.0;
  int K = (n - 1) / 2;
  std::vector<long> modes;
  for (long k = -K; k <= K; ++k) modes.push_back(k);
  ScalarAssembly a = assemble_scalar(model, mode.fiber_momentum, mode.casimir,
                                     modes, model.base.grid);
  complexd q = (mode.coeffs.adjoint() *
                (mode.lambda * mode.lambda * a.Qmass + a.Qrest) * mode.coeffs)(0, 0);
  return q.real();
}

PositivityScan positivity_threshold(const ModelSpec& model, int m_max,
                                    double window_halfwidth,
                                    const Spectrum1dOptions& opts) {
  PositivityScan scan;
  for (int m = 1; m <= m_max; ++m) {
    Spectrum1dOptions o = opts;
    o.keep_modes = true;
    std::vector<ModeFunction> modes;
    o.modes_out = &modes;
    SpectrumTable t =
        generic_spectrum_1d(model, m, -window_halfwidth, window_halfwidth, o);
    PositivityScan::LevelReport rep;
    rep.m = m;
    rep.nonreal_count = long(t.nonreal.size());
    rep.all_real = t.nonreal.empty();
    rep.min_q = 1e300;
    rep.all_q_positive = true;
    for (const auto& mf : modes) {
      // q_value is the pre-normalization energy form
      rep.min_q = std::min(rep.min_q, mf.q_value);
      if (mf.q_value <= 1e-10) rep.all_q_positive = false;
    }
    if (modes.empty()) rep.min_q = 0;
    scan.levels.push_back(rep);
  }
  int m0 = -1;
  for (int m = m_max; m >= 1; --m) {
    const auto& rep = scan.levels[m - 1];
    if (rep.all_real && rep.all_q_positive)
      m0 = m;
    else
      break;
  }
  scan.m0 = m0;
  if (m0 < 0)
    throw Error(ErrorKind::Precision,
                "no positivity threshold found up to m_max=" + std::to_string(m_max));
  return scan;
}

FactorizationReport factorization_check(const FlatParams& params, int m,
                                        double window_lo, double window_hi) {
  if (!params.group || params.group->is_torus())
    throw Error(ErrorKind::InvalidInput, "factorization check needs a non-abelian group");
  if (params.alpha != 0.0)
    throw Error(ErrorKind::InvalidInput,
                "factorization check is defined for zero-flux flat models");

  FactorizationReport rep;
  rep.m = m;
  OrbitWeight w{params.lambda0, m};
  rep.dm = weyl_dimension(*params.group, w);

  SpectrumTable hm = flat_spectrum(params, m, window_lo, window_hi);

  // scalar reduced problem: same dispersion, single component
  double cm = casimir_eigenvalue(*params.group, w);
  std::vector<SpectrumEntry> scalar;
  double span = std::max(std::fabs(window_lo), std::fabs(window_hi));
  long kt = long((span + std::sqrt(cm)) / (1.0 - std::fabs(params.beta))) + 2;
  for (long k = -kt; k <= kt; ++k) {
    double root = std::sqrt(double(k) * double(k) + cm);
    for (int s = -1; s <= 1; s += 2) {
      double lam = params.beta * double(k) + double(s) * root;
      if (lam >= window_lo && lam <= window_hi) scalar.push_back({lam, 1});
    }
  }
  push_sorted(scalar, 1e-10);

  rep.exact = (hm.eigenvalues.size() == scalar.size());
  for (std::size_t i = 0; i < std::min(hm.eigenvalues.size(), scalar.size()); ++i) {
    FactorizationReport::Line line;
    line.lambda = hm.eigenvalues[i].lambda;
    line.hm_multiplicity = hm.eigenvalues[i].multiplicity;
    line.bundle_multiplicity = scalar[i].multiplicity;
    line.ok = (std::fabs(hm.eigenvalues[i].lambda - scalar[i].lambda) < 1e-9) &&
              (line.hm_multiplicity == rep.dm * line.bundle_multiplicity);
    if (!line.ok) rep.exact = false;
    rep.lines.push_back(line);
  }
  return rep;
}

void write_spectrum_csv(const std::string& path,
                        const std::vector<SpectrumTable>& tables) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + path);
  out << "m,lambda,multiplicity,method\n";
  char buf[96];
  for (const auto& t : tables) {
    const char* method = t.method == SpectrumMethod::ClosedForm ? "closed-form"
                                                                : "discretized";
    for (const auto& e : t.eigenvalues) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%ld,%s\n", t.m, e.lambda,
                    e.multiplicity, method);
      out << buf;
    }
  }
  std::ofstream out2(path + ".nonreal.csv");
  out2 << "m,re,im\n";
  for (const auto& t : tables)
    for (const auto& z : t.nonreal) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", t.m, z.real(), z.imag());
      out2 << buf;
    }
}

}  // namespace kktrace
