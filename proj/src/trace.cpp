#include "kktrace/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace kktrace {

TraceSeries mu(const std::vector<SpectrumTable>& spectra, double E,
               const TestFunction& phi) {
  if (spectra.empty()) throw Error(ErrorKind::InvalidInput, "no spectra");
  TraceSeries out;
  out.E = E;
  out.phi = phi;
  out.m_lo = spectra.front().m;
  out.values.resize(spectra.size());

  const double R = phi.hat_radius();
  for (std::size_t i = 0; i < spectra.size(); ++i) {
    const SpectrumTable& t = spectra[i];
    if (t.m != out.m_lo + int(i))
      throw Error(ErrorKind::InvalidInput, "spectra must be consecutive in m");
    double center = double(t.m) * E;
    if (t.window_lo > center - R || t.window_hi < center + R)
      throw Error(ErrorKind::Incomplete,
                  "spectral window does not cover mE +- tail radius at m=" +
                      std::to_string(t.m));
    complexd acc(0, 0);
    for (const auto& e : t.eigenvalues)
      acc += double(e.multiplicity) * phi.phi_hat(e.lambda - center);
    // Gaussian tail certificate for the omitted part of the spectrum
    long in_window = t.count_in(t.window_lo, t.window_hi);
    double density = double(in_window) / std::max(1.0, t.window_hi - t.window_lo);
    double edge = std::min(center - t.window_lo, t.window_hi - center);
    double u = phi.sigma * edge;
    double tail = 2.0 * density * std::sqrt(TWO_PI) * phi.sigma *
                  std::exp(-0.5 * u * u) / std::max(phi.sigma * phi.sigma, 1e-12);
    if (tail > 1e-10 * std::max(std::abs(acc), 1e-6))
      throw Error(ErrorKind::Incomplete,
                  "Gaussian tail bound exceeds 1e-10 of the value at m=" +
                      std::to_string(t.m));
    out.values[i] = acc;
  }
  return out;
}

WeylFit weyl_fit(const TraceSeries& series) {
  const int len = int(series.values.size());
  if (len < 20)
    throw Error(ErrorKind::InvalidInput, "weyl_fit needs at least 20 points");
  int start = len / 2;
  std::vector<double> xs, ys;
  for (int i = start; i < len; ++i) {
    double a = std::abs(series.values[i]);
    if (a <= 0) continue;
    xs.push_back(std::log(double(series.m_lo + i)));
    ys.push_back(std::log(a));
  }
  int n = int(xs.size());
  if (n < 10) throw Error(ErrorKind::Numerical, "too many vanishing values");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  double det = n * sxx - sx * sx;
  WeylFit fit;
  fit.exponent = (n * sxy - sx * sy) / det;
  double intercept = (sy * sxx - sx * sxy) / det;
  fit.coefficient = std::exp(intercept);

  double ss = 0, scale = 0;
  for (int i = 0; i < n; ++i) {
    double r = ys[i] - (fit.exponent * xs[i] + intercept);
    ss += r * r;
    scale += ys[i] * ys[i];
  }
  double sigma2 = ss / std::max(1, n - 2);
  fit.exponent_halfwidth = 2.0 * std::sqrt(sigma2 * n / det);

  // residual relative to the fitted magnitudes (linear scale)
  double num = 0, den = 0;
  for (int i = 0; i < n; ++i) {
    double pred = std::exp(fit.exponent * xs[i] + intercept);
    double obs = std::exp(ys[i]);
    num += (obs - pred) * (obs - pred);
    den += obs * obs;
  }
  fit.rel_residual = std::sqrt(num / std::max(den, 1e-300));
  fit.reliable = fit.rel_residual <= 0.5;
  return fit;
}

CndEstimate calibrate_cnd(const WeylFit& fit, const TraceSeries& series,
                          double volume, double volume_rel_error) {
  if (!fit.reliable)
    throw Error(ErrorKind::Precision, "weyl fit unreliable; cannot calibrate C");
  double phi0 = std::abs(series.phi.phi(0.0));
  if (phi0 <= 0 || volume <= 0)
    throw Error(ErrorKind::InvalidInput, "calibration needs phi(0) != 0 and Vol > 0");
  CndEstimate c;
  c.value = fit.coefficient / (phi0 * volume);
  c.rel_error = std::sqrt(volume_rel_error * volume_rel_error +
                          fit.rel_residual * fit.rel_residual /
                              std::max(1.0, double(series.values.size()) / 2.0));
  return c;
}

namespace {

complexd tone_coefficient(const std::vector<complexd>& r, int m_lo, double theta) {
  complexd acc(0, 0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    double ph = -theta * double(m_lo + int(i));
    acc += r[i] * complexd(std::cos(ph), std::sin(ph));
  }
  return acc / double(r.size());
}

}  // namespace

GutzwillerFit gutzwiller_fit(const TraceSeries& series, const WeylFit& weyl,
                             const std::vector<PeriodicOrbit>& atlas) {
  const int M = int(series.values.size());
  if (M < 16) throw Error(ErrorKind::InvalidInput, "need at least 16 m-values");

  std::vector<complexd> resid(M);
  for (int i = 0; i < M; ++i) {
    double mm = double(series.m_lo + i);
    resid[i] = series.values[i] -
               complexd(weyl.coefficient * std::pow(mm, weyl.exponent), 0.0);
  }

  GutzwillerFit fit;
  fit.bin_width = TWO_PI / double(M);

  // dense scan of the one-sided coefficient over angle
  const int grid = 16 * M;
  std::vector<double> mag(grid);
  for (int j = 0; j < grid; ++j)
    mag[j] = std::abs(tone_coefficient(resid, series.m_lo, TWO_PI * j / grid));

  // refine a local maximum near theta by golden-section ascent
  auto refine = [&](double theta) {
    double a = theta - TWO_PI / grid, b = theta + TWO_PI / grid;
    for (int it = 0; it < 60; ++it) {
      double m1 = a + (b - a) * 0.382, m2 = a + (b - a) * 0.618;
      double f1 = std::abs(tone_coefficient(resid, series.m_lo, m1));
      double f2 = std::abs(tone_coefficient(resid, series.m_lo, m2));
      if (f1 < f2) a = m1; else b = m2;
    }
    return 0.5 * (a + b);
  };

  // orbit-predicted angles, both orientations
  struct Cand {
    int orbit;
    int orientation;
    double angle;
  };
  std::vector<Cand> cands;
  for (std::size_t oi = 0; oi < atlas.size(); ++oi) {
    double a = std::arg(atlas[oi].holonomy);
    cands.push_back({int(oi), +1, wrap_angle(a)});
    cands.push_back({int(oi), -1, wrap_angle(-a)});
  }

  // detect peaks: local maxima well above the median level
  std::vector<double> sortedmag = mag;
  std::sort(sortedmag.begin(), sortedmag.end());
  double floor_level = sortedmag[grid / 2];
  double top = sortedmag.back();
  double thresh = std::max(4.0 * floor_level, 0.05 * top);

  std::vector<double> peak_angles;
  for (int j = 0; j < grid; ++j) {
    double prev = mag[(j + grid - 1) % grid], next = mag[(j + 1) % grid];
    if (mag[j] > thresh && mag[j] >= prev && mag[j] > next)
      peak_angles.push_back(refine(TWO_PI * j / grid));
  }
  // strongest-first suppression: a candidate within the Dirichlet-kernel
  // leakage envelope of already kept peaks is a sidelobe, not an orbit
  auto dirichlet = [&](double dtheta) {
    double s = std::sin(0.5 * dtheta);
    if (std::fabs(s) < 1e-12) return 1.0;
    return std::fabs(std::sin(0.5 * M * dtheta) / (M * s));
  };
  std::sort(peak_angles.begin(), peak_angles.end(), [&](double a, double b) {
    return std::abs(tone_coefficient(resid, series.m_lo, a)) >
           std::abs(tone_coefficient(resid, series.m_lo, b));
  });
  std::vector<double> dedup;
  for (double a : peak_angles) {
    double ca = std::abs(tone_coefficient(resid, series.m_lo, a));
    double leakage = 0;
    bool shadowed = false;
    for (double kept : dedup) {
      double d = angle_dist(a, kept);
      if (d < fit.bin_width) shadowed = true;
      leakage += std::abs(tone_coefficient(resid, series.m_lo, kept)) *
                 dirichlet(d) * 1.8;
    }
    if (!shadowed && ca > leakage) dedup.push_back(a);
  }

  for (double a : dedup) {
    complexd c = tone_coefficient(resid, series.m_lo, a);
    GutzwillerPeak pk;
    pk.angle = wrap_angle(a);
    pk.raw_coefficient = std::abs(c);
    pk.amplitude = std::abs(c) / TWO_PI;
    pk.phase = std::arg(c);

    const Cand* best = nullptr;
    double bestd = 1e300;
    for (const auto& cd : cands) {
      double d = angle_dist(a, cd.angle);
      if (d < bestd) {
        bestd = d;
        best = &cd;
      }
    }
    if (best && bestd <= fit.bin_width) {
      const PeriodicOrbit& orb = atlas[best->orbit];
      pk.orbit_index = best->orbit;
      pk.orientation = best->orientation;
      double w = std::abs(series.phi.phi(orb.T_primitive));
      double det = std::sqrt(std::fabs(orb.det_I_minus_P));
      pk.predicted_amplitude =
          (det > 1e-12) ? (orb.T_primitive / TWO_PI) * w / det : 0.0;
      pk.amplitude_ratio = (pk.predicted_amplitude > 0)
                               ? pk.amplitude / pk.predicted_amplitude
                               : 0.0;
      fit.peaks.push_back(pk);
    } else {
      fit.unmatched_angles.push_back(pk.angle);
    }
  }
  std::sort(fit.peaks.begin(), fit.peaks.end(),
            [](const GutzwillerPeak& x, const GutzwillerPeak& y) {
              return x.amplitude > y.amplitude;
            });
  return fit;
}

std::vector<complexd> generating_function(const TraceSeries& series,
                                          int theta_grid, double damping_r) {
  if (!(damping_r > 0 && damping_r < 1))
    throw Error(ErrorKind::InvalidInput, "damping r must be in (0,1)");
  std::vector<complexd> out(theta_grid);
  for (int j = 0; j < theta_grid; ++j) {
    double theta = TWO_PI * double(j) / theta_grid;
    complexd acc(0, 0);
    double rm = std::pow(damping_r, double(series.m_lo));
    for (std::size_t i = 0; i < series.values.size(); ++i) {
      double m = double(series.m_lo + int(i));
      double ph = m * theta;
      acc += series.values[i] * rm * complexd(std::cos(ph), std::sin(ph));
      rm *= damping_r;
    }
    out[j] = acc;
  }
  return out;
}

SingularityFit extract_singularity(const TraceSeries& series, double s0,
                                   double cutoff, double damping_r) {
  const int mhi = series.m_hi();
  const int grid = std::max(4096, 8 * mhi);

  // smooth compactly supported bump, identically shaped around s0
  auto bump = [&](double theta) {
    double u = angle_dist(theta, s0) / cutoff;
    if (u >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - u * u));
  };

  std::vector<complexd> ups = generating_function(series, grid, damping_r);

  int xi_max = std::max(16, mhi / 2);
  std::vector<double> xs, ys;
  std::vector<complexd> tvals(xi_max + 1);
  for (int xi = 1; xi <= xi_max; ++xi) {
    complexd acc(0, 0);
    for (int j = 0; j < grid; ++j) {
      double theta = TWO_PI * double(j) / grid;
      double ph = -double(xi) * theta;
      acc += bump(theta) * ups[j] * complexd(std::cos(ph), std::sin(ph));
    }
    acc /= double(grid);  // (1/2pi) integral
    // recenter and undo the Abel damping
    double ph = s0 * double(xi);
    acc *= complexd(std::cos(ph), std::sin(ph));
    acc *= std::pow(damping_r, -double(xi));
    tvals[xi] = acc;
  }

  for (int xi = xi_max / 4; xi <= xi_max; ++xi) {
    double a = std::abs(tvals[xi]);
    if (a > 1e-300) {
      xs.push_back(std::log(double(xi)));
      ys.push_back(std::log(a));
    }
  }
  if (xs.size() < 8)
    throw Error(ErrorKind::Numerical, "not enough transform points for the fit");

  int n = int(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  double det = n * sxx - sx * sx;
  SingularityFit fit;
  fit.degree = (n * sxy - sx * sy) / det;
  double ss = 0;
  for (int i = 0; i < n; ++i) {
    double r = ys[i] - (fit.degree * xs[i] + (sy - fit.degree * sx) / n);
    ss += r * r;
  }
  fit.fit_residual = std::sqrt(ss / n);
  fit.classical = fit.fit_residual <= 0.2;

  complexd acc(0, 0);
  int cnt = 0;
  for (int xi = (3 * xi_max) / 4; xi <= xi_max; ++xi) {
    acc += tvals[xi] / std::pow(double(xi), fit.degree);
    ++cnt;
  }
  fit.c0 = acc / double(cnt);
  return fit;
}

void write_series_csv(const std::string& path, const TraceSeries& series) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + path);
  out << "m,mu_re,mu_im,mu_abs\n";
  char buf[128];
  for (std::size_t i = 0; i < series.values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n",
                  series.m_lo + int(i), series.values[i].real(),
                  series.values[i].imag(), std::abs(series.values[i]));
    out << buf;
  }
}

void write_peaks_csv(const std::string& path, const GutzwillerFit& fit) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + path);
  out << "angle,amplitude,phase,orbit,orientation,predicted,ratio\n";
  char buf[192];
  for (const auto& p : fit.peaks) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d,%d,%.17g,%.17g\n",
                  p.angle, p.amplitude, p.phase, p.orbit_index, p.orientation,
                  p.predicted_amplitude, p.amplitude_ratio);
    out << buf;
  }
  for (double a : fit.unmatched_angles) {
    std::snprintf(buf, sizeof buf, "%.17g,,,,-1,,\n", a);
    out << buf;
  }
}

}  // namespace kktrace
