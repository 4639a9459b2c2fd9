#pragma once

#include <string>
#include <vector>

#include "kktrace/reduction.hpp"
#include "kktrace/spectrum.hpp"
#include "kktrace/util.hpp"

namespace kktrace {

/// Gaussian test function phi(t) = exp(-(t-t0)^2 / 2 sigma^2) e^{i omega0 t}
/// with transform phi_hat(xi) = integral phi(t) e^{-i t xi} dt
///               = sqrt(2 pi) sigma exp(-sigma^2 (xi-omega0)^2 / 2)
///                 e^{-i t0 (xi - omega0)}.
struct TestFunction {
  double t0 = 0;
  double sigma = 1;
  double omega0 = 0;

  complexd phi(double t) const {
    double u = (t - t0) / sigma;
    double mag = std::exp(-0.5 * u * u);
    return mag * complexd(std::cos(omega0 * t), std::sin(omega0 * t));
  }
  complexd phi_hat(double xi) const {
    double u = sigma * (xi - omega0);
    double mag = std::sqrt(TWO_PI) * sigma * std::exp(-0.5 * u * u);
    double ph = -t0 * (xi - omega0);
    return mag * complexd(std::cos(ph), std::sin(ph));
  }
  double support_radius() const { return 6.0 * sigma; }       // time domain
  double hat_radius() const { return 8.0 / sigma; }           // frequency tail
};

struct TraceSeries {
  double E = 1;
  int m_lo = 1;
  std::vector<complexd> values;  // mu(E, m, phi), m = m_lo .. m_lo+len-1
  // model metadata
  int n = 1;
  int ell = 0;
  int group_dim = 1;
  TestFunction phi;

  int m_hi() const { return m_lo + int(values.size()) - 1; }
  complexd at(int m) const { return values[m - m_lo]; }
};

/// mu(E,m,phi) = sum over the level-m spectrum of mult * phi_hat(lambda-mE).
/// Each table's window must contain mE +- the test function's tail radius;
/// the omitted Gaussian tail is certified below 1e-10 of the value.
TraceSeries mu(const std::vector<SpectrumTable>& spectra, double E,
               const TestFunction& phi);

struct WeylFit {
  double exponent = 0;
  double exponent_halfwidth = 0;
  double coefficient = 0;  // prefactor of m^exponent
  double rel_residual = 0;
  bool reliable = true;
};

/// Least-squares fit of log|mu| against log m over the top half of the range.
WeylFit weyl_fit(const TraceSeries& series);

struct CndEstimate {
  double value = 0;
  double rel_error = 0;
};

/// C = coefficient / (phi(0) Vol); cross-model constancy is the test.
CndEstimate calibrate_cnd(const WeylFit& fit, const TraceSeries& series,
                          double volume, double volume_rel_error);

struct GutzwillerPeak {
  double angle = 0;       // residual frequency in [0, 2pi)
  double amplitude = 0;   // one-sided coefficient / 2pi (propagator units)
  double raw_coefficient = 0;
  double phase = 0;       // fitted phase (Maslov-type constant, free)
  int orbit_index = -1;   // matched atlas orbit, -1 if unmatched
  int orientation = 0;    // +1: angle ~ +arg Hol, -1: angle ~ -arg Hol
  double predicted_amplitude = 0;  // (T#/2pi) |phi(T#)| / sqrt|det(I-P)|
  double amplitude_ratio = 0;      // measured / predicted
};

struct GutzwillerFit {
  std::vector<GutzwillerPeak> peaks;      // matched, strongest first
  std::vector<double> unmatched_angles;   // peaks with no orbit within a bin
  double bin_width = 0;
};

/// DFT of the Weyl-subtracted residual over m, peaks matched to orbit
/// holonomy angles (both orientations tested).
GutzwillerFit gutzwiller_fit(const TraceSeries& series, const WeylFit& weyl,
                             const std::vector<PeriodicOrbit>& atlas);

/// Abel-damped generating function Upsilon_r(theta_j) = sum_m mu r^m e^{im theta}
/// on a uniform grid of the given size.
std::vector<complexd> generating_function(const TraceSeries& series,
                                          int theta_grid, double damping_r);

struct SingularityFit {
  double degree = 0;   // k
  complexd c0{0, 0};   // leading coefficient (toolkit normalization)
  double fit_residual = 0;
  bool classical = true;
};

/// Windowed-transform analysis of an isolated singularity at s0: smooth bump
/// cutoff of half-width `cutoff`, transform evaluated at integer frequencies
/// with the damping r^-xi removed, power-law fit of the tail. The reported c0
/// is 2 pi times the (1/2pi)-normalized transform coefficient, so a unit
/// delta comb has degree 0 and c0 = 1.
SingularityFit extract_singularity(const TraceSeries& series, double s0,
                                   double cutoff, double damping_r);

void write_series_csv(const std::string& path, const TraceSeries& series);
void write_peaks_csv(const std::string& path, const GutzwillerFit& fit);

}  // namespace kktrace
