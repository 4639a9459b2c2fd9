#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "kktrace/geometry.hpp"

namespace kktrace {

struct SpectrumEntry {
  double lambda = 0;
  long multiplicity = 1;  // copies of the level-m representation
};

enum class SpectrumMethod { ClosedForm, Discretized };

struct SpectrumTable {
  int m = 1;
  std::vector<SpectrumEntry> eigenvalues;  // ascending, window-complete
  double window_lo = 0, window_hi = 0;
  SpectrumMethod method = SpectrumMethod::ClosedForm;
  int grid = 0;                     // Fourier modes used (discretized)
  std::vector<complexd> nonreal;    // Krein-regime eigenvalues off the real axis
  double convergence_estimate = 0;  // grid-refinement / truncation estimate

  long count_in(double lo, double hi) const;
};

/// A discretized stationary mode e^{-i lambda t} v(x) on the Fourier basis.
struct ModeFunction {
  int m = 1;
  double lambda = 0;
  double fiber_momentum = 0;  // orthonormal vertical momentum of the weight
  double casimir = 0;
  Eigen::VectorXcd coeffs;    // Fourier coefficients, k = -K..K
  double q_value = 0;         // energy form value (1 after normalization)
};

/// Constant-coefficient model on the 2pi circle: N = h = 1, constant shift
/// beta with |beta| < 1, constant connection coefficient alpha.
struct FlatParams {
  std::shared_ptr<const GroupData> group;
  Weight lambda0;
  double alpha = 0;
  double beta = 0;
};

/// Closed-form spectrum lambda = beta ktilde +- sqrt(ktilde^2 + c_m) with
/// ktilde = k - alpha * (fiber weight), multiplicities counted exactly from
/// the weight system. Throws Error(Incomplete) if the window would need more
/// than max_k Fourier modes.
SpectrumTable flat_spectrum(const FlatParams& params, int m, double window_lo,
                            double window_hi, long max_k = 20'000'000);

struct Spectrum1dOptions {
  int grid = 128;            // Fourier modes: k = -grid/2 .. grid/2
  double cluster_tol = 1e-7; // eigenvalue clustering for multiplicities
  double nonreal_tol = 1e-6; // |Im| above this is reported as non-real
  bool certify = true;       // compare window counts at K and 2K
  // Optional band-limited fast path (requires beta == 0 and constant A):
  // keep only Fourier modes whose local wavenumber can reach the window,
  // padded by band_buffer modes. 0 disables.
  int band_buffer = 0;
  bool keep_modes = false;   // retain eigenvectors for energy_form
  std::vector<ModeFunction>* modes_out = nullptr;
};

/// Fourier-collocation discretization of the stationary wave equation as a
/// quadratic eigenvalue problem in lambda, companion-linearized when the
/// shift is present and solved as a definite Hermitian pencil otherwise.
SpectrumTable generic_spectrum_1d(const ModelSpec& model, int m,
                                  double window_lo, double window_hi,
                                  const Spectrum1dOptions& opts);

/// Stress-energy quadratic form of a mode,
///   Q = int N^-1 (lambda^2 |v|^2 + (N^2/h - beta^2) |Dv|^2
///                 + (V + c_m) |v|^2) sqrt(h) dx.
double energy_form(const ModelSpec& model, const ModeFunction& mode);

struct PositivityScan {
  int m0 = -1;  // smallest clean level, -1 when not found
  struct LevelReport {
    int m;
    bool all_real;
    bool all_q_positive;
    long nonreal_count;
    double min_q;
  };
  std::vector<LevelReport> levels;
};

/// Scan m = 1..m_max for the positivity threshold: smallest m0 such that
/// every level in [m0, m_max] has a purely real window spectrum with Q > 0 on
/// every mode. Throws Error(Precision) when no such level exists.
PositivityScan positivity_threshold(const ModelSpec& model, int m_max,
                                    double window_halfwidth,
                                    const Spectrum1dOptions& opts);

struct FactorizationReport {
  bool exact = true;
  int m = 0;
  long dm = 0;
  struct Line {
    double lambda;
    long hm_multiplicity;      // copies of kappa_m
    long bundle_multiplicity;  // scalar reduced problem count
    bool ok;
  };
  std::vector<Line> lines;
};

/// Corollary check on a zero-flux non-abelian flat model: every H_m
/// multiplicity must equal d_m times the scalar bundle multiplicity, as exact
/// integers.
FactorizationReport factorization_check(const FlatParams& params, int m,
                                        double window_lo, double window_hi);

void write_spectrum_csv(const std::string& path,
                        const std::vector<SpectrumTable>& tables);

}  // namespace kktrace
