#pragma once

#include <cmath>
#include <vector>

#include "kktrace/util.hpp"

namespace kktrace {

/// Real periodic function on a circle of given circumference, stored as a
/// finite trigonometric series
///   f(x) = c0 + sum_j a_j cos(j w x) + b_j sin(j w x),  w = 2 pi / L.
/// Evaluation is exact; this is the representation model files use.
class TrigPoly {
public:
  TrigPoly() = default;
  TrigPoly(double constant, std::vector<double> cos_coeffs,
           std::vector<double> sin_coeffs, double circumference);

  static TrigPoly constant(double c, double circumference = TWO_PI) {
    return TrigPoly(c, {}, {}, circumference);
  }

  double circumference() const { return L_; }
  bool is_constant() const { return cos_.empty() && sin_.empty(); }
  double constant_part() const { return c0_; }
  int harmonics() const { return static_cast<int>(cos_.size()); }

  template <typename Scalar>
  Scalar eval(const Scalar& x) const {
    using std::cos;
    using std::sin;
    Scalar f(c0_);
    for (std::size_t j = 0; j < cos_.size(); ++j) {
      Scalar arg = (double((j + 1)) * w_) * x;
      if (cos_[j] != 0.0) f += cos_[j] * cos(arg);
      if (sin_[j] != 0.0) f += sin_[j] * sin(arg);
    }
    return f;
  }

  double operator()(double x) const { return eval(x); }

  /// Exact derivative as another trig series.
  TrigPoly derivative() const;

  /// Samples on the uniform grid x_i = i L / n.
  std::vector<double> sample(int n) const;

  double min_on_grid(int n) const;
  double max_on_grid(int n) const;

private:
  double c0_ = 0.0;
  std::vector<double> cos_, sin_;
  double L_ = TWO_PI;
  double w_ = 1.0;
};

/// Fourier coefficients hat f(k), k = -kmax..kmax, of a smooth periodic
/// function given by samples on a uniform n-point grid (hat f(k) =
/// (1/n) sum_i f(x_i) e^{-i k w x_i}). Spectrally accurate for smooth f.
std::vector<complexd> fourier_coefficients(const std::vector<double>& samples,
                                           int kmax);

}  // namespace kktrace
