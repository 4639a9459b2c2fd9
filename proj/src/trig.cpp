#include "kktrace/trig.hpp"

#include <algorithm>

namespace kktrace {

TrigPoly::TrigPoly(double constant, std::vector<double> cos_coeffs,
                   std::vector<double> sin_coeffs, double circumference)
    : c0_(constant),
      cos_(std::move(cos_coeffs)),
      sin_(std::move(sin_coeffs)),
      L_(circumference) {
  if (L_ <= 0) throw Error(ErrorKind::InvalidInput, "circumference must be positive");
  if (sin_.size() < cos_.size()) sin_.resize(cos_.size(), 0.0);
  if (cos_.size() < sin_.size()) cos_.resize(sin_.size(), 0.0);
  w_ = TWO_PI / L_;
}

TrigPoly TrigPoly::derivative() const {
  std::vector<double> dc(cos_.size()), ds(sin_.size());
  for (std::size_t j = 0; j < cos_.size(); ++j) {
    double jw = double(j + 1) * w_;
    // d/dx [a cos(jwx) + b sin(jwx)] = jw b cos(jwx) - jw a sin(jwx)
    dc[j] = jw * sin_[j];
    ds[j] = -jw * cos_[j];
  }
  return TrigPoly(0.0, dc, ds, L_);
}

std::vector<double> TrigPoly::sample(int n) const {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = eval(double(i) * L_ / n);
  return out;
}

double TrigPoly::min_on_grid(int n) const {
  auto s = sample(n);
  return *std::min_element(s.begin(), s.end());
}

double TrigPoly::max_on_grid(int n) const {
  auto s = sample(n);
  return *std::max_element(s.begin(), s.end());
}

std::vector<complexd> fourier_coefficients(const std::vector<double>& samples,
                                           int kmax) {
  int n = static_cast<int>(samples.size());
  std::vector<complexd> out(2 * kmax + 1);
  for (int k = -kmax; k <= kmax; ++k) {
    complexd acc(0, 0);
    for (int i = 0; i < n; ++i) {
      double phase = -TWO_PI * double(k) * double(i) / double(n);
      acc += samples[i] * complexd(std::cos(phase), std::sin(phase));
    }
    out[k + kmax] = acc / double(n);
  }
  return out;
}

}  // namespace kktrace
