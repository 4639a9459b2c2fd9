#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace kktrace {

using complexd = std::complex<double>;

inline constexpr double PI = 3.14159265358979323846;
inline constexpr double TWO_PI = 2.0 * PI;

/// Error category carried by every toolkit exception so callers can map
/// failures onto exit codes without string matching.
enum class ErrorKind {
  InvalidInput,     // bad weight, schema mismatch, out-of-range tolerance
  Configuration,    // model violates a construction-time bound
  Domain,           // argument outside the operation's domain
  Numerical,        // integration failure, conditioning, non-convergence
  Precision,        // requested accuracy not reached
  Incomplete,       // spectral window or series truncation insufficient
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

inline double wrap_angle(double a) {
  a = std::fmod(a, TWO_PI);
  if (a < 0) a += TWO_PI;
  return a;
}

/// Smallest distance between two angles on the circle.
inline double angle_dist(double a, double b) {
  double d = std::fabs(wrap_angle(a) - wrap_angle(b));
  return std::min(d, TWO_PI - d);
}

inline double wrap_position(double x, double circumference) {
  x = std::fmod(x, circumference);
  if (x < 0) x += circumference;
  return x;
}

/// Worker count for fan-out loops. Reads KKTRACE_WORKERS once; defaults to 1
/// to keep runs reproducible in logs unless the user opts in.
int worker_count();

/// Deterministic parallel map: results are written by index, so the output
/// does not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Plain O(n^2) DFT, F(j) = sum_k x_k exp(-i j theta_k) on the given angles.
/// Sizes in this toolkit stay in the low thousands.
std::vector<complexd> dft(const std::vector<complexd>& x,
                          const std::vector<double>& angles);

}  // namespace kktrace
