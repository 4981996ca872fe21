#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace simbeam {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Bad parameter values, malformed config files, dimension mismatches.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Geometrically impossible request (coincident points, zero distances).
class geometry_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure: non-PD matrix where PD is required, NaN objective.
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Carrier frequency and the derived wavelength (lambda = c / f_c).
struct Carrier {
  double frequency_hz = 0.0;
  double wavelength = 0.0;

  double wavenumber() const { return kTwoPi / wavelength; }

  static Carrier from_frequency(double hz) {
    if (hz <= 0.0) throw config_error("carrier frequency must be positive");
    return Carrier{hz, kSpeedOfLight / hz};
  }
  static Carrier from_wavelength(double meters) {
    if (meters <= 0.0) throw config_error("wavelength must be positive");
    return Carrier{kSpeedOfLight / meters, meters};
  }
};

inline double dbm_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0) * 1e-3; }
inline double watts_to_dbm(double watts) { return 10.0 * std::log10(watts * 1e3); }

/// Uniform draw in [0, 1) from the raw engine output. The standard library
/// distributions are implementation-defined; this mapping is not.
inline double random_unit_interval(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace simbeam
