#pragma once

#include <complex>

#include <Eigen/Dense>

namespace entdist {

using Complex = std::complex<double>;
using Vec2 = Eigen::Vector2cd;
using Vec4 = Eigen::Vector4cd;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;

inline constexpr double pi = 3.141592653589793238462643383279502884;
inline constexpr double two_pi = 2.0 * pi;

// Vacuum speed of light in nm*THz (exactly 299792458 m/s). Keeping frequency
// in THz and wavelength in nm means lambda = speed_of_light / nu with no unit
// juggling anywhere else in the library.
inline constexpr double speed_of_light = 299792.458;

inline double wavelength_to_freq(double lambda_nm) { return speed_of_light / lambda_nm; }
inline double freq_to_wavelength(double nu_thz) { return speed_of_light / nu_thz; }

}  // namespace entdist
