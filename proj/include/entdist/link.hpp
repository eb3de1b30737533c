#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "entdist/channel_grid.hpp"
#include "entdist/common.hpp"
#include "entdist/qstate.hpp"
#include "entdist/rng.hpp"

// The two fiber arms: attenuation, first-order PMD (a differential group
// delay between the H and V axes), slow random polarization drift, and a
// small depolarizing admixture.
//
// PMD bookkeeping: with DGD tau on an arm, the V component of a photon at
// frequency nu acquires phase 2*pi*nu*tau relative to H.  Only phase
// *differences* across channels are observable once the reference channel is
// compensated, so each arm's diagonal phase is referenced to channel 1.  The
// idler detuning is computed as the negative of the signal detuning (exact,
// by energy conservation), which makes the equal-DGD cancellation hold to the
// last bit instead of to rounding error.

namespace entdist {

enum class Arm : std::uint64_t { signal = 0, idler = 1 };

struct LinkParams {
  double length = 5.0;        // km per arm
  double attenuation = 0.0;   // dB/km
  double dgd_signal = 0.0;    // ps, signal arm DGD tau_s
  double dgd_idler = 0.0;     // ps, idler arm DGD tau_i
  double drift_step = 0.0;    // radians per compensation interval
  double depol = 0.0;         // depolarization probability per transit
  std::uint64_t seed = 1;
  // Signal frequency of the reference channel (defaults to a 1525.0 nm
  // signal, channel 1 of the default grid).  theta_ref is defined at this
  // frequency.
  double ref_signal_freq = speed_of_light / 1525.0;  // THz

  void validate() const {
    if (!(length >= 0.0)) throw std::invalid_argument("length must be >= 0");
    if (!(attenuation >= 0.0)) throw std::invalid_argument("attenuation must be >= 0");
    if (!std::isfinite(dgd_signal)) throw std::invalid_argument("dgd_signal must be finite");
    if (!std::isfinite(dgd_idler)) throw std::invalid_argument("dgd_idler must be finite");
    if (!(drift_step >= 0.0)) throw std::invalid_argument("drift_step must be >= 0");
    if (!(depol >= 0.0 && depol <= 1.0)) throw std::invalid_argument("depol must be in [0,1]");
    if (!(ref_signal_freq > 0.0)) throw std::invalid_argument("ref_signal_freq must be > 0");
  }
};

// Per-photon survival probability over one arm.
inline double transmission(const LinkParams& params) {
  return std::pow(10.0, -params.attenuation * params.length / 10.0);
}

// Two-photon phase of channel n: theta_ref plus the PMD walk
// 2*pi*(tau_s - tau_i)*(nu_s(n) - nu_ref).  tau in ps and nu in THz multiply
// to a dimensionless cycle count directly.
inline double channel_theta(const ChannelPair& channel, const LinkParams& params,
                            double theta_ref) {
  const double detune = channel.signal_freq_thz - params.ref_signal_freq;
  return theta_ref + two_pi * (params.dgd_signal - params.dgd_idler) * detune;
}

namespace detail {

// Rotation by `angle` about the Bloch-sphere axis (nx,ny,nz):
// cos(a/2) I - i sin(a/2) (n . sigma).
inline Mat2 su2_rotation(double nx, double ny, double nz, double angle) {
  const double c = std::cos(0.5 * angle);
  const double s = std::sin(0.5 * angle);
  Mat2 m;
  m(0, 0) = Complex(c, -s * nz);
  m(0, 1) = Complex(-s * ny, -s * nx);
  m(1, 0) = Complex(s * ny, -s * nx);
  m(1, 1) = Complex(c, s * nz);
  return m;
}

}  // namespace detail

// The per-arm drift stream for one realignment window.  Each (seed, arm,
// window) tuple owns an independent substream, so sweeps can evaluate any
// window without replaying the full history and parallel channels never
// contend for generator state.
inline RngStream drift_stream(const LinkParams& params, Arm arm, std::uint64_t window = 0) {
  constexpr std::uint64_t drift_domain = 0x64726966;  // domain separation tag
  return RngStream::derive(params.seed, static_cast<std::uint64_t>(arm), window, drift_domain);
}

// Compose `elapsed_intervals` random-walk steps drawn from `rng`.  Each step
// rotates about a uniformly random Bloch axis by an angle ~ N(0, drift_step).
inline PolarizationUnitary drift_unitary(std::int64_t elapsed_intervals,
                                         const LinkParams& params, RngStream& rng) {
  if (elapsed_intervals < 0)
    throw std::invalid_argument("drift_unitary: elapsed_intervals must be >= 0");
  Mat2 u = Mat2::Identity();
  for (std::int64_t i = 0; i < elapsed_intervals; ++i) {
    const double z = 2.0 * rng.uniform() - 1.0;
    const double phi = two_pi * rng.uniform();
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double angle = rng.normal(params.drift_step);
    u = detail::su2_rotation(r * std::cos(phi), r * std::sin(phi), z, angle) * u;
  }
  return PolarizationUnitary(u);
}

// Angular deviation of U from the identity, modulo global phase:
// 2*acos(|tr U| / 2).
inline double deviation_angle(const PolarizationUnitary& u) {
  const double half_tr = 0.5 * std::abs(u.mat().trace());
  return 2.0 * std::acos(std::min(1.0, half_tr));
}

// Arm unitaries with explicit drift rotations (the sweep composes drift per
// realignment window and hands it in here).
inline DensityMatrix apply_link_with_drift(const DensityMatrix& rho, const ChannelPair& channel,
                                           const LinkParams& params,
                                           const PolarizationUnitary& drift_signal,
                                           const PolarizationUnitary& drift_idler) {
  params.validate();
  const double detune_s = channel.signal_freq_thz - params.ref_signal_freq;
  const double detune_i = -detune_s;  // exact: nu_s + nu_i is constant
  const PolarizationUnitary u_s =
      drift_signal * PolarizationUnitary::relative_phase(two_pi * detune_s * params.dgd_signal);
  const PolarizationUnitary u_i =
      drift_idler * PolarizationUnitary::relative_phase(two_pi * detune_i * params.dgd_idler);
  const DensityMatrix rotated = apply_local(rho, u_s, u_i);
  if (params.depol == 0.0) return rotated;
  Mat4 mixed =
      (1.0 - params.depol) * rotated.mat() + params.depol * 0.25 * Mat4::Identity();
  return DensityMatrix(mixed);
}

// Full link channel after `elapsed_intervals` of uncorrected drift: PMD
// diagonal phase, drift rotation, then depolarizing admixture.
inline DensityMatrix apply_link(const DensityMatrix& rho, const ChannelPair& channel,
                                const LinkParams& params, std::int64_t elapsed_intervals) {
  RngStream rng_s = drift_stream(params, Arm::signal);
  RngStream rng_i = drift_stream(params, Arm::idler);
  const PolarizationUnitary d_s = drift_unitary(elapsed_intervals, params, rng_s);
  const PolarizationUnitary d_i = drift_unitary(elapsed_intervals, params, rng_i);
  return apply_link_with_drift(rho, channel, params, d_s, d_i);
}

}  // namespace entdist
