#pragma once

#include <cmath>
#include <stdexcept>

#include "entdist/channel_grid.hpp"
#include "entdist/common.hpp"
#include "entdist/qstate.hpp"

// Broadband type-0 SPDC pair source.  The polarization state is a Werner
// mixture around (|HH> + e^{i theta0}|VV>)/sqrt(2); the spectral envelope is
// a sinc^2 phase-matching curve that tilts the per-channel brightness.

namespace entdist {

struct SourceParams {
  double pump_center = 776.0;       // nm
  double pump_filter_fwhm = 1.0;    // nm (recorded; folded into intrinsic_purity)
  double crystal_length = 1.0;      // mm (recorded; folded into pm_curvature)
  double temperature = 20.0;        // degrees C (recorded constant)
  double theta0 = 0.0;              // source phase, radians, common to all channels
  double mean_pairs_per_gate = 1e-3;
  double pm_curvature = 0.09;       // THz^-2, phase-matching coefficient kappa
  double intrinsic_purity = 1.0;    // Werner weight p0

  void validate() const {
    if (!(pump_center > 0.0)) throw std::invalid_argument("pump_center must be > 0");
    if (!(pump_filter_fwhm > 0.0)) throw std::invalid_argument("pump_filter_fwhm must be > 0");
    if (!(crystal_length > 0.0)) throw std::invalid_argument("crystal_length must be > 0");
    if (!std::isfinite(temperature)) throw std::invalid_argument("temperature must be finite");
    if (!std::isfinite(theta0)) throw std::invalid_argument("theta0 must be finite");
    if (!(mean_pairs_per_gate >= 0.0))
      throw std::invalid_argument("mean_pairs_per_gate must be >= 0");
    if (!(pm_curvature >= 0.0)) throw std::invalid_argument("pm_curvature must be >= 0");
    if (!(intrinsic_purity >= 0.0 && intrinsic_purity <= 1.0))
      throw std::invalid_argument("intrinsic_purity must be in [0,1]");
  }
};

// Relative pair brightness sinc^2(kappa * (nu_s - nu_deg)^2), normalized to 1
// at degeneracy.  The degeneracy frequency is taken as the pair midpoint,
// which equals half the pump frequency for any energy-conserving pair.
inline double spectral_brightness(const ChannelPair& channel, const SourceParams& params) {
  params.validate();
  const double nu_deg = 0.5 * (channel.signal_freq_thz + channel.idler_freq_thz);
  const double detune = channel.signal_freq_thz - nu_deg;
  const double x = params.pm_curvature * detune * detune;
  if (x == 0.0) return 1.0;
  const double s = std::sin(x) / x;
  return s * s;
}

// Emitted two-photon polarization state.  Channel-independent by design: the
// source phase theta0 is one constant, and all channel dependence of the
// measured phase comes from the fiber link.
inline DensityMatrix emit_state(const ChannelPair& /*channel*/, const SourceParams& params) {
  params.validate();
  return werner_state(params.intrinsic_purity, params.theta0);
}

// Expected generated pairs per second into this channel.
inline double pair_rate(const ChannelPair& channel, const SourceParams& params,
                        double pump_rate) {
  if (!(pump_rate > 0.0)) throw std::invalid_argument("pair_rate: pump_rate must be > 0");
  return params.mean_pairs_per_gate * spectral_brightness(channel, params) * pump_rate;
}

}  // namespace entdist
