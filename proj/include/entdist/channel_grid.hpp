#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "entdist/common.hpp"

// Frequency plan for the wavelength-multiplexed source: a fixed grid of
// signal channels below the pump's second harmonic, each paired with the
// idler frequency that energy conservation dictates.

namespace entdist {

struct GridParams {
  double pump_wavelength = 776.0;          // nm
  double signal_start_wavelength = 1525.0; // nm, channel 1 signal
  double spacing_ghz = 60.0;               // grid pitch, GHz
  int channel_count = 44;
  double bpf_min = 1520.0;                 // nm, filter passband low edge
  double bpf_max = 1580.0;                 // nm, filter passband high edge

  void validate() const {
    if (!(pump_wavelength > 0.0))
      throw std::invalid_argument("pump_wavelength must be > 0");
    if (!(signal_start_wavelength > 0.0))
      throw std::invalid_argument("signal_start_wavelength must be > 0");
    if (!(spacing_ghz > 0.0))
      throw std::invalid_argument("spacing must be > 0");
    if (channel_count < 1)
      throw std::invalid_argument("channel_count must be >= 1");
    if (!(bpf_min > 0.0 && bpf_max > bpf_min))
      throw std::invalid_argument("bpf_min/bpf_max must satisfy 0 < bpf_min < bpf_max");
  }
};

struct ChannelPair {
  int index = 0;                    // 1-based channel number
  double signal_freq_thz = 0.0;
  double idler_freq_thz = 0.0;
  double signal_wavelength_nm = 0.0;
  double idler_wavelength_nm = 0.0;
};

// Raised when a requested grid cannot be realized (idler out of the pump's
// down-conversion range, channel outside the filter band, ...).
struct PlanInfeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Pair a signal frequency with its energy-conserving idler.  Degenerate and
// inverted pairs are allowed here; build_plan is the place that enforces the
// signal-above-degeneracy convention.
inline ChannelPair make_channel_pair(int index, double signal_freq_thz, double pump_freq_thz) {
  if (!(signal_freq_thz > 0.0) || !(pump_freq_thz > signal_freq_thz))
    throw std::invalid_argument("make_channel_pair: need 0 < signal frequency < pump frequency");
  ChannelPair ch;
  ch.index = index;
  ch.signal_freq_thz = signal_freq_thz;
  ch.idler_freq_thz = pump_freq_thz - signal_freq_thz;
  ch.signal_wavelength_nm = freq_to_wavelength(ch.signal_freq_thz);
  ch.idler_wavelength_nm = freq_to_wavelength(ch.idler_freq_thz);
  return ch;
}

// Channel n signal sits at nu_s(1) - (n-1) * spacing; walking the signal comb
// down in frequency walks the idler comb up, keeping every pair summed to the
// pump frequency exactly (the idler is computed by subtraction, never from a
// second rounding of wavelengths).
inline std::vector<ChannelPair> build_plan(const GridParams& params) {
  params.validate();
  const double nu_pump = wavelength_to_freq(params.pump_wavelength);
  const double nu_start = wavelength_to_freq(params.signal_start_wavelength);
  const double spacing_thz = params.spacing_ghz * 1e-3;

  std::vector<ChannelPair> plan;
  plan.reserve(static_cast<std::size_t>(params.channel_count));
  for (int n = 1; n <= params.channel_count; ++n) {
    const double nu_s = nu_start - (n - 1) * spacing_thz;
    if (!(nu_s > 0.5 * nu_pump))
      throw PlanInfeasible("channel " + std::to_string(n) +
                           ": signal frequency crosses degeneracy (signal must stay above "
                           "half the pump frequency)");
    plan.push_back(make_channel_pair(n, nu_s, nu_pump));
  }
  return plan;
}

enum class ViolationKind { out_of_band, energy_conservation };

struct Violation {
  int channel = 0;
  ViolationKind kind = ViolationKind::out_of_band;
  std::string detail;
};

// Check every pair against the filter passband and against energy
// conservation (signal + idler = pump to 1e-9 THz).  Returns a list of
// violations; empty means the plan is clean.
inline std::vector<Violation> validate_plan(const std::vector<ChannelPair>& plan,
                                            const GridParams& params) {
  params.validate();
  const double nu_pump = wavelength_to_freq(params.pump_wavelength);
  std::vector<Violation> out;
  for (const ChannelPair& ch : plan) {
    const auto in_band = [&](double nm) { return nm >= params.bpf_min && nm <= params.bpf_max; };
    if (!in_band(ch.signal_wavelength_nm))
      out.push_back({ch.index, ViolationKind::out_of_band,
                     "signal " + std::to_string(ch.signal_wavelength_nm) + " nm outside [" +
                         std::to_string(params.bpf_min) + ", " + std::to_string(params.bpf_max) +
                         "] nm"});
    if (!in_band(ch.idler_wavelength_nm))
      out.push_back({ch.index, ViolationKind::out_of_band,
                     "idler " + std::to_string(ch.idler_wavelength_nm) + " nm outside [" +
                         std::to_string(params.bpf_min) + ", " + std::to_string(params.bpf_max) +
                         "] nm"});
    const double dev = std::abs(ch.signal_freq_thz + ch.idler_freq_thz - nu_pump);
    if (!(dev <= 1e-9))
      out.push_back({ch.index, ViolationKind::energy_conservation,
                     "signal + idler misses the pump frequency by " + std::to_string(dev) +
                         " THz"});
  }
  return out;
}

}  // namespace entdist
