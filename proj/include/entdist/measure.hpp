#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "entdist/common.hpp"
#include "entdist/link.hpp"
#include "entdist/qstate.hpp"
#include "entdist/rng.hpp"

// Analyzer optics and detection: waveplate Jones matrices, the 16-setting
// tomography projector table, and the Poisson coincidence-count model.

namespace entdist {

struct WaveplateChain {
  double qwp1_angle = 0.0;  // radians, fast axis from horizontal
  double qwp2_angle = 0.0;
  double hwp_angle = 0.0;
};

// HWP(h) = [[cos 2h, sin 2h], [sin 2h, -cos 2h]] up to global phase.
inline PolarizationUnitary jones_hwp(double angle) {
  if (!std::isfinite(angle)) throw std::invalid_argument("jones_hwp: angle must be finite");
  const double c = std::cos(2.0 * angle);
  const double s = std::sin(2.0 * angle);
  Mat2 m;
  m << c, s, s, -c;
  return PolarizationUnitary(m);
}

// QWP(q) = [[cos^2 q + i sin^2 q, (1-i) sin q cos q],
//           [(1-i) sin q cos q,   sin^2 q + i cos^2 q]] up to global phase.
inline PolarizationUnitary jones_qwp(double angle) {
  if (!std::isfinite(angle)) throw std::invalid_argument("jones_qwp: angle must be finite");
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const Complex off = Complex(1.0, -1.0) * s * c;
  Mat2 m;
  m(0, 0) = Complex(c * c, s * s);
  m(0, 1) = off;
  m(1, 0) = off;
  m(1, 1) = Complex(s * s, c * c);
  return PolarizationUnitary(m);
}

// QWP(q1) * QWP(q2) * HWP(h): light passes the HWP first in this convention.
inline PolarizationUnitary compose(const WaveplateChain& chain) {
  return jones_qwp(chain.qwp1_angle) * jones_qwp(chain.qwp2_angle) * jones_hwp(chain.hwp_angle);
}

struct TomoSetting {
  Ket2 signal_projector = Ket2::horizontal();
  Ket2 idler_projector = Ket2::horizontal();
  std::string label;
};

namespace detail {

inline Ket2 projector_from_letter(char letter) {
  switch (letter) {
    case 'H': return Ket2::horizontal();
    case 'V': return Ket2::vertical();
    case 'D': return Ket2::diagonal();
    case 'A': return Ket2::antidiagonal();
    case 'R': return Ket2::right_circular();
    case 'L': return Ket2::left_circular();
    default: throw std::invalid_argument(std::string("unknown projector letter '") + letter + "'");
  }
}

}  // namespace detail

// The canonical 16-setting product-projector tomography set.  The first four
// settings form the H/V completion group used for count normalization; the
// induced 16x16 design matrix has condition number ~9.7.
inline const std::vector<TomoSetting>& tomo_settings_16() {
  static const std::vector<TomoSetting> settings = [] {
    const char* labels[16] = {"HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH",
                              "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL"};
    std::vector<TomoSetting> out;
    out.reserve(16);
    for (const char* label : labels)
      out.push_back(TomoSetting{detail::projector_from_letter(label[0]),
                                detail::projector_from_letter(label[1]), label});
    return out;
  }();
  return settings;
}

struct DetectorParams {
  double efficiency_signal = 0.10;
  double efficiency_idler = 0.10;
  double dark_prob_per_gate = 1e-5;
  double gate_rate = 1e6;          // gates/s (gate doubles as coincidence window)
  double integration_time = 100.0; // s per setting

  void validate() const {
    if (!(efficiency_signal >= 0.0 && efficiency_signal <= 1.0))
      throw std::invalid_argument("efficiency_signal must be in [0,1]");
    if (!(efficiency_idler >= 0.0 && efficiency_idler <= 1.0))
      throw std::invalid_argument("efficiency_idler must be in [0,1]");
    if (!(dark_prob_per_gate >= 0.0 && dark_prob_per_gate <= 1.0))
      throw std::invalid_argument("dark_prob_per_gate must be in [0,1]");
    if (!(gate_rate > 0.0)) throw std::invalid_argument("gate_rate must be > 0");
    if (!(integration_time > 0.0)) throw std::invalid_argument("integration_time must be > 0");
  }
};

struct CountRecord {
  TomoSetting setting;
  std::int64_t count = 0;
  double expected = 0.0;
  double integration_time = 0.0;
};

// Born-rule coincidence probability Tr(rho (P_s x P_i)), clipped to [0,1].
inline double coincidence_probability(const DensityMatrix& rho, const TomoSetting& setting) {
  const Ket4 joint = Ket4::tensor(setting.signal_projector, setting.idler_projector);
  return std::clamp(fidelity_pure(rho, joint), 0.0, 1.0);
}

namespace detail {

// Marginal click probability of one arm's projector, Tr(rho (P x I)) or
// Tr(rho (I x P)).
inline double marginal_probability(const DensityMatrix& rho, const Ket2& projector,
                                   Arm arm) {
  const Mat2 p = projector.vec() * projector.vec().adjoint();
  const Mat4 op = (arm == Arm::signal) ? kron(p, Mat2::Identity()) : kron(Mat2::Identity(), p);
  return std::clamp((rho.mat() * op).trace().real(), 0.0, 1.0);
}

// True-coincidence part of the expected count: pairs thinned by fiber loss
// and detector efficiency on both arms, projected, integrated.
inline double expected_coincidences(const DensityMatrix& rho, const TomoSetting& setting,
                                    const DetectorParams& det, const LinkParams& link,
                                    double pair_rate) {
  const double arm_t = transmission(link);
  return pair_rate * arm_t * arm_t * det.efficiency_signal * det.efficiency_idler *
         coincidence_probability(rho, setting) * det.integration_time;
}

}  // namespace detail

// Full expected count: true coincidences plus accidentals.  Accidentals use
// the gate as the coincidence window: two independent singles (photon or
// dark) in the same gate.
inline double expected_counts(const DensityMatrix& rho, const TomoSetting& setting,
                              const DetectorParams& det, const LinkParams& link,
                              double pair_rate) {
  det.validate();
  link.validate();
  if (!(pair_rate >= 0.0)) throw std::invalid_argument("expected_counts: pair_rate must be >= 0");
  const double mu_true = detail::expected_coincidences(rho, setting, det, link, pair_rate);
  const double arm_t = transmission(link);
  const double pairs_per_gate = pair_rate / det.gate_rate;
  const double singles_s =
      pairs_per_gate * arm_t * det.efficiency_signal *
          detail::marginal_probability(rho, setting.signal_projector, Arm::signal) +
      det.dark_prob_per_gate;
  const double singles_i =
      pairs_per_gate * arm_t * det.efficiency_idler *
          detail::marginal_probability(rho, setting.idler_projector, Arm::idler) +
      det.dark_prob_per_gate;
  const double accidentals = det.gate_rate * det.integration_time * singles_s * singles_i;
  return mu_true + accidentals;
}

// One Poisson draw with the given mean.
inline std::int64_t sample_counts(double expected, RngStream& rng) {
  if (!(expected >= 0.0)) throw std::invalid_argument("sample_counts: expected must be >= 0");
  return rng.poisson(expected);
}

// One CountRecord per tomography setting.  In noiseless mode the expected
// value excludes accidentals (exact Born-rule proportions) and passes through
// unsampled; reconstruction then reads the `expected` field.
inline std::vector<CountRecord> run_tomography(const DensityMatrix& rho,
                                               const DetectorParams& det,
                                               const LinkParams& link, double pair_rate,
                                               RngStream& rng, bool noiseless = false) {
  det.validate();
  std::vector<CountRecord> records;
  records.reserve(16);
  for (const TomoSetting& setting : tomo_settings_16()) {
    CountRecord rec;
    rec.setting = setting;
    rec.integration_time = det.integration_time;
    if (noiseless) {
      rec.expected = detail::expected_coincidences(rho, setting, det, link, pair_rate);
      rec.count = static_cast<std::int64_t>(std::llround(rec.expected));
    } else {
      rec.expected = expected_counts(rho, setting, det, link, pair_rate);
      rec.count = sample_counts(rec.expected, rng);
    }
    records.push_back(rec);
  }
  return records;
}

}  // namespace entdist
