#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "entdist/common.hpp"
#include "entdist/measure.hpp"
#include "entdist/qstate.hpp"

// Per-channel phase compensation: estimate the two-photon phase from a
// reconstructed state, synthesize the QWP-QWP-HWP chain that nulls it on the
// signal arm, and idealized drift re-alignment for the fiber arms.

namespace entdist {

// Thrown when a state carries no usable HH/VV coherence to estimate a phase
// from.
struct NoPhaseInformation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double coherence_threshold = 1e-6;

// Phase of the HH/VV coherence: the theta_star of fidelity_max_phase.
// Compensating by this angle rotates the coherence onto the positive real
// axis.
inline double estimate_theta(const DensityMatrix& rho) {
  const Complex coh = rho.mat()(0, 3);
  if (!(std::abs(coh) > coherence_threshold))
    throw NoPhaseInformation("estimate_theta: |rho_{HH,VV}| = " + std::to_string(std::abs(coh)) +
                             " is below the coherence threshold");
  return -std::arg(coh);
}

namespace detail {

// SO(3) rotation represented by a single-qubit unitary, in the basis
// (sigma_z, sigma_x, sigma_y): R_ij = Tr(tau_i U tau_j U^dagger) / 2.  In
// this frame a waveplate with fast axis at angle a rotates about the
// in-plane axis (cos 2a, sin 2a, 0): a quarter-wave plate by +pi/2, a
// half-wave plate by pi.  Index 2 is the circular-polarization axis.
inline Eigen::Matrix3d so3_of(const Mat2& u) {
  Mat2 tau[3];
  tau[0] << 1, 0, 0, -1;
  tau[1] << 0, 1, 1, 0;
  tau[2] << 0, Complex(0, -1), Complex(0, 1), 0;
  Eigen::Matrix3d r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r(i, j) = 0.5 * (tau[i] * u * tau[j] * u.adjoint()).trace().real();
  return r;
}

// Rodrigues rotation about a unit axis.
inline Eigen::Matrix3d rot3(const Eigen::Vector3d& axis, double angle) {
  const Eigen::Vector3d n = axis.normalized();
  Eigen::Matrix3d k;
  k << 0, -n.z(), n.y(), n.z(), 0, -n.x(), -n.y(), n.x(), 0;
  return Eigen::Matrix3d::Identity() + std::sin(angle) * k +
         (1.0 - std::cos(angle)) * (k * k);
}

inline Eigen::Vector3d in_plane_axis(double azimuth) {
  return Eigen::Vector3d(std::cos(azimuth), std::sin(azimuth), 0.0);
}

}  // namespace detail

// Frobenius distance between two operators modulo global phase.
inline double distance_mod_phase(const Mat2& a, const Mat2& b) {
  const Complex tr = (a.adjoint() * b).trace();
  const Complex phase = std::abs(tr) > 1e-16 ? tr / std::abs(tr) : Complex(1.0, 0.0);
  return (a * phase - b).norm();
}

// Waveplate angles (q1, q2, h) with QWP(q1) QWP(q2) HWP(h) = U up to global
// phase.  Constructive: work in the SO(3) picture, choose the two QWP axes so
// that the residual rotation fixes the circular axis to its antipode, which
// is exactly the rotation set reachable by a single HWP.
inline WaveplateChain synthesize_chain(const PolarizationUnitary& target) {
  const Eigen::Matrix3d r = detail::so3_of(target.mat());
  const Eigen::Vector3d z(0.0, 0.0, 1.0);
  const Eigen::Vector3d w = r * z;

  // First QWP axis: azimuth of w's in-plane part (any value works when w is
  // already polar).
  const double a1 =
      (std::abs(w.x()) + std::abs(w.y()) > 1e-14) ? std::atan2(w.y(), w.x()) : 0.0;
  const Eigen::Vector3d u = detail::rot3(detail::in_plane_axis(a1), -0.5 * pi) * w;

  // Second QWP axis: perpendicular (in-plane) to u, so its quarter turn sends
  // u to the negative circular axis.
  const double mu = std::atan2(u.y(), u.x());
  const double a2 = mu - 0.5 * pi;

  const Eigen::Matrix3d q1 = detail::rot3(detail::in_plane_axis(a1), 0.5 * pi);
  const Eigen::Matrix3d q2 = detail::rot3(detail::in_plane_axis(a2), 0.5 * pi);
  const Eigen::Matrix3d s = q2.transpose() * q1.transpose() * r;

  // s maps z to -z, so HWP(0) * s fixes z and is a pure rotation about it;
  // its angle determines the HWP axis.
  const Eigen::Matrix3d k = detail::rot3(Eigen::Vector3d(1, 0, 0), pi) * s;
  const double psi = std::atan2(k(1, 0), k(0, 0));
  const double gamma = -0.5 * psi;

  WaveplateChain chain;
  chain.qwp1_angle = 0.5 * a1;
  chain.qwp2_angle = 0.5 * a2;
  chain.hwp_angle = 0.5 * gamma;
  return chain;
}

struct PlanEntry {
  int channel = 0;
  double theta_estimate = 0.0;
  WaveplateChain chain;
};

struct ArmCorrections {
  PolarizationUnitary signal = PolarizationUnitary::identity();
  PolarizationUnitary idler = PolarizationUnitary::identity();
};

// Accumulated drift rotations currently acting on the two arms.
struct DriftState {
  PolarizationUnitary signal = PolarizationUnitary::identity();
  PolarizationUnitary idler = PolarizationUnitary::identity();
};

struct CompensationPlan {
  std::vector<PlanEntry> entries;
  ArmCorrections drift_correction;
  std::int64_t updated_at = 0;  // interval index of the last realignment
};

// Fit the compensation for one channel from its reconstructed state: the
// chain realizes diag(1, e^{-i theta*}) on the signal arm.
inline PlanEntry fit_plan_entry(int channel, const DensityMatrix& rho) {
  PlanEntry entry;
  entry.channel = channel;
  entry.theta_estimate = estimate_theta(rho);
  entry.chain = synthesize_chain(PolarizationUnitary::relative_phase(-entry.theta_estimate));
  return entry;
}

// Apply the fitted chain on the signal arm only (the idler path carries no
// compensation optics).
inline DensityMatrix compensate_channel(const DensityMatrix& rho, const PlanEntry& entry) {
  return apply_local(rho, compose(entry.chain), PolarizationUnitary::identity());
}

// Idealized realignment: the simulation can read the drift unitaries exactly,
// so the optimal correction is their inverse.  The monitor reference is used
// to report the residual leakage the realignment leaves behind.
inline ArmCorrections drift_realign(const DriftState& state, const Ket2& monitor_reference) {
  ArmCorrections corr;
  corr.signal = PolarizationUnitary(state.signal.mat().adjoint());
  corr.idler = PolarizationUnitary(state.idler.mat().adjoint());
  const auto residual = [&](const PolarizationUnitary& c, const PolarizationUnitary& u) {
    const Vec2 out = c.mat() * u.mat() * monitor_reference.vec();
    return 1.0 - std::norm(monitor_reference.vec().dot(out));
  };
  if (residual(corr.signal, state.signal) > 1e-6 || residual(corr.idler, state.idler) > 1e-6)
    throw std::runtime_error("drift_realign: residual leakage above 1e-6 after alignment");
  return corr;
}

}  // namespace entdist
