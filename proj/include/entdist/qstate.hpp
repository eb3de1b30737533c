#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "entdist/common.hpp"

// Two-qubit polarization states and the metrics derived from them.
//
// Conventions used throughout the library:
//   * single-photon basis order (H, V)
//   * two-photon basis order (HH, HV, VH, VV), signal qubit first
//   * R = (H - iV)/sqrt(2), L = (H + iV)/sqrt(2)
//   * D = (H + V)/sqrt(2),  A = (H - V)/sqrt(2)

namespace entdist {

inline constexpr double hermitian_tol = 1e-10;
inline constexpr double trace_tol = 1e-10;
inline constexpr double eigenvalue_floor = -1e-9;

// Normalized single-photon polarization ket.
class Ket2 {
 public:
  Ket2(Complex h, Complex v) : v_(h, v) { normalize(); }
  explicit Ket2(const Vec2& v) : v_(v) { normalize(); }

  static Ket2 horizontal() { return Ket2(1.0, 0.0); }
  static Ket2 vertical() { return Ket2(0.0, 1.0); }
  static Ket2 diagonal() { return Ket2(1.0, 1.0); }
  static Ket2 antidiagonal() { return Ket2(1.0, -1.0); }
  static Ket2 right_circular() { return Ket2(1.0, Complex(0.0, -1.0)); }
  static Ket2 left_circular() { return Ket2(1.0, Complex(0.0, 1.0)); }

  const Vec2& vec() const { return v_; }
  Complex h() const { return v_(0); }
  Complex v() const { return v_(1); }

 private:
  void normalize() {
    const double n = v_.norm();
    if (!std::isfinite(n) || n < 1e-12)
      throw std::invalid_argument("Ket2: amplitudes must be finite and not all ~0");
    v_ /= n;
  }

  Vec2 v_;
};

// Normalized two-photon polarization ket, basis order (HH, HV, VH, VV).
class Ket4 {
 public:
  explicit Ket4(const Vec4& v) : v_(v) { normalize(); }

  const Vec4& vec() const { return v_; }

  static Ket4 tensor(const Ket2& signal, const Ket2& idler) {
    Vec4 v;
    v << signal.h() * idler.h(), signal.h() * idler.v(),
         signal.v() * idler.h(), signal.v() * idler.v();
    return Ket4(v);
  }

 private:
  void normalize() {
    const double n = v_.norm();
    if (!std::isfinite(n) || n < 1e-12)
      throw std::invalid_argument("Ket4: amplitudes must be finite and not all ~0");
    v_ /= n;
  }

  Vec4 v_;
};

// 2x2 unitary acting on one polarization qubit (waveplates, fiber rotations).
class PolarizationUnitary {
 public:
  explicit PolarizationUnitary(const Mat2& m) : m_(m) {
    const double dev = (m * m.adjoint() - Mat2::Identity()).cwiseAbs().maxCoeff();
    if (!(dev <= 1e-10))
      throw std::invalid_argument("PolarizationUnitary: matrix is not unitary (deviation " +
                                  std::to_string(dev) + ")");
  }

  static PolarizationUnitary identity() { return PolarizationUnitary(Mat2::Identity()); }

  // diag(1, exp(i*phase)): a pure relative phase between H and V.
  static PolarizationUnitary relative_phase(double phase) {
    Mat2 m = Mat2::Zero();
    m(0, 0) = 1.0;
    m(1, 1) = std::polar(1.0, phase);
    return PolarizationUnitary(m);
  }

  const Mat2& mat() const { return m_; }

  PolarizationUnitary operator*(const PolarizationUnitary& rhs) const {
    return PolarizationUnitary(m_ * rhs.m_);
  }

 private:
  Mat2 m_;
};

inline Mat4 kron(const Mat2& a, const Mat2& b) {
  Mat4 out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

inline Mat4 tensor(const PolarizationUnitary& signal, const PolarizationUnitary& idler) {
  return kron(signal.mat(), idler.mat());
}

// Validated two-qubit density matrix.  Construction enforces Hermiticity and
// unit trace to 1e-10 and positive semidefiniteness to an eigenvalue floor of
// -1e-9, so anything downstream can assume it holds a physical state.
class DensityMatrix {
 public:
  explicit DensityMatrix(const Mat4& m) {
    const double herm_dev = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (!(herm_dev <= hermitian_tol))
      throw std::invalid_argument("DensityMatrix: not Hermitian (deviation " +
                                  std::to_string(herm_dev) + ")");
    const Complex tr = m.trace();
    if (!(std::abs(tr - Complex(1.0, 0.0)) <= trace_tol))
      throw std::invalid_argument("DensityMatrix: trace is not 1 (got " +
                                  std::to_string(tr.real()) + ")");
    m_ = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Mat4> es(m_, Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues().minCoeff();
    if (!(min_eig >= eigenvalue_floor))
      throw std::invalid_argument("DensityMatrix: negative eigenvalue " +
                                  std::to_string(min_eig));
  }

  static DensityMatrix pure(const Ket4& psi) {
    return DensityMatrix(psi.vec() * psi.vec().adjoint());
  }

  static DensityMatrix maximally_mixed() {
    return DensityMatrix(Mat4::Identity() * 0.25);
  }

  const Mat4& mat() const { return m_; }

  double purity() const { return (m_ * m_).trace().real(); }

  // One line of 16 row-major "re,im" entries.  Lossless (%.17g both parts).
  std::string serialize() const {
    std::ostringstream out;
    char buf[64];
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        if (i != 0 || j != 0) out << ' ';
        std::snprintf(buf, sizeof buf, "%.17g,%.17g", m_(i, j).real(), m_(i, j).imag());
        out << buf;
      }
    }
    return out.str();
  }

  static DensityMatrix deserialize(const std::string& text) {
    std::istringstream in(text);
    Mat4 m;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        std::string tok;
        if (!(in >> tok))
          throw std::invalid_argument("DensityMatrix::deserialize: expected 16 entries");
        const auto comma = tok.find(',');
        if (comma == std::string::npos)
          throw std::invalid_argument("DensityMatrix::deserialize: entry '" + tok +
                                      "' is not re,im");
        try {
          m(i, j) = Complex(std::stod(tok.substr(0, comma)), std::stod(tok.substr(comma + 1)));
        } catch (const std::exception&) {
          throw std::invalid_argument("DensityMatrix::deserialize: bad number in '" + tok + "'");
        }
      }
    }
    std::string extra;
    if (in >> extra)
      throw std::invalid_argument("DensityMatrix::deserialize: trailing data '" + extra + "'");
    return DensityMatrix(m);
  }

 private:
  Mat4 m_;
};

// (|HH> + exp(i*theta)|VV>) / sqrt(2)
inline Ket4 bell_state(double theta) {
  Vec4 v = Vec4::Zero();
  v(0) = 1.0 / std::sqrt(2.0);
  v(3) = std::polar(1.0 / std::sqrt(2.0), theta);
  return Ket4(v);
}

// p * |psi(theta)><psi(theta)| + (1-p) * I/4
inline DensityMatrix werner_state(double p, double theta) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("werner_state: p must be in [0,1]");
  const Ket4 psi = bell_state(theta);
  Mat4 m = p * (psi.vec() * psi.vec().adjoint()) + (1.0 - p) * 0.25 * Mat4::Identity();
  return DensityMatrix(m);
}

// <psi| rho |psi>
inline double fidelity_pure(const DensityMatrix& rho, const Ket4& psi) {
  const Complex val = psi.vec().adjoint() * rho.mat() * psi.vec();
  return val.real();
}

struct PhaseFidelity {
  double value;       // max over theta of <psi(theta)|rho|psi(theta)>
  double theta_star;  // maximizing phase, 0 by convention when rho_{HH,VV} ~ 0
};

// Best fidelity against the phase family (|HH> + e^{i theta}|VV>)/sqrt(2).
// F(theta) = (rho_00 + rho_33)/2 + Re(e^{i theta} rho_03), maximized at
// theta* = -arg(rho_03) with value (rho_00 + rho_33)/2 + |rho_03|.
inline PhaseFidelity fidelity_max_phase(const DensityMatrix& rho) {
  const Mat4& m = rho.mat();
  const Complex coh = m(0, 3);
  PhaseFidelity out;
  out.value = 0.5 * (m(0, 0).real() + m(3, 3).real()) + std::abs(coh);
  out.theta_star = (std::abs(coh) > 0.0) ? -std::arg(coh) : 0.0;
  return out;
}

namespace detail {

// Hermitian PSD square root; tiny negative eigenvalues from rounding clamp to 0.
inline Mat4 psd_sqrt(const Mat4& m) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(m);
  Eigen::Vector4d lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

// Uhlmann fidelity F(rho, sigma) = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
inline double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  const Mat4 sr = detail::psd_sqrt(rho.mat());
  Eigen::SelfAdjointEigenSolver<Mat4> es(sr * sigma.mat() * sr, Eigen::EigenvaluesOnly);
  const double tr = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return tr * tr;
}

// Wootters concurrence.  With rho_tilde = (sy x sy) rho* (sy x sy), the
// lambda_i are the square roots of the eigenvalues of
// sqrt(rho) rho_tilde sqrt(rho), which is Hermitian PSD and therefore
// numerically better behaved than the non-Hermitian product rho*rho_tilde.
inline double concurrence(const DensityMatrix& rho) {
  Mat4 yy = Mat4::Zero();
  // sigma_y x sigma_y in the (HH,HV,VH,VV) basis: antidiagonal (-1,1,1,-1).
  yy(0, 3) = -1.0;
  yy(1, 2) = 1.0;
  yy(2, 1) = 1.0;
  yy(3, 0) = -1.0;
  const Mat4 rho_tilde = yy * rho.mat().conjugate() * yy;
  const Mat4 sr = detail::psd_sqrt(rho.mat());
  Eigen::SelfAdjointEigenSolver<Mat4> es(sr * rho_tilde * sr, Eigen::EigenvaluesOnly);
  Eigen::Vector4d lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  std::sort(lam.data(), lam.data() + 4, std::greater<double>());
  return std::max(0.0, lam(0) - lam(1) - lam(2) - lam(3));
}

// (Us x Ui) rho (Us x Ui)^dagger
inline DensityMatrix apply_local(const DensityMatrix& rho, const PolarizationUnitary& signal,
                                 const PolarizationUnitary& idler) {
  const Mat4 u = tensor(signal, idler);
  return DensityMatrix(u * rho.mat() * u.adjoint());
}

}  // namespace entdist
