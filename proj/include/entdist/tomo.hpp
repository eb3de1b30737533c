#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "entdist/common.hpp"
#include "entdist/measure.hpp"
#include "entdist/optim.hpp"
#include "entdist/qstate.hpp"

// Density-matrix reconstruction from the 16 tomography count records:
// linear inversion of the Born-rule system, and maximum likelihood over the
// Cholesky-parametrized physical cone.

namespace entdist {

enum class CountSource { observed, expected };

struct TomoOptions {
  CountSource source = CountSource::observed;
  int max_evals = 100000;       // likelihood evaluation budget
  double grad_tol = 1e-6;
  double rel_nll_tol = 1e-9;
  double accidental_offset = 0.0;  // constant added to every predicted mean
};

struct StateMetrics {
  double fidelity_phi_plus = 0.0;
  double fidelity_max = 0.0;  // max over theta against (|HH>+e^{i theta}|VV>)/sqrt(2)
  double theta_star = 0.0;
  double concurrence = 0.0;
  double purity = 0.0;
};

struct ReconstructionResult {
  DensityMatrix rho;
  std::string method;
  double nll = 0.0;     // final Poisson negative log-likelihood (mle only)
  int iterations = 0;
  Mat4 linear_raw;      // unconstrained linear inversion, may be non-positive
  bool converged = true;
};

namespace detail {

// Projector matrix of one tomography setting.
inline Mat4 setting_projector(const TomoSetting& setting) {
  const Ket4 joint = Ket4::tensor(setting.signal_projector, setting.idler_projector);
  return joint.vec() * joint.vec().adjoint();
}

// Records reordered to the canonical tomo_settings_16 label order.  Throws if
// a label is missing, duplicated, or unknown.
inline std::vector<CountRecord> canonical_records(const std::vector<CountRecord>& records) {
  if (records.size() != 16)
    throw std::invalid_argument("reconstruction needs exactly 16 count records, got " +
                                std::to_string(records.size()));
  std::map<std::string, const CountRecord*> by_label;
  for (const CountRecord& rec : records) {
    if (!by_label.emplace(rec.setting.label, &rec).second)
      throw std::invalid_argument("duplicate tomography setting '" + rec.setting.label + "'");
  }
  std::vector<CountRecord> out;
  out.reserve(16);
  for (const TomoSetting& setting : tomo_settings_16()) {
    const auto it = by_label.find(setting.label);
    if (it == by_label.end())
      throw std::invalid_argument("missing tomography setting '" + setting.label + "'");
    out.push_back(*it->second);
  }
  return out;
}

inline double record_value(const CountRecord& rec, CountSource source) {
  const double v =
      source == CountSource::observed ? static_cast<double>(rec.count) : rec.expected;
  if (!(v >= 0.0))
    throw std::invalid_argument("negative value in count record '" + rec.setting.label + "'");
  return v;
}

// Completion-group normalization: the HH+HV+VV+VH settings partition unity,
// so their total estimates the per-setting count scale N.
inline double completion_total(const std::vector<CountRecord>& canonical, CountSource source) {
  double total = 0.0;
  for (int i = 0; i < 4; ++i) total += record_value(canonical[i], source);
  return total;
}

// Design matrix row nu holds vec_rowmajor(P_nu^T), so that A * vec(rho) gives
// the probabilities Tr(rho P_nu).  Cached together with its decomposition.
inline const Eigen::ColPivHouseholderQR<Eigen::MatrixXcd>& design_solver() {
  static const auto* solver = [] {
    Eigen::MatrixXcd a(16, 16);
    const auto& settings = tomo_settings_16();
    for (int nu = 0; nu < 16; ++nu) {
      const Mat4 pt = setting_projector(settings[static_cast<std::size_t>(nu)]).transpose();
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) a(nu, 4 * i + j) = pt(i, j);
    }
    return new Eigen::ColPivHouseholderQR<Eigen::MatrixXcd>(a);
  }();
  return *solver;
}

}  // namespace detail

// Linear inversion of the 16 Born-rule equations.  Output is Hermitian with
// unit trace but positivity is not guaranteed; project before using it as a
// state.
inline Mat4 linear_reconstruct(const std::vector<CountRecord>& records,
                               CountSource source = CountSource::observed) {
  const auto canonical = detail::canonical_records(records);
  const double total = detail::completion_total(canonical, source);
  if (!(total > 0.0))
    throw std::invalid_argument("linear_reconstruct: completion-group total must be > 0");
  Eigen::VectorXcd s(16);
  for (int nu = 0; nu < 16; ++nu)
    s(nu) = detail::record_value(canonical[static_cast<std::size_t>(nu)], source) / total;
  const Eigen::VectorXcd r = detail::design_solver().solve(s);
  Mat4 rho;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) rho(i, j) = r(4 * i + j);
  return 0.5 * (rho + rho.adjoint());
}

// Eigenvalue clamp + trace renormalization: nearest convenient physical state,
// used as the MLE starting point and to report metrics for linear results.
inline DensityMatrix project_to_physical(const Mat4& m) {
  const Mat4 herm = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Mat4> es(herm);
  Eigen::Vector4d lam = es.eigenvalues().cwiseMax(0.0);
  const double total = lam.sum();
  Mat4 rho;
  if (total <= 0.0) {
    rho = 0.25 * Mat4::Identity();
  } else {
    lam /= total;
    rho = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
  }
  return DensityMatrix(rho);
}

namespace detail {

// Off-diagonal parameter layout for the lower-triangular T: row-major walk of
// the strictly-lower entries.
inline constexpr std::array<std::pair<int, int>, 6> lower_pairs = {
    {{1, 0}, {2, 0}, {2, 1}, {3, 0}, {3, 1}, {3, 2}}};

inline Mat4 t_of_params(const Eigen::VectorXd& t) {
  Mat4 m = Mat4::Zero();
  for (int k = 0; k < 4; ++k) m(k, k) = t(k);
  for (std::size_t idx = 0; idx < lower_pairs.size(); ++idx) {
    const auto [i, j] = lower_pairs[idx];
    m(i, j) = Complex(t(4 + 2 * static_cast<int>(idx)), t(5 + 2 * static_cast<int>(idx)));
  }
  return m;
}

// Lower-triangular T with T^dagger T = rho, via the exchange-permuted
// Cholesky factorization (J rho J = L L^dagger with J the index-reversal).
inline Mat4 lower_t_from_rho(const Mat4& rho) {
  Mat4 j = Mat4::Zero();
  for (int i = 0; i < 4; ++i) j(i, 3 - i) = 1.0;
  const Mat4 flipped = j * rho * j;
  Eigen::LLT<Mat4> llt(flipped);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("lower_t_from_rho: Cholesky factorization failed");
  const Mat4 upper = j * Mat4(llt.matrixL()) * j;
  return upper.adjoint();
}

inline Eigen::VectorXd params_of_t(const Mat4& t) {
  Eigen::VectorXd out(16);
  for (int k = 0; k < 4; ++k) out(k) = t(k, k).real();
  for (std::size_t idx = 0; idx < lower_pairs.size(); ++idx) {
    const auto [i, j] = lower_pairs[idx];
    out(4 + 2 * static_cast<int>(idx)) = t(i, j).real();
    out(5 + 2 * static_cast<int>(idx)) = t(i, j).imag();
  }
  return out;
}

}  // namespace detail

// Maximum-likelihood reconstruction: rho(t) = T^dagger T / Tr(T^dagger T)
// with lower-triangular T (16 real parameters), minimizing the Poisson
// negative log-likelihood sum_nu [mu_nu - n_nu ln mu_nu] with
// mu_nu = N Tr(rho P_nu) + accidental_offset, floored at 1e-12 in the log.
inline ReconstructionResult mle_reconstruct(const std::vector<CountRecord>& records,
                                            const TomoOptions& options = {}) {
  const auto canonical = detail::canonical_records(records);
  const double n_scale = detail::completion_total(canonical, options.source);
  if (!(n_scale > 0.0))
    throw std::invalid_argument("mle_reconstruct: completion-group total must be > 0");

  std::array<Mat4, 16> projectors;
  Eigen::VectorXd counts(16);
  const auto& settings = tomo_settings_16();
  for (std::size_t nu = 0; nu < 16; ++nu) {
    projectors[nu] = detail::setting_projector(settings[nu]);
    counts(static_cast<int>(nu)) = detail::record_value(canonical[nu], options.source);
  }

  constexpr double mu_floor = 1e-12;
  const double offset = options.accidental_offset;
  const auto nll_fg = [&](const Eigen::VectorXd& t, Eigen::VectorXd& grad) {
    const Mat4 tm = detail::t_of_params(t);
    const Mat4 b = tm.adjoint() * tm;
    const double tau = std::max(b.trace().real(), 1e-300);
    const Mat4 rho = b / tau;
    double f = 0.0;
    Mat4 g_acc = Mat4::Zero();
    for (int nu = 0; nu < 16; ++nu) {
      const double mu_raw =
          n_scale * (rho * projectors[static_cast<std::size_t>(nu)]).trace().real() + offset;
      const double mu = std::max(mu_raw, mu_floor);
      f += mu - counts(nu) * std::log(mu);
      const double w = n_scale * (1.0 - counts(nu) / mu);
      g_acc += w * projectors[static_cast<std::size_t>(nu)];
    }
    const double tr_grho = (g_acc * rho).trace().real();
    const Mat4 w_mat = (2.0 / tau) * (tm * g_acc - tr_grho * tm);
    grad.resize(16);
    for (int k = 0; k < 4; ++k) grad(k) = w_mat(k, k).real();
    for (std::size_t idx = 0; idx < detail::lower_pairs.size(); ++idx) {
      const auto [i, j] = detail::lower_pairs[idx];
      grad(4 + 2 * static_cast<int>(idx)) = w_mat(i, j).real();
      grad(5 + 2 * static_cast<int>(idx)) = w_mat(i, j).imag();
    }
    return f;
  };

  // Initial point: positivity-projected linear inversion, nudged off the
  // boundary so the Cholesky factor exists.
  const Mat4 linear_raw = linear_reconstruct(records, options.source);
  const DensityMatrix projected = project_to_physical(linear_raw);
  constexpr double boundary_nudge = 1e-9;
  const Mat4 init =
      (1.0 - boundary_nudge) * projected.mat() + boundary_nudge * 0.25 * Mat4::Identity();
  const Eigen::VectorXd t0 = detail::params_of_t(detail::lower_t_from_rho(init));

  LbfgsOptions lopt;
  lopt.max_evals = options.max_evals;
  lopt.grad_tol = options.grad_tol;
  lopt.rel_f_tol = options.rel_nll_tol;
  const LbfgsResult fit = lbfgs_minimize(nll_fg, t0, lopt);

  const Mat4 tm = detail::t_of_params(fit.x);
  const Mat4 b = tm.adjoint() * tm;
  Mat4 rho_raw = b / b.trace().real();
  // The parametrization guarantees positivity and unit trace; symmetrize to
  // shed the last bits of rounding asymmetry before validation.
  ReconstructionResult result{DensityMatrix(0.5 * (rho_raw + rho_raw.adjoint())),
                              "mle",
                              fit.f,
                              fit.iterations,
                              linear_raw,
                              fit.converged};
  return result;
}

// Metric bundle reported per channel.
inline StateMetrics report_metrics(const DensityMatrix& rho) {
  StateMetrics m;
  m.fidelity_phi_plus = fidelity_pure(rho, bell_state(0.0));
  const PhaseFidelity pf = fidelity_max_phase(rho);
  m.fidelity_max = pf.value;
  m.theta_star = pf.theta_star;
  m.concurrence = concurrence(rho);
  m.purity = rho.purity();
  return m;
}

}  // namespace entdist
