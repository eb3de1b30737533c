#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "entdist/channel_grid.hpp"
#include "entdist/compensate.hpp"
#include "entdist/config.hpp"
#include "entdist/csv.hpp"
#include "entdist/link.hpp"
#include "entdist/measure.hpp"
#include "entdist/qstate.hpp"
#include "entdist/rng.hpp"
#include "entdist/source.hpp"
#include "entdist/tomo.hpp"

// The full experiment loop: for every channel, emit the source state, pass
// it through the drifting fiber link, acquire the 16 tomography settings,
// reconstruct, fit the phase compensation, and report metrics.
//
// Time model: one interval = one tomography-setting acquisition slot.
// Channel n's setting j occupies global slot t = 16*(n-1) + j, and the arms
// are realigned every `compensation.every` slots (the realignment zeroes the
// accumulated drift, so each window owns an independent random walk).
//
// Determinism: channel n's Poisson draws come from a stream derived from
// (seed, n); drift windows derive from (link.seed, arm, window).  No stream
// is shared across channels, so any thread schedule produces identical
// output.

namespace entdist {

struct SweepOptions {
  bool noiseless = false;     // expected-value mode, no sampling, no accidentals
  std::vector<int> channels;  // 1-based subset; empty = all
  int threads = 1;
  bool counts_only = false;   // stop after acquisition (the `simulate` subcommand)
};

struct SweepRow {
  int index = 0;
  double signal_nm = 0.0;
  double idler_nm = 0.0;
  std::int64_t hh_counts = 0;
  double fidelity_phi_plus = std::numeric_limits<double>::quiet_NaN();
  double fidelity_max = std::numeric_limits<double>::quiet_NaN();
  double theta_star = std::numeric_limits<double>::quiet_NaN();
  double concurrence = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
};

struct ChannelOutcome {
  ChannelPair pair;
  std::vector<CountRecord> records;
  bool reconstructed = false;
  StateMetrics raw_metrics;      // metrics of the reconstruction, pre-compensation
  std::string method;
  bool converged = false;
  bool has_plan = false;
  PlanEntry plan;
  StateMetrics comp_metrics;     // metrics after applying the fitted chain
  std::string error;             // nonempty if this channel failed
};

struct SweepReport {
  std::vector<SweepRow> rows;
};

struct SweepResult {
  std::vector<ChannelOutcome> outcomes;
  SweepReport report;
  bool any_error = false;
};

inline constexpr int settings_per_channel = 16;

// Reconstruction + compensation-fit stage shared by the in-memory sweep and
// the file-driven tomo/compensate subcommands.  Expects out.records to be
// filled; throws on unreconstructable input (caller decides how to isolate).
inline void reconstruct_outcome(ChannelOutcome& out, const TomoConfig& tomo,
                                CountSource source) {
  TomoOptions topt;
  topt.source = source;
  topt.max_evals = tomo.max_evals;
  DensityMatrix rho = DensityMatrix::maximally_mixed();
  if (tomo.method == "mle") {
    ReconstructionResult recon = mle_reconstruct(out.records, topt);
    rho = recon.rho;
    out.converged = recon.converged;
  } else {
    rho = project_to_physical(linear_reconstruct(out.records, topt.source));
    out.converged = true;
  }
  out.method = tomo.method;
  out.reconstructed = true;
  out.raw_metrics = report_metrics(rho);

  try {
    out.plan = fit_plan_entry(out.pair.index, rho);
    out.has_plan = true;
    out.comp_metrics = report_metrics(compensate_channel(rho, out.plan));
  } catch (const NoPhaseInformation&) {
    out.has_plan = false;  // no coherence to compensate; report raw metrics
    out.comp_metrics = out.raw_metrics;
  }
}

namespace detail {

inline constexpr std::uint64_t counts_domain = 0x636f756e;  // rng domain tag

// Drift rotation of one arm at global slot `t` under realignment every
// `every` slots (0 = never realign).
inline PolarizationUnitary drift_at_slot(const LinkParams& link, Arm arm, std::int64_t t,
                                         int every) {
  const std::uint64_t window = every > 0 ? static_cast<std::uint64_t>(t / every) : 0;
  const std::int64_t offset = every > 0 ? t % every : t;
  RngStream rng = drift_stream(link, arm, window);
  return drift_unitary(offset, link, rng);
}

inline ChannelOutcome run_channel(const RunConfig& cfg, const ChannelPair& pair,
                                  const SweepOptions& opt) {
  ChannelOutcome out;
  out.pair = pair;
  try {
    const DensityMatrix source_state = emit_state(pair, cfg.source);
    const double rate = pair_rate(pair, cfg.source, cfg.detector.gate_rate);
    RngStream count_rng =
        RngStream::derive(cfg.seed, static_cast<std::uint64_t>(pair.index), 0, counts_domain);

    const auto& settings = tomo_settings_16();
    out.records.reserve(settings.size());
    for (std::size_t j = 0; j < settings.size(); ++j) {
      const std::int64_t slot =
          static_cast<std::int64_t>(pair.index - 1) * settings_per_channel +
          static_cast<std::int64_t>(j);
      const PolarizationUnitary d_s =
          drift_at_slot(cfg.link, Arm::signal, slot, cfg.compensation_every);
      const PolarizationUnitary d_i =
          drift_at_slot(cfg.link, Arm::idler, slot, cfg.compensation_every);
      const DensityMatrix rho = apply_link_with_drift(source_state, pair, cfg.link, d_s, d_i);

      CountRecord rec;
      rec.setting = settings[j];
      rec.integration_time = cfg.detector.integration_time;
      if (opt.noiseless) {
        rec.expected = expected_coincidences(rho, settings[j], cfg.detector, cfg.link, rate);
        rec.count = static_cast<std::int64_t>(std::llround(rec.expected));
      } else {
        rec.expected = expected_counts(rho, settings[j], cfg.detector, cfg.link, rate);
        rec.count = sample_counts(rec.expected, count_rng);
      }
      out.records.push_back(rec);
    }
    if (opt.counts_only) return out;

    reconstruct_outcome(out, cfg.tomo,
                        opt.noiseless ? CountSource::expected : CountSource::observed);
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

inline SweepRow row_of_outcome(const ChannelOutcome& out) {
  SweepRow row;
  row.index = out.pair.index;
  row.signal_nm = out.pair.signal_wavelength_nm;
  row.idler_nm = out.pair.idler_wavelength_nm;
  for (const CountRecord& rec : out.records)
    if (rec.setting.label == "HH") row.hh_counts = rec.count;
  if (out.reconstructed) {
    row.fidelity_phi_plus = out.comp_metrics.fidelity_phi_plus;
    row.fidelity_max = out.raw_metrics.fidelity_max;
    row.theta_star = out.raw_metrics.theta_star;
    row.concurrence = out.raw_metrics.concurrence;
    row.converged = out.converged && out.error.empty();
  }
  return row;
}

}  // namespace detail

// Channels to run: the full plan, or the subset selected in options.
inline std::vector<ChannelPair> select_channels(const std::vector<ChannelPair>& plan,
                                                const std::vector<int>& subset) {
  if (subset.empty()) return plan;
  std::vector<ChannelPair> out;
  out.reserve(subset.size());
  for (int index : subset) {
    if (index < 1 || index > static_cast<int>(plan.size()))
      throw std::invalid_argument("channel " + std::to_string(index) +
                                  " is outside the plan (1.." + std::to_string(plan.size()) +
                                  ")");
    out.push_back(plan[static_cast<std::size_t>(index - 1)]);
  }
  return out;
}

inline SweepResult run_sweep(const RunConfig& cfg, const SweepOptions& opt = {}) {
  cfg.validate();
  const std::vector<ChannelPair> plan = build_plan(cfg.grid);
  const std::vector<ChannelPair> selected = select_channels(plan, opt.channels);

  SweepResult result;
  result.outcomes.resize(selected.size());

  const int threads = std::max(1, opt.threads);
  if (threads == 1 || selected.size() <= 1) {
    for (std::size_t i = 0; i < selected.size(); ++i)
      result.outcomes[i] = detail::run_channel(cfg, selected[i], opt);
  } else {
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= selected.size()) return;
        result.outcomes[i] = detail::run_channel(cfg, selected[i], opt);
      }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min<int>(threads, static_cast<int>(selected.size()));
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  result.report.rows.reserve(result.outcomes.size());
  for (const ChannelOutcome& out : result.outcomes) {
    result.report.rows.push_back(detail::row_of_outcome(out));
    if (!out.error.empty()) result.any_error = true;
  }
  return result;
}

// ---- Artifact files -------------------------------------------------------

inline void write_counts_csv(const SweepResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "channel,label,count,expected,integration_s\n";
  for (const ChannelOutcome& ch : result.outcomes)
    for (const CountRecord& rec : ch.records)
      out << ch.pair.index << ',' << rec.setting.label << ',' << rec.count << ','
          << format_double(rec.expected) << ',' << format_double(rec.integration_time) << '\n';
}

inline void write_metrics_csv(const SweepResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "channel,fidelity_phi_plus,fidelity_max,theta_star,concurrence,purity,method,converged\n";
  for (const ChannelOutcome& ch : result.outcomes) {
    if (!ch.reconstructed) continue;
    const StateMetrics& m = ch.raw_metrics;
    out << ch.pair.index << ',' << format_double(m.fidelity_phi_plus) << ','
        << format_double(m.fidelity_max) << ',' << format_double(m.theta_star) << ','
        << format_double(m.concurrence) << ',' << format_double(m.purity) << ',' << ch.method
        << ',' << (ch.converged ? "true" : "false") << '\n';
  }
}

inline void write_compensation_csv(const SweepResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "channel,theta_estimate,q1_deg,q2_deg,h_deg\n";
  constexpr double deg = 180.0 / pi;
  for (const ChannelOutcome& ch : result.outcomes) {
    if (!ch.has_plan) continue;
    out << ch.pair.index << ',' << format_double(ch.plan.theta_estimate) << ','
        << format_double(ch.plan.chain.qwp1_angle * deg) << ','
        << format_double(ch.plan.chain.qwp2_angle * deg) << ','
        << format_double(ch.plan.chain.hwp_angle * deg) << '\n';
  }
}

inline void write_report_csv(const SweepReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "index,signal_nm,idler_nm,hh_counts,fidelity_phi_plus,fidelity_max,theta_star,"
         "concurrence,converged\n";
  for (const SweepRow& row : report.rows)
    out << row.index << ',' << format_double(row.signal_nm) << ',' << format_double(row.idler_nm)
        << ',' << row.hh_counts << ',' << format_double(row.fidelity_phi_plus) << ','
        << format_double(row.fidelity_max) << ',' << format_double(row.theta_star) << ','
        << format_double(row.concurrence) << ',' << (row.converged ? "true" : "false") << '\n';
}

// Write the artifact set into cfg.out_dir: counts.csv always; metrics,
// compensation, and report files when reconstruction ran.
inline void write_sweep_files(const SweepResult& result, const RunConfig& cfg,
                              bool counts_only = false) {
  std::filesystem::create_directories(cfg.out_dir);
  const auto path = [&](const char* name) {
    return (std::filesystem::path(cfg.out_dir) / name).string();
  };
  write_counts_csv(result, path("counts.csv"));
  if (counts_only) return;
  write_metrics_csv(result, path("metrics.csv"));
  write_compensation_csv(result, path("compensation.csv"));
  write_report_csv(result.report, path("report.csv"));
}

}  // namespace entdist
