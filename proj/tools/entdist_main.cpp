// entdist: wavelength-multiplexed entanglement-distribution simulator.
//
// Subcommands: plan | simulate | tomo | compensate | sweep | report.
// Exit codes: 0 success, 1 usage error, 2 validation error,
// 3 runtime error with partial results.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "entdist/sweep.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using namespace entdist;

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  std::string channels_text;
  bool noiseless = false;
  std::string format = "csv";
  int threads = 1;
};

// "1,5,9" and "1-8,44" style channel selections.
std::vector<int> parse_channel_list(const std::string& text) {
  std::vector<int> out;
  std::size_t pos = 0;
  const auto parse_int = [&](const std::string& tok) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(tok, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("--channels: '" + tok + "' is not a channel number");
    }
    if (used != tok.size())
      throw std::invalid_argument("--channels: '" + tok + "' is not a channel number");
    return v;
  };
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string token =
        text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (token.empty()) throw std::invalid_argument("--channels: empty entry in list");
    const auto dash = token.find('-', 1);  // allow a leading '-' to fail as a number below
    if (dash == std::string::npos) {
      out.push_back(parse_int(token));
    } else {
      const int lo = parse_int(token.substr(0, dash));
      const int hi = parse_int(token.substr(dash + 1));
      if (hi < lo) throw std::invalid_argument("--channels: range '" + token + "' is inverted");
      for (int v = lo; v <= hi; ++v) out.push_back(v);
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

RunConfig make_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_path.empty()) {
    cfg = load_config(args.config_path);
  } else {
    cfg.validate();
  }
  if (args.seed_set) {
    // A seed override re-seeds the whole run, drift streams included.
    cfg.seed = args.seed;
    cfg.link.seed = args.seed;
  }
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  return cfg;
}

SweepOptions make_sweep_options(const CommonArgs& args) {
  SweepOptions opt;
  opt.noiseless = args.noiseless;
  opt.threads = args.threads;
  if (!args.channels_text.empty()) opt.channels = parse_channel_list(args.channels_text);
  return opt;
}

int run_plan(const CommonArgs& args) {
  const RunConfig cfg = make_config(args);
  const auto plan = build_plan(cfg.grid);
  const auto violations = validate_plan(plan, cfg.grid);
  if (!violations.empty()) {
    for (const Violation& v : violations)
      std::cerr << "channel " << v.channel << ": " << v.detail << "\n";
    return 2;
  }
  if (args.format == "json") {
    json rows = json::array();
    for (const ChannelPair& ch : plan)
      rows.push_back({{"index", ch.index},
                      {"signal_nm", ch.signal_wavelength_nm},
                      {"idler_nm", ch.idler_wavelength_nm},
                      {"signal_THz", ch.signal_freq_thz},
                      {"idler_THz", ch.idler_freq_thz}});
    std::cout << rows.dump(2) << "\n";
  } else {
    std::cout << "index,signal_nm,idler_nm,signal_THz,idler_THz\n";
    for (const ChannelPair& ch : plan)
      std::cout << ch.index << ',' << format_double(ch.signal_wavelength_nm) << ','
                << format_double(ch.idler_wavelength_nm) << ','
                << format_double(ch.signal_freq_thz) << ','
                << format_double(ch.idler_freq_thz) << '\n';
  }
  return 0;
}

struct FidelityStats {
  std::size_t count = 0;
  double min = 0.0, median = 0.0, max = 0.0;
};

FidelityStats fidelity_stats(std::vector<double> values) {
  FidelityStats s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  const std::size_t n = values.size();
  s.median = (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  return s;
}

void print_sweep_summary(const SweepResult& result, const std::string& out_dir) {
  std::vector<double> fids;
  for (const ChannelOutcome& ch : result.outcomes)
    if (ch.reconstructed) fids.push_back(ch.raw_metrics.fidelity_max);
  const FidelityStats s = fidelity_stats(std::move(fids));
  std::cout << "sweep: " << result.outcomes.size() << " channels";
  if (s.count > 0)
    std::cout << ", fidelity_max min=" << format_double(s.min)
              << " median=" << format_double(s.median) << " max=" << format_double(s.max);
  std::cout << ", artifacts in " << out_dir << "\n";
}

int run_sweep_cmd(const CommonArgs& args, bool counts_only) {
  const RunConfig cfg = make_config(args);
  SweepOptions opt = make_sweep_options(args);
  opt.counts_only = counts_only;
  const SweepResult result = run_sweep(cfg, opt);
  write_sweep_files(result, cfg, counts_only);
  if (counts_only) {
    std::cout << "simulate: " << result.outcomes.size() << " channels, wrote "
              << (fs::path(cfg.out_dir) / "counts.csv").string() << "\n";
  } else {
    print_sweep_summary(result, cfg.out_dir);
  }
  if (result.any_error) {
    for (const ChannelOutcome& ch : result.outcomes)
      if (!ch.error.empty())
        std::cerr << "channel " << ch.pair.index << ": " << ch.error << "\n";
    return 3;
  }
  return 0;
}

// Re-ingest counts.csv rows into per-channel outcome shells.
std::vector<ChannelOutcome> read_counts_file(const std::string& path) {
  CsvTable table;
  try {
    table = read_csv_file(path);
    require_columns(table, {"channel", "label", "count", "expected", "integration_s"},
                    "counts file");
  } catch (const std::runtime_error& e) {
    throw std::invalid_argument(e.what());  // malformed input is a validation failure
  }
  std::map<std::string, const TomoSetting*> by_label;
  for (const TomoSetting& setting : tomo_settings_16()) by_label[setting.label] = &setting;

  std::vector<ChannelOutcome> outcomes;
  std::map<int, std::size_t> index_of;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = "counts file row " + std::to_string(r + 2);
    const long long channel = parse_int_field(row[0], where);
    const auto label_it = by_label.find(row[1]);
    if (label_it == by_label.end())
      throw std::invalid_argument(where + ": unknown setting label '" + row[1] + "'");
    CountRecord rec;
    rec.setting = *label_it->second;
    rec.count = parse_int_field(row[2], where);
    rec.expected = parse_double_field(row[3], where);
    rec.integration_time = parse_double_field(row[4], where);

    const auto found = index_of.find(static_cast<int>(channel));
    std::size_t slot;
    if (found == index_of.end()) {
      slot = outcomes.size();
      index_of.emplace(static_cast<int>(channel), slot);
      outcomes.emplace_back();
      outcomes[slot].pair.index = static_cast<int>(channel);
    } else {
      slot = found->second;
    }
    outcomes[slot].records.push_back(rec);
  }
  if (outcomes.empty()) throw std::invalid_argument("counts file '" + path + "' has no rows");
  return outcomes;
}

int run_reconstruction_cmd(const CommonArgs& args, bool write_compensation) {
  const RunConfig cfg = make_config(args);
  const std::string counts_path = (fs::path(cfg.out_dir) / "counts.csv").string();
  SweepResult result;
  result.outcomes = read_counts_file(counts_path);
  const CountSource source = args.noiseless ? CountSource::expected : CountSource::observed;
  for (ChannelOutcome& out : result.outcomes) {
    try {
      reconstruct_outcome(out, cfg.tomo, source);
    } catch (const std::exception& e) {
      out.error = e.what();
      result.any_error = true;
    }
  }
  std::string written;
  if (write_compensation) {
    written = (fs::path(cfg.out_dir) / "compensation.csv").string();
    write_compensation_csv(result, written);
  } else {
    written = (fs::path(cfg.out_dir) / "metrics.csv").string();
    write_metrics_csv(result, written);
  }
  std::cout << (write_compensation ? "compensate: " : "tomo: ") << result.outcomes.size()
            << " channels, wrote " << written << "\n";
  if (result.any_error) {
    for (const ChannelOutcome& ch : result.outcomes)
      if (!ch.error.empty())
        std::cerr << "channel " << ch.pair.index << ": " << ch.error << "\n";
    return 3;
  }
  return 0;
}

int run_report(const CommonArgs& args) {
  const RunConfig cfg = make_config(args);
  const std::string metrics_path = (fs::path(cfg.out_dir) / "metrics.csv").string();
  CsvTable table;
  try {
    table = read_csv_file(metrics_path);
    require_columns(table,
                    {"channel", "fidelity_phi_plus", "fidelity_max", "theta_star", "concurrence",
                     "purity", "method", "converged"},
                    "metrics file");
  } catch (const std::runtime_error& e) {
    throw std::invalid_argument(e.what());
  }
  std::vector<std::pair<long long, double>> rows;
  rows.reserve(table.rows.size());
  std::vector<double> fids;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string where = "metrics file row " + std::to_string(r + 2);
    const long long channel = parse_int_field(table.rows[r][0], where);
    const double fmax = parse_double_field(table.rows[r][2], where);
    rows.emplace_back(channel, fmax);
    fids.push_back(fmax);
  }
  const FidelityStats s = fidelity_stats(std::move(fids));
  if (args.format == "json") {
    json doc;
    doc["rows"] = json::array();
    for (const auto& [channel, fmax] : rows)
      doc["rows"].push_back({{"channel", channel}, {"fidelity_max", fmax}});
    doc["summary"] = {
        {"channels", s.count}, {"min", s.min}, {"median", s.median}, {"max", s.max}};
    std::cout << doc.dump(2) << "\n";
  } else {
    std::cout << "channel,fidelity_max\n";
    for (const auto& [channel, fmax] : rows)
      std::cout << channel << ',' << format_double(fmax) << '\n';
    std::cout << "fidelity_max over " << s.count << " channels: min=" << format_double(s.min)
              << " median=" << format_double(s.median) << " max=" << format_double(s.max)
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wavelength-multiplexed entanglement distribution simulator"};
  app.require_subcommand(1);

  CommonArgs args;
  auto* config_opt = app.add_option("--config", args.config_path, "Run configuration file");
  config_opt->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", args.seed, "Override the run seed");
  app.add_option("--out-dir", args.out_dir, "Artifact directory (default from config)");
  app.add_option("--channels", args.channels_text,
                 "Channel subset, e.g. 1,5,9 or 1-8,44 (default: all)");
  app.add_flag("--noiseless", args.noiseless, "Expected-value mode: no Poisson sampling");
  app.add_option("--format", args.format, "Stdout format for plan/report")
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--threads", args.threads, "Worker threads for sweep/simulate")
      ->check(CLI::PositiveNumber);

  CLI::App* plan = app.add_subcommand("plan", "Print the channel frequency plan");
  CLI::App* simulate =
      app.add_subcommand("simulate", "Acquire tomography counts and write counts.csv");
  CLI::App* tomo =
      app.add_subcommand("tomo", "Reconstruct states from counts.csv and write metrics.csv");
  CLI::App* compensate = app.add_subcommand(
      "compensate", "Fit waveplate settings from counts.csv and write compensation.csv");
  CLI::App* sweep = app.add_subcommand("sweep", "Full acquisition + reconstruction sweep");
  CLI::App* report = app.add_subcommand("report", "Summarize metrics.csv");
  for (CLI::App* sub : {plan, simulate, tomo, compensate, sweep, report}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // help/version are success; everything else is usage
  }
  args.seed_set = seed_opt->count() > 0;

  try {
    if (plan->parsed()) return run_plan(args);
    if (simulate->parsed()) return run_sweep_cmd(args, /*counts_only=*/true);
    if (tomo->parsed()) return run_reconstruction_cmd(args, /*write_compensation=*/false);
    if (compensate->parsed()) return run_reconstruction_cmd(args, /*write_compensation=*/true);
    if (sweep->parsed()) return run_sweep_cmd(args, /*counts_only=*/false);
    if (report->parsed()) return run_report(args);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const PlanInfeasible& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
