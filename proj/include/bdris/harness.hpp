#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "bdris/benchmark.hpp"
#include "bdris/config.hpp"
#include "bdris/csv.hpp"
#include "bdris/experiments.hpp"
#include "bdris/qml.hpp"

namespace bdris::harness {

inline constexpr const char* kToolVersion = "bdris 0.1.0";

enum ExitCode : int { kOk = 0, kConfigFault = 1, kRuntimeFault = 2 };

struct RunOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  int threads = 1;
  bool timing = true;
  bool strict = false;
};

struct Check {
  std::string name;
  std::string status;  // pass | fail | skipped
  std::string detail;
};

struct FileSchema {
  std::string file;
  std::vector<std::pair<std::string, std::string>> columns;  // name, meaning
};

/// Column layout of every CSV an experiment writes; schema.txt is rendered
/// from this table.
inline std::vector<FileSchema> schemas(config::Experiment e) {
  const FileSchema checks{"checks.csv",
                          {{"check", "ordinal check name"},
                           {"status", "pass, fail or skipped"},
                           {"detail", "values behind the verdict"}}};
  const FileSchema plots{"plotspec.csv",
                         {{"figure", "figure name"},
                          {"file", "CSV holding the data"},
                          {"x", "x column"},
                          {"y", "y column"},
                          {"series", "column distinguishing curves (may be empty)"}}};
  switch (e) {
    case config::Experiment::PowerComparison:
      return {{"results.csv",
               {{"N", "surface elements"},
                {"ris_type", "diagonal, fully-connected or random-unitary"},
                {"trial", "trial index"},
                {"received_power_dbm", "tag received power (dBm)"}}},
              {"summary.csv",
               {{"N", "surface elements"},
                {"ris_type", "as in results.csv"},
                {"mean_power_dbm", "10 log10 of the trial-mean linear power (dBm)"},
                {"mean_gap_db", "trial mean of the per-realization gap to diagonal (dB)"}}},
              checks,
              plots};
    case config::Experiment::BeamformingBench: {
      FileSchema results{"results.csv", {}};
      const std::vector<std::string> meaning{
          "rzf, fp, ao or qnm",
          "surface elements",
          "trial index",
          "sum rate averaged over the trial's snapshots (bits/s/Hz)",
          "optimizer wall-clock time (s); NA with --no-timing",
          "iterations performed",
          "converged flag (true/false)",
          "sum rate divided by the device count (bits/s/Hz)",
          "objective the algorithm optimized: channel_gain or sum_rate"};
      const auto& h = optim::benchmark_csv_header();
      for (std::size_t i = 0; i < h.size(); ++i) results.columns.emplace_back(h[i], meaning[i]);
      return {results,
              {"summary.csv",
               {{"algorithm", "rzf, fp, ao or qnm"},
                {"N", "surface elements"},
                {"mean_sum_rate_bps_hz", "trial mean of sum_rate_bps_hz"},
                {"std_sum_rate_bps_hz", "trial standard deviation of sum_rate_bps_hz"},
                {"mean_wall_time_s", "trial mean wall time (s); NA with --no-timing"},
                {"median_wall_time_s", "trial median wall time (s); NA with --no-timing"},
                {"std_wall_time_s", "trial standard deviation of wall time (s); NA with --no-timing"},
                {"mean_iterations", "trial mean iteration count"},
                {"converged_fraction", "fraction of trials flagged converged"}}},
              checks,
              plots};
    }
    case config::Experiment::QmlBeam:
      return {{"results.csv",
               {{"epoch", "epoch number (1-based, after the update)"},
                {"split", "train or validation"},
                {"cross_entropy", "mean softmax cross-entropy (nats)"},
                {"acc_delta0", "distance accuracy, |pred - true| <= 0 (top-1)"},
                {"acc_delta1", "distance accuracy, |pred - true| <= 1"},
                {"acc_delta2", "distance accuracy, |pred - true| <= 2"}}},
              {"summary.csv", {{"beam", "beam index"}, {"frequency", "relative frequency in the dataset"}}},
              {"confusion.csv",
               {{"true\\pred", "true beam (rows); remaining columns are predicted beams 0..B-1"}}},
              {"dataset.csv", {{"f0", "x position + noise"}, {"f1", "y position + noise"}, {"label", "beam index"}}},
              checks,
              plots};
  }
  return {};
}

inline std::string header_line(const FileSchema& s) {
  std::string h;
  for (std::size_t i = 0; i < s.columns.size(); ++i) h += (i ? "," : "") + s.columns[i].first;
  return h;
}

inline void write_schema(std::ostream& os, config::Experiment e) {
  for (const auto& s : schemas(e)) {
    os << "file: " << s.file << '\n' << "columns: " << header_line(s) << '\n';
    for (const auto& [name, meaning] : s.columns) os << "  " << name << ": " << meaning << '\n';
    os << '\n';
  }
  os << "Reals use 17 significant digits; booleans are true/false; line endings are \\n.\n";
}

namespace detail {

inline void write_checks(std::ostream& os, const std::vector<Check>& checks) {
  os << "check,status,detail\n";
  for (const auto& c : checks) os << c.name << ',' << c.status << ',' << c.detail << '\n';
}

inline Check verdict(std::string name, bool ok, std::string detail) {
  return {std::move(name), ok ? "pass" : "fail", std::move(detail)};
}

inline std::string fmt(double v) { return csv::format_double(v); }

struct Outputs {
  std::string results;
  std::vector<std::pair<std::string, std::string>> extra;  // file, contents
  std::vector<Check> checks;
  std::vector<std::string> plotspec;                       // rows after the header
  std::vector<std::uint64_t> trial_seeds;
  std::vector<std::string> warnings;
};

inline Outputs power_outputs(const config::ExperimentConfig& c) {
  experiments::PowerComparisonOptions o;
  o.element_counts = *c.element_counts;
  o.trials = *c.trials;
  o.geometry = c.scenario.geometry;
  o.pathloss = c.scenario.pathloss;
  o.fading = c.scenario.fading;
  o.budget = c.scenario.budget;
  o.random_baseline = c.random_baseline;
  o.master_seed = c.seed;
  const auto table = experiments::power_comparison(o);
  const auto summary = experiments::summarize(table);

  Outputs out;
  out.trial_seeds = table.trial_seeds;
  std::ostringstream res, sum;
  experiments::write_power_csv(res, table);
  out.results = res.str();
  sum << "N,ris_type,mean_power_dbm,mean_gap_db\n";
  csv::RowWriter w(sum);
  for (const auto& s : summary) w.row(s.n, s.ris_type, s.mean_power_dbm, s.mean_gap_db);
  out.extra.emplace_back("summary.csv", sum.str());

  auto find = [&](Index n, const std::string& type) {
    return *std::find_if(summary.begin(), summary.end(),
                         [&](const auto& s) { return s.n == n && s.ris_type == type; });
  };
  out.checks.push_back(verdict("fully_connected_dominates_every_realization", table.dominance_holds,
                               "exact per-realization comparison"));
  bool mean_ok = true, gap_ok = true;
  std::string mean_detail, gap_detail;
  double prev_gap = -INFINITY;
  std::vector<Index> ns = *c.element_counts;
  std::sort(ns.begin(), ns.end());
  for (Index n : ns) {
    const auto d = find(n, "diagonal"), f = find(n, "fully-connected");
    mean_ok = mean_ok && f.mean_power_dbm >= d.mean_power_dbm;
    gap_ok = gap_ok && f.mean_gap_db >= prev_gap;
    prev_gap = f.mean_gap_db;
    mean_detail += (mean_detail.empty() ? "" : " ") + std::string("N=") + std::to_string(n) + ":" +
                   fmt(f.mean_power_dbm - d.mean_power_dbm);
    gap_detail += (gap_detail.empty() ? "" : " ") + std::string("N=") + std::to_string(n) + ":" +
                  fmt(f.mean_gap_db);
  }
  out.checks.push_back(verdict("bdris_mean_power_ge_ris_every_N", mean_ok, mean_detail));
  out.checks.push_back(verdict("mean_gap_db_non_decreasing_in_N", gap_ok, gap_detail));
  out.plotspec.push_back("ris-vs-bdris,summary.csv,N,mean_power_dbm,ris_type");
  out.plotspec.push_back("gap,summary.csv,N,mean_gap_db,ris_type");
  return out;
}

inline Outputs bench_outputs(const config::ExperimentConfig& c, int threads, bool timing) {
  optim::BenchmarkOptions o;
  o.algorithms = c.algorithms;
  o.element_counts = *c.element_counts;
  o.trials = *c.trials;
  o.scenario = c.scenario;
  o.optimizer = c.optimizer;
  o.master_seed = c.seed;
  o.threads = threads;
  const Index n_max = *std::max_element(o.element_counts.begin(), o.element_counts.end());
  o.architecture = config::parse_architecture(c.architecture, n_max);

  optim::BenchmarkTable table;
  if (std::holds_alternative<surface::GroupConnected>(o.architecture)) {
    // Group structure depends on N: run each N separately and merge.
    for (Index n : *c.element_counts) {
      optim::BenchmarkOptions one = o;
      one.element_counts = {n};
      one.architecture = config::parse_architecture(c.architecture, n);
      auto t = optim::benchmark(one);
      table.trial_seeds = t.trial_seeds;
      for (auto& r : t.rows) table.rows.push_back(std::move(r));
      for (auto& w : t.warnings) table.warnings.push_back(std::move(w));
    }
  } else {
    table = optim::benchmark(o);
  }
  const auto summary = optim::summarize(table);

  Outputs out;
  out.trial_seeds = table.trial_seeds;
  out.warnings = table.warnings;
  std::ostringstream res, sum;
  optim::write_benchmark_csv(res, table, timing);
  out.results = res.str();
  sum << "algorithm,N,mean_sum_rate_bps_hz,std_sum_rate_bps_hz,mean_wall_time_s,median_wall_time_s,"
         "std_wall_time_s,mean_iterations,converged_fraction\n";
  csv::RowWriter w(sum);
  auto t = [&](double v) { return timing ? fmt(v) : std::string("NA"); };
  for (const auto& s : summary)
    w.row(optim::to_string(s.algorithm), s.n, s.mean_sum_rate, s.std_sum_rate, t(s.mean_wall_time_s),
          t(s.median_wall_time_s), t(s.std_wall_time_s), s.mean_iterations, s.converged_fraction);
  out.extra.emplace_back("summary.csv", sum.str());

  auto get = [&](optim::Algorithm a, Index n) -> const optim::BenchmarkSummary* {
    for (const auto& s : summary)
      if (s.algorithm == a && s.n == n) return &s;
    return nullptr;
  };
  const auto& algs = c.algorithms;
  auto has = [&](optim::Algorithm a) { return std::find(algs.begin(), algs.end(), a) != algs.end(); };
  std::vector<Index> ns = *c.element_counts;
  std::sort(ns.begin(), ns.end());
  for (auto a : algs) {
    bool ok = true;
    std::string detail;
    for (std::size_t i = 0; i < ns.size(); ++i) {
      const double r = get(a, ns[i])->mean_sum_rate;
      if (i > 0 && r < get(a, ns[i - 1])->mean_sum_rate) ok = false;
      detail += (i ? " " : "") + std::string("N=") + std::to_string(ns[i]) + ":" + fmt(r);
    }
    out.checks.push_back(verdict("sum_rate_non_decreasing_" + optim::to_string(a), ok, detail));
  }
  const auto skipped = [](std::string name, std::string why) { return Check{std::move(name), "skipped", std::move(why)}; };
  if (!timing) {
    out.checks.push_back(skipped("rzf_cheapest_every_N", "--no-timing"));
    out.checks.push_back(skipped("qnm_costliest_at_max_N", "--no-timing"));
    out.checks.push_back(skipped("ao_below_qnm_at_max_N", "--no-timing"));
  } else {
    if (has(optim::Algorithm::Rzf) && algs.size() > 1) {
      bool ok = true;
      for (Index n : ns)
        for (auto a : algs)
          if (a != optim::Algorithm::Rzf &&
              !(get(optim::Algorithm::Rzf, n)->mean_wall_time_s < get(a, n)->mean_wall_time_s))
            ok = false;
      out.checks.push_back(verdict("rzf_cheapest_every_N", ok, "mean wall time"));
    } else {
      out.checks.push_back(skipped("rzf_cheapest_every_N", "needs rzf and another algorithm"));
    }
    const Index top = ns.back();
    if (has(optim::Algorithm::Qnm) && algs.size() > 1) {
      bool ok = true;
      for (auto a : algs)
        if (a != optim::Algorithm::Qnm &&
            !(get(optim::Algorithm::Qnm, top)->mean_wall_time_s > get(a, top)->mean_wall_time_s))
          ok = false;
      out.checks.push_back(verdict("qnm_costliest_at_max_N", ok, "N=" + std::to_string(top)));
    } else {
      out.checks.push_back(skipped("qnm_costliest_at_max_N", "needs qnm and another algorithm"));
    }
    if (has(optim::Algorithm::Qnm) && has(optim::Algorithm::Ao)) {
      const double ao = get(optim::Algorithm::Ao, top)->mean_wall_time_s;
      const double qnm = get(optim::Algorithm::Qnm, top)->mean_wall_time_s;
      out.checks.push_back(verdict("ao_below_qnm_at_max_N", ao < qnm,
                                   "ao:" + fmt(ao) + " qnm:" + fmt(qnm)));
    } else {
      out.checks.push_back(skipped("ao_below_qnm_at_max_N", "needs ao and qnm"));
    }
  }
  out.plotspec.push_back("sum-rate,summary.csv,N,mean_sum_rate_bps_hz,algorithm");
  out.plotspec.push_back("computation-time,summary.csv,N,mean_wall_time_s,algorithm");
  return out;
}

inline Outputs qml_outputs(const config::ExperimentConfig& c) {
  experiments::QmlOptions o = c.qml;
  o.master_seed = c.seed;
  const auto run = experiments::run_qml(o);

  Outputs out;
  out.trial_seeds = {run.trial_seed};
  std::ostringstream res, sum, conf, data;
  qml::write_traces_csv(res, run.training);
  out.results = res.str();
  sum << "beam,frequency\n";
  csv::RowWriter w(sum);
  const auto hist = run.dataset.histogram();
  for (std::size_t b = 0; b < hist.size(); ++b) w.row(b, hist[b]);
  out.extra.emplace_back("summary.csv", sum.str());
  qml::write_confusion_csv(conf, run.validation_confusion);
  out.extra.emplace_back("confusion.csv", conf.str());
  qml::write_dataset_csv(data, run.dataset);
  out.extra.emplace_back("dataset.csv", data.str());

  const double acc = run.training.train.back().acc_delta0;
  out.checks.push_back(verdict("final_train_acc_delta0_ge_0.90", acc >= 0.90, fmt(acc)));
  const double val = run.training.validation.back().acc_delta0;
  const double n = static_cast<double>(run.training.validation_indices.size());
  const double from_confusion = run.validation_confusion.trace() / std::max(1.0, n);
  out.checks.push_back(verdict("acc_delta0_equals_confusion_trace_over_n", val == from_confusion,
                               fmt(val) + " vs " + fmt(from_confusion)));
  out.plotspec.push_back("accuracy,results.csv,epoch,acc_delta0,split");
  out.plotspec.push_back("cross-entropy,results.csv,epoch,cross_entropy,split");
  out.plotspec.push_back("beam-frequency,summary.csv,beam,frequency,");
  return out;
}

inline void write_file(const std::filesystem::path& p, const std::string& contents) {
  std::ofstream f(p, std::ios::binary);
  f << contents;
  if (!f) throw std::runtime_error("cannot write " + p.string());
}

}  // namespace detail

/// Runs a validated, resolved configuration and writes every output file into
/// `cfg.output_dir`. Returns an exit code; faults are reported on `err` as one
/// line each.
inline int run_resolved(const config::ExperimentConfig& cfg, const RunOptions& opt, std::ostream& err) {
  namespace fs = std::filesystem;
  const auto e = *cfg.experiment;
  if (opt.threads > 1 && opt.timing && e == config::Experiment::BeamformingBench)
    err << "warning: timing columns produced with " << opt.threads
        << " threads are not comparable; use --threads 1 or --no-timing\n";
  detail::Outputs out;
  try {
    switch (e) {
      case config::Experiment::PowerComparison: out = detail::power_outputs(cfg); break;
      case config::Experiment::BeamformingBench:
        out = detail::bench_outputs(cfg, std::max(1, opt.threads), opt.timing);
        break;
      case config::Experiment::QmlBeam: out = detail::qml_outputs(cfg); break;
    }
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    detail::write_file(dir / "results.csv", out.results);
    for (const auto& [name, contents] : out.extra) detail::write_file(dir / name, contents);

    std::ostringstream checks, plots, schema, resolved, manifest, warnings;
    detail::write_checks(checks, out.checks);
    detail::write_file(dir / "checks.csv", checks.str());
    plots << "figure,file,x,y,series\n";
    for (const auto& row : out.plotspec) plots << row << '\n';
    detail::write_file(dir / "plotspec.csv", plots.str());
    write_schema(schema, e);
    detail::write_file(dir / "schema.txt", schema.str());
    config::write_resolved(resolved, cfg);
    detail::write_file(dir / "config.resolved", resolved.str());

    manifest << "tool = " << kToolVersion << '\n'
             << "experiment = " << config::to_string(e) << '\n'
             << "seed = " << cfg.seed << '\n'
             << "trials = " << *cfg.trials << '\n'
             << "timing = " << (opt.timing ? "true" : "false") << '\n'
             << "seed_rule = mix64(mix64(seed ^ mix64(fnv1a64(experiment))) + trial)\n"
             << "files = results.csv";
    for (const auto& [name, contents] : out.extra) manifest << ", " << name;
    manifest << ", checks.csv, plotspec.csv, schema.txt, config.resolved, warnings.txt\n";
    for (std::size_t t = 0; t < out.trial_seeds.size(); ++t)
      manifest << "trial_seed " << t << " = " << out.trial_seeds[t] << '\n';
    detail::write_file(dir / "manifest.txt", manifest.str());
    for (const auto& w : out.warnings) warnings << w << '\n';
    detail::write_file(dir / "warnings.txt", warnings.str());
  } catch (const std::exception& ex) {
    err << "runtime-error message=\"" << ex.what() << "\"\n";
    return kRuntimeFault;
  }
  if (opt.strict) {
    const auto it = std::find_if(out.warnings.begin(), out.warnings.end(), [](const std::string& w) {
      return w.find("NonConvergence") != std::string::npos;
    });
    if (it != out.warnings.end()) {
      err << "runtime-error strict=true message=\"" << *it << "\"\n";
      return kRuntimeFault;
    }
  }
  return kOk;
}

/// Parses the config file, applies command-line overrides and runs it.
inline int run(const RunOptions& opt, std::ostream& err) {
  std::ifstream in(opt.config_path);
  if (!in) {
    err << config::format_error({0, "", "cannot open " + opt.config_path}) << '\n';
    return kConfigFault;
  }
  auto parsed = config::parse(in);
  if (opt.threads < 1) parsed.errors.push_back({0, "--threads", "must be >= 1"});
  if (!parsed.ok()) {
    std::string line = config::format_error(parsed.errors.front());
    if (parsed.errors.size() > 1) line += " more_errors=" + std::to_string(parsed.errors.size() - 1);
    err << line << '\n';
    return kConfigFault;
  }
  if (opt.seed) parsed.config.seed = *opt.seed;
  if (opt.out_dir) parsed.config.output_dir = *opt.out_dir;
  return run_resolved(parsed.config, opt, err);
}

}  // namespace bdris::harness
