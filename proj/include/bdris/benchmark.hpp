#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "bdris/channel.hpp"
#include "bdris/csv.hpp"
#include "bdris/optim.hpp"
#include "bdris/random.hpp"

namespace bdris::optim {

enum class Algorithm { Rzf, Fp, Ao, Qnm };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Rzf: return "rzf";
    case Algorithm::Fp: return "fp";
    case Algorithm::Ao: return "ao";
    case Algorithm::Qnm: return "qnm";
  }
  return "?";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view s) {
  if (s == "rzf") return Algorithm::Rzf;
  if (s == "fp") return Algorithm::Fp;
  if (s == "ao") return Algorithm::Ao;
  if (s == "qnm") return Algorithm::Qnm;
  return std::nullopt;
}

inline OptimizerResult run_algorithm(Algorithm a, const Realizations& rs, const Architecture& arch,
                                     const OptimizerConfig& cfg) {
  switch (a) {
    case Algorithm::Rzf: return rzf_one_shot(rs, arch, cfg);
    case Algorithm::Fp: return fp_sum_rate(rs, arch, cfg);
    case Algorithm::Ao: return ao_manifold(rs, arch, cfg);
    case Algorithm::Qnm: return qnm_manifold(rs, arch, cfg);
  }
  throw InvalidInput("unknown algorithm");
}

/// Mobile multi-device scenario: L devices follow random-waypoint trajectories;
/// every `snapshot_interval_s` one snapshot of channels is drawn. The surface
/// backbone C is drawn once per trial (static BS and surface).
struct ScenarioConfig {
  channel::NetworkGeometry geometry;
  channel::PathLossModel pathloss;
  channel::FadingModel fading;
  channel::LinkBudget budget;
  channel::SpeedRange speeds;
  double mobility_dt_s = 0.1;
  double snapshot_interval_s = 1.0;
  Index num_devices = 4;
  int snapshots = 10;

  void validate() const {
    geometry.validate();
    pathloss.validate();
    fading.validate();
    if (num_devices < 1) throw InvalidInput("ScenarioConfig: num_devices must be >= 1");
    if (snapshots < 1) throw InvalidInput("ScenarioConfig: snapshots must be >= 1");
    if (!(mobility_dt_s > 0.0) || !(snapshot_interval_s > 0.0))
      throw InvalidInput("ScenarioConfig: time steps must be > 0");
    if (!(speeds.min_mps >= 0.0 && speeds.max_mps >= speeds.min_mps))
      throw InvalidInput("ScenarioConfig: invalid speed range");
    if (budget.num_bs_antennas < 1) throw InvalidInput("ScenarioConfig: M must be >= 1");
  }
};

/// Device positions at each snapshot, sampled from the trial's mobility stream.
inline std::vector<std::vector<channel::Device>> sample_trajectory(const ScenarioConfig& sc,
                                                                   std::uint64_t trial_seed) {
  Rng rng(derive_seed(trial_seed, "mobility", 0));
  std::vector<channel::Device> devices;
  for (Index k = 0; k < sc.num_devices; ++k)
    devices.push_back(channel::random_device(sc.geometry.device_area, sc.speeds, rng));
  const int steps_per_snapshot =
      std::max(1, static_cast<int>(std::lround(sc.snapshot_interval_s / sc.mobility_dt_s)));
  std::vector<std::vector<channel::Device>> out;
  for (int p = 0; p < sc.snapshots; ++p) {
    if (p > 0)
      for (int s = 0; s < steps_per_snapshot; ++s)
        for (auto& d : devices)
          d = channel::random_waypoint_step(d, sc.mobility_dt_s, sc.geometry.device_area,
                                            sc.speeds, rng);
    out.push_back(devices);
  }
  return out;
}

/// Location-set realizations of one trial. Mobility, direct links and surface
/// links use independent streams, so trials share trajectories and direct
/// channels across N.
inline Realizations trial_realizations(const ScenarioConfig& sc, Index n,
                                       std::uint64_t trial_seed) {
  Rng backbone(derive_seed(trial_seed, "bs_ris", 0));
  const CMatrix c = channel::sample_bs_ris(sc.geometry, sc.pathloss, sc.fading, n,
                                           sc.budget.num_bs_antennas, backbone);
  Realizations out;
  const auto traj = sample_trajectory(sc, trial_seed);
  for (std::size_t p = 0; p < traj.size(); ++p) {
    Rng direct(derive_seed(trial_seed, "direct", p));
    Rng ris(derive_seed(trial_seed, "ris_device", p));
    out.push_back(channel::sample_device_links(sc.geometry, traj[p], sc.pathloss, sc.fading,
                                               sc.budget, c, direct, ris));
  }
  return out;
}

struct BenchmarkOptions {
  std::vector<Algorithm> algorithms{Algorithm::Rzf, Algorithm::Fp, Algorithm::Ao, Algorithm::Qnm};
  std::vector<Index> element_counts{16, 32, 64, 128};
  int trials = 50;
  ScenarioConfig scenario;
  OptimizerConfig optimizer;
  Architecture architecture = surface::FullyConnected{};
  std::uint64_t master_seed = 1;
  std::string label = "beamforming-bench";
  int threads = 1;
};

struct BenchmarkRow {
  Algorithm algorithm;
  Index n;
  int trial;
  double sum_rate_bps_hz;
  double rate_per_device_bps_hz;
  double wall_time_s;
  int iterations;
  bool converged;
  std::string objective_kind;
};

struct BenchmarkSummary {
  Algorithm algorithm;
  Index n;
  double mean_sum_rate;
  double std_sum_rate;
  double mean_wall_time_s;
  double median_wall_time_s;
  double std_wall_time_s;
  double mean_iterations;
  double converged_fraction;
};

struct BenchmarkTable {
  std::vector<BenchmarkRow> rows;
  std::vector<std::uint64_t> trial_seeds;
  std::vector<std::string> warnings;
};

inline std::uint64_t trial_seed(std::uint64_t master, std::string_view label, int trial) {
  return derive_seed(master, label, static_cast<std::uint64_t>(trial));
}

/// Runs every (N, trial, algorithm). Rows are ordered by N, then trial, then
/// the order of `algorithms`, independent of `threads`.
inline BenchmarkTable benchmark(const BenchmarkOptions& opt) {
  if (opt.trials < 1) throw InvalidInput("benchmark: trials must be >= 1");
  if (opt.element_counts.empty()) throw InvalidInput("benchmark: no element counts");
  if (opt.algorithms.empty()) throw InvalidInput("benchmark: no algorithms");
  opt.scenario.validate();
  opt.optimizer.validate();

  BenchmarkTable table;
  for (int t = 0; t < opt.trials; ++t) table.trial_seeds.push_back(trial_seed(opt.master_seed, opt.label, t));

  const std::size_t per_trial = opt.algorithms.size();
  const std::size_t per_n = per_trial * static_cast<std::size_t>(opt.trials);
  table.rows.resize(per_n * opt.element_counts.size());
  std::vector<std::vector<std::string>> warnings(table.rows.size());

  auto run_one = [&](std::size_t ni, int t) {
    const Index n = opt.element_counts[ni];
    const std::uint64_t seed = table.trial_seeds[static_cast<std::size_t>(t)];
    const Realizations rs = trial_realizations(opt.scenario, n, seed);
    OptimizerConfig cfg = opt.optimizer;
    cfg.seed = derive_seed(seed, "optimizer", 0);
    for (std::size_t a = 0; a < per_trial; ++a) {
      const OptimizerResult res = run_algorithm(opt.algorithms[a], rs, opt.architecture, cfg);
      const double rate = mean_sum_rate(res.theta, rs);
      const std::size_t idx = ni * per_n + static_cast<std::size_t>(t) * per_trial + a;
      table.rows[idx] = {opt.algorithms[a],
                         n,
                         t,
                         rate,
                         rate / static_cast<double>(opt.scenario.num_devices),
                         res.wall_time_s,
                         res.iterations,
                         res.converged,
                         res.objective_kind};
      for (const auto& w : res.warnings)
        warnings[idx].push_back(to_string(opt.algorithms[a]) + " N=" + std::to_string(n) +
                                " trial=" + std::to_string(t) + ": " + w);
    }
  };

  const int threads = std::max(1, opt.threads);
  for (std::size_t ni = 0; ni < opt.element_counts.size(); ++ni) {
    if (threads == 1) {
      for (int t = 0; t < opt.trials; ++t) run_one(ni, t);
      continue;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (int t = next++; t < opt.trials; t = next++) {
          try {
            run_one(ni, t);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    pool.clear();
    if (failure) std::rethrow_exception(failure);
  }
  for (auto& w : warnings)
    for (auto& s : w) table.warnings.push_back(std::move(s));
  return table;
}

inline std::vector<BenchmarkSummary> summarize(const BenchmarkTable& table) {
  std::vector<BenchmarkSummary> out;
  std::vector<std::pair<Algorithm, Index>> keys;
  for (const auto& r : table.rows)
    if (std::find(keys.begin(), keys.end(), std::pair{r.algorithm, r.n}) == keys.end())
      keys.emplace_back(r.algorithm, r.n);
  for (const auto& [alg, n] : keys) {
    std::vector<double> rate, time;
    double iters = 0.0, conv = 0.0;
    for (const auto& r : table.rows)
      if (r.algorithm == alg && r.n == n) {
        rate.push_back(r.sum_rate_bps_hz);
        time.push_back(r.wall_time_s);
        iters += r.iterations;
        conv += r.converged ? 1.0 : 0.0;
      }
    const double k = static_cast<double>(rate.size());
    auto mean = [&](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / k;
    };
    auto stdev = [&](const std::vector<double>& v, double m) {
      if (v.size() < 2) return 0.0;
      double s = 0.0;
      for (double x : v) s += (x - m) * (x - m);
      return std::sqrt(s / (k - 1.0));
    };
    const double mr = mean(rate), mt = mean(time);
    std::vector<double> sorted = time;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t h = sorted.size() / 2;
    const double median = sorted.size() % 2 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
    out.push_back({alg, n, mr, stdev(rate, mr), mt, median, stdev(time, mt), iters / k, conv / k});
  }
  return out;
}

inline const std::vector<std::string>& benchmark_csv_header() {
  static const std::vector<std::string> h{
      "algorithm", "N",         "trial",      "sum_rate_bps_hz",       "wall_time_s",
      "iterations", "converged", "rate_per_device_bps_hz", "objective"};
  return h;
}

/// With `timing` false the wall_time_s column holds "NA" so that output is a
/// pure function of (config, seed).
inline void write_benchmark_csv(std::ostream& os, const BenchmarkTable& table, bool timing = true) {
  const auto& h = benchmark_csv_header();
  for (std::size_t i = 0; i < h.size(); ++i) os << (i ? "," : "") << h[i];
  os << '\n';
  csv::RowWriter w(os);
  for (const auto& r : table.rows)
    w.row(to_string(r.algorithm), r.n, r.trial, r.sum_rate_bps_hz,
          timing ? csv::format_double(r.wall_time_s) : std::string("NA"), r.iterations,
          r.converged, r.rate_per_device_bps_hz, r.objective_kind);
}

}  // namespace bdris::optim
