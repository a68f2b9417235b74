#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "bdris/benchmark.hpp"
#include "bdris/channel.hpp"
#include "bdris/csv.hpp"
#include "bdris/manifold.hpp"
#include "bdris/qml.hpp"
#include "bdris/random.hpp"
#include "bdris/surface.hpp"

namespace bdris::experiments {

// ---------------------------------------------------------------------------
// Surface vs conventional RIS: received power at a single-antenna tag fed by a
// single-antenna ambient source at the BS position, direct path excluded.

struct PowerComparisonOptions {
  std::vector<Index> element_counts{8, 16, 32, 64};
  int trials = 200;
  channel::NetworkGeometry geometry;
  channel::PathLossModel pathloss;
  channel::FadingModel fading;
  channel::LinkBudget budget;
  bool random_baseline = false;
  std::uint64_t master_seed = 1;
  std::string label = "power-comparison";
};

struct PowerRow {
  Index n;
  std::string ris_type;  // diagonal | fully-connected | random-unitary
  int trial;
  double received_power_dbm;
};

struct PowerSummary {
  Index n;
  std::string ris_type;
  double mean_power_dbm;  // 10·log10 of the mean linear power
  double mean_gap_db;     // mean per-trial gap to the diagonal optimum
};

struct PowerTable {
  std::vector<PowerRow> rows;
  std::vector<std::uint64_t> trial_seeds;
  // Exact per-realization dominance of the fully-connected optimum.
  bool dominance_holds = true;
};

// Relative slack for comparing the two closed forms: at N = 1, or with |b| ∥ |c|,
// they are equal and differ only by rounding (‖b‖‖c‖ vs Σ|b_i||c_i|).
inline constexpr double kDominanceSlack = 1e-13;

inline double power_dbm(double tx_power_dbm, double amplitude) {
  return tx_power_dbm + channel::linear_to_db(amplitude * amplitude);
}

/// Every trial draws b and c once at the largest N and uses their leading
/// entries at smaller N, so the N-sweep compares nested surfaces under common
/// random numbers.
inline PowerTable power_comparison(const PowerComparisonOptions& opt) {
  if (opt.trials < 1) throw InvalidInput("power_comparison: trials must be >= 1");
  if (opt.element_counts.empty()) throw InvalidInput("power_comparison: no element counts");
  for (Index n : opt.element_counts)
    if (n < 1) throw InvalidInput("power_comparison: element counts must be >= 1");
  opt.geometry.validate();
  opt.pathloss.validate();
  opt.fading.validate();
  const Index n_max = *std::max_element(opt.element_counts.begin(), opt.element_counts.end());
  const double tx = opt.budget.tx_power_dbm();

  PowerTable table;
  std::vector<CVector> bs, cs;
  for (int t = 0; t < opt.trials; ++t) {
    const std::uint64_t seed = optim::trial_seed(opt.master_seed, opt.label, t);
    table.trial_seeds.push_back(seed);
    Rng rng(derive_seed(seed, "links", 0));
    const Eigen::Vector2d tag = channel::uniform_point(opt.geometry.device_area, rng);
    const double d_tag = (channel::detail::lift(tag) - opt.geometry.ris_position).norm();
    cs.push_back(channel::sample_bs_ris(opt.geometry, opt.pathloss, opt.fading, n_max, 1, rng).col(0));
    bs.push_back(channel::sample_device_link(d_tag, opt.pathloss.exponent_device_ris, n_max,
                                             opt.geometry, opt.pathloss, opt.fading, rng));
  }
  for (Index n : opt.element_counts)
    for (int t = 0; t < opt.trials; ++t) {
      const std::size_t ti = static_cast<std::size_t>(t);
      const CVector b = bs[ti].head(n), c = cs[ti].head(n);
      const double diag = surface::optimal_diagonal_single_tag(b, c).amplitude;
      const double full = surface::optimal_fully_connected_single_tag(b, c).amplitude;
      if (!(full >= diag * (1.0 - kDominanceSlack))) table.dominance_holds = false;
      table.rows.push_back({n, "diagonal", t, power_dbm(tx, diag)});
      table.rows.push_back({n, "fully-connected", t, power_dbm(tx, full)});
      if (opt.random_baseline) {
        Rng rng(derive_seed(table.trial_seeds[ti], "random-theta", static_cast<std::uint64_t>(n)));
        const manifold::UnitaryMatrix theta = manifold::random_unitary(n, rng);
        table.rows.push_back(
            {n, "random-unitary", t, power_dbm(tx, surface::reflected_amplitude(b, c, theta.matrix()))});
      }
    }
  return table;
}

inline std::vector<PowerSummary> summarize(const PowerTable& table) {
  std::vector<PowerSummary> out;
  std::vector<std::pair<Index, std::string>> keys;
  for (const auto& r : table.rows)
    if (std::find(keys.begin(), keys.end(), std::pair{r.n, r.ris_type}) == keys.end())
      keys.emplace_back(r.n, r.ris_type);
  for (const auto& [n, type] : keys) {
    double lin = 0.0, gap = 0.0;
    int k = 0;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const auto& r = table.rows[i];
      if (r.n != n || r.ris_type != type) continue;
      lin += channel::db_to_linear(r.received_power_dbm);
      // The diagonal row of the same (N, trial) precedes the others.
      std::size_t j = i;
      while (table.rows[j].ris_type != "diagonal") --j;
      gap += r.received_power_dbm - table.rows[j].received_power_dbm;
      ++k;
    }
    out.push_back({n, type, channel::linear_to_db(lin / k), gap / k});
  }
  return out;
}

inline void write_power_csv(std::ostream& os, const PowerTable& table) {
  os << "N,ris_type,trial,received_power_dbm\n";
  csv::RowWriter w(os);
  for (const auto& r : table.rows) w.row(r.n, r.ris_type, r.trial, r.received_power_dbm);
}

// ---------------------------------------------------------------------------
// Hybrid beam prediction on the synthetic position → beam set.

struct QmlOptions {
  int qubits = 4;
  int layers = 2;
  int beams = 4;
  int samples = 200;
  double noise_sigma = 0.01;
  int epochs = 200;
  double learning_rate = 0.5;
  std::uint64_t master_seed = 1;
  std::string label = "qml-beam";

  void validate() const {
    if (qubits < 1 || qubits > qml::kMaxQubits) throw InvalidInput("qml: qubits must lie in [1, 12]");
    if (layers < 1) throw InvalidInput("qml: layers must be >= 1");
    if (beams < 2) throw InvalidInput("qml: beams must be >= 2");
    if (samples < beams) throw InvalidInput("qml: samples must be >= beams");
    if (epochs < 1) throw InvalidInput("qml: epochs must be >= 1");
    if (!(noise_sigma >= 0.0)) throw InvalidInput("qml: noise_sigma must be >= 0");
    if (!(learning_rate >= 0.0)) throw InvalidInput("qml: learning_rate must be >= 0");
  }
};

struct QmlRun {
  qml::SyntheticBeamDataset dataset;
  qml::TrainingResult training;
  Eigen::MatrixXi validation_confusion;
  std::uint64_t trial_seed = 0;
};

/// Streams derived from trial 0's seed: "dataset", "init" and "split".
inline QmlRun run_qml(const QmlOptions& opt) {
  opt.validate();
  QmlRun out;
  out.trial_seed = optim::trial_seed(opt.master_seed, opt.label, 0);
  Rng data_rng(derive_seed(out.trial_seed, "dataset", 0));
  out.dataset = qml::generate_synthetic_dataset(opt.samples, opt.beams, opt.noise_sigma, data_rng);
  Rng init_rng(derive_seed(out.trial_seed, "init", 0));
  auto model = qml::HybridModel::init(opt.qubits, opt.layers, 2, opt.beams, init_rng);
  Rng split_rng(derive_seed(out.trial_seed, "split", 0));
  out.training = qml::train_hybrid(out.dataset, std::move(model), opt.epochs, opt.learning_rate,
                                   split_rng);
  std::vector<int> labels;
  for (std::size_t i : out.training.validation_indices) labels.push_back(out.dataset.samples[i].label);
  out.validation_confusion = qml::confusion_matrix(
      qml::predict_all(out.training.model, out.dataset.samples, out.training.validation_indices),
      labels, opt.beams);
  return out;
}

}  // namespace bdris::experiments
