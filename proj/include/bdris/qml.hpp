#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "bdris/csv.hpp"
#include "bdris/error.hpp"
#include "bdris/manifold.hpp"
#include "bdris/random.hpp"

namespace bdris::qml {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr int kMaxQubits = 12;

// Dense 2^q amplitudes; qubit k is bit k of the basis-state index.
class StateVector {
 public:
  StateVector(CVector amplitudes, int num_qubits)
      : amps_(std::move(amplitudes)), qubits_(num_qubits) {
    if (qubits_ < 1 || qubits_ > kMaxQubits)
      throw InvalidInput("StateVector: qubit count must lie in [1, 12]");
    if (amps_.size() != (Index{1} << qubits_))
      throw DimensionMismatch("StateVector: amplitude count must be 2^q");
    if (std::abs(amps_.norm() - 1.0) > 1e-12) throw InvalidInput("StateVector: norm must be 1");
  }

  static StateVector zero(int q) {
    CVector a = CVector::Zero(Index{1} << q);
    a(0) = 1.0;
    return {std::move(a), q};
  }

  const CVector& amplitudes() const noexcept { return amps_; }
  int num_qubits() const noexcept { return qubits_; }
  Index dimension() const noexcept { return amps_.size(); }

 private:
  friend StateVector entangling_layer(const StateVector&, const VectorXd&);
  CVector amps_;
  int qubits_;
};

/// Zero-pads x to 2^q entries and normalizes.
inline StateVector amplitude_embed(const VectorXd& x, int q) {
  if (q < 1 || q > kMaxQubits) throw InvalidInput("amplitude_embed: qubit count must lie in [1, 12]");
  const Index dim = Index{1} << q;
  if (x.size() < 1) throw InvalidInput("amplitude_embed: empty input");
  if (x.size() > dim) throw TooLong("amplitude_embed: input longer than 2^q");
  const double norm = x.norm();
  if (!(norm > 0.0)) throw ZeroVector("amplitude_embed: input is the zero vector");
  CVector a = CVector::Zero(dim);
  for (Index i = 0; i < x.size(); ++i) a(i) = x(i) / norm;
  a /= a.norm();
  return {std::move(a), q};
}

namespace detail {

inline void apply_ry(CVector& a, int qubit, double theta) {
  const double c = std::cos(0.5 * theta), s = std::sin(0.5 * theta);
  const Index bit = Index{1} << qubit;
  for (Index i = 0; i < a.size(); ++i) {
    if (i & bit) continue;
    const Complex a0 = a(i), a1 = a(i | bit);
    a(i) = c * a0 - s * a1;
    a(i | bit) = s * a0 + c * a1;
  }
}

inline void apply_cnot(CVector& a, int control, int target) {
  const Index cb = Index{1} << control, tb = Index{1} << target;
  for (Index i = 0; i < a.size(); ++i)
    if ((i & cb) && !(i & tb)) std::swap(a(i), a(i | tb));
}

}  // namespace detail

/// RY(θ_k) on every qubit k, then CNOT(k → (k+1) mod q) for k = 0..q−1
/// (no CNOTs when q = 1).
inline StateVector entangling_layer(const StateVector& state, const VectorXd& angles) {
  const int q = state.num_qubits();
  if (angles.size() != q) throw DimensionMismatch("entangling_layer: need one angle per qubit");
  StateVector out = state;
  for (int k = 0; k < q; ++k) detail::apply_ry(out.amps_, k, angles(k));
  if (q > 1)
    for (int k = 0; k < q; ++k) detail::apply_cnot(out.amps_, k, (k + 1) % q);
  return out;
}

/// ⟨Z_k⟩ for every qubit, exact from the amplitudes.
inline VectorXd measure_z(const StateVector& state) {
  const int q = state.num_qubits();
  VectorXd z = VectorXd::Zero(q);
  const CVector& a = state.amplitudes();
  for (Index i = 0; i < a.size(); ++i) {
    const double p = std::norm(a(i));
    for (int k = 0; k < q; ++k) z(k) += (i >> k) & 1 ? -p : p;
  }
  return z;
}

// Full 2^q × 2^q matrix of one entangling layer, column i = layer applied to |i⟩.
inline CMatrix layer_unitary(const VectorXd& angles, int q) {
  const Index dim = Index{1} << q;
  CMatrix u(dim, dim);
  for (Index i = 0; i < dim; ++i) {
    CVector e = CVector::Zero(dim);
    e(i) = 1.0;
    u.col(i) = entangling_layer(StateVector(e, q), angles).amplitudes();
  }
  return u;
}

// Trainable rotation angles, one row per layer.
struct CircuitParams {
  MatrixXd angles;

  int num_layers() const { return static_cast<int>(angles.rows()); }
  int num_qubits() const { return static_cast<int>(angles.cols()); }
  void validate() const {
    if (angles.rows() < 1) throw InvalidInput("CircuitParams: need at least one layer");
    if (!angles.allFinite()) throw InvalidInput("CircuitParams: non-finite angle");
  }
};

// Embed → layers → ⟨Z⟩ per qubit.
inline VectorXd circuit_outputs(const CircuitParams& params, const VectorXd& x) {
  StateVector s = amplitude_embed(x, params.num_qubits());
  for (int l = 0; l < params.num_layers(); ++l) s = entangling_layer(s, params.angles.row(l).transpose());
  return measure_z(s);
}

/// ∂⟨Z_k⟩/∂θ_j by the two-term shift rule; column j = layer·q + qubit.
inline MatrixXd parameter_shift_jacobian(const CircuitParams& params, const VectorXd& x) {
  const int q = params.num_qubits(), layers = params.num_layers();
  MatrixXd jac(q, layers * q);
  CircuitParams shifted = params;
  for (int l = 0; l < layers; ++l)
    for (int k = 0; k < q; ++k) {
      const double base = params.angles(l, k);
      shifted.angles(l, k) = base + std::numbers::pi / 2;
      const VectorXd plus = circuit_outputs(shifted, x);
      shifted.angles(l, k) = base - std::numbers::pi / 2;
      const VectorXd minus = circuit_outputs(shifted, x);
      shifted.angles(l, k) = base;
      jac.col(l * q + k) = 0.5 * (plus - minus);
    }
  return jac;
}

// Loss of the circuit outputs z: returns (value, ∂loss/∂z).
using CircuitLoss = std::function<std::pair<double, VectorXd>(const VectorXd& z)>;

/// ∂loss/∂θ (layers × qubits): shift-rule Jacobian composed with ∂loss/∂z.
inline MatrixXd parameter_shift_grad(const CircuitParams& params, const VectorXd& x,
                                     const CircuitLoss& loss) {
  const VectorXd z = circuit_outputs(params, x);
  const VectorXd dz = loss(z).second;
  const VectorXd flat = parameter_shift_jacobian(params, x).transpose() * dz;
  MatrixXd g(params.num_layers(), params.num_qubits());
  for (int l = 0; l < params.num_layers(); ++l)
    for (int k = 0; k < params.num_qubits(); ++k) g(l, k) = flat(l * params.num_qubits() + k);
  return g;
}

// ---------------------------------------------------------------------------
// Hybrid model: circuit outputs concatenated with the classical features feed a
// linear softmax head.

struct HybridModel {
  CircuitParams circuit;
  MatrixXd head_weights;  // B × (q + d_c)
  VectorXd head_bias;     // B

  int num_qubits() const { return circuit.num_qubits(); }
  int num_beams() const { return static_cast<int>(head_bias.size()); }
  int feature_dim() const { return static_cast<int>(head_weights.cols()) - num_qubits(); }

  void validate() const {
    circuit.validate();
    if (head_weights.rows() != head_bias.size() || head_weights.cols() <= num_qubits())
      throw DimensionMismatch("HybridModel: head dimensions inconsistent with circuit");
  }

  static HybridModel init(int qubits, int layers, int feature_dim, int beams, Rng& rng) {
    if (qubits < 1 || qubits > kMaxQubits || layers < 1 || feature_dim < 1 || beams < 2)
      throw InvalidInput("HybridModel::init: invalid dimensions");
    HybridModel m;
    m.circuit.angles.resize(layers, qubits);
    for (int l = 0; l < layers; ++l)
      for (int k = 0; k < qubits; ++k) m.circuit.angles(l, k) = uniform(rng, -std::numbers::pi, std::numbers::pi);
    std::normal_distribution<double> n(0.0, 0.1);
    m.head_weights.resize(beams, qubits + feature_dim);
    for (Index i = 0; i < m.head_weights.size(); ++i) m.head_weights.data()[i] = n(rng);
    m.head_bias = VectorXd::Zero(beams);
    return m;
  }

  VectorXd head_input(const VectorXd& z, const VectorXd& x) const {
    VectorXd u(z.size() + x.size());
    u << z, x;
    return u;
  }

  VectorXd logits(const VectorXd& x) const {
    if (x.size() != feature_dim()) throw DimensionMismatch("HybridModel: wrong feature width");
    return head_weights * head_input(circuit_outputs(circuit, x), x) + head_bias;
  }

  int predict(const VectorXd& x) const {
    Index best = 0;
    logits(x).maxCoeff(&best);
    return static_cast<int>(best);
  }
};

inline double log_sum_exp(const VectorXd& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

inline VectorXd softmax(const VectorXd& v) {
  const VectorXd e = (v.array() - v.maxCoeff()).exp();
  return e / e.sum();
}

inline double cross_entropy(const VectorXd& logits, int label) {
  return log_sum_exp(logits) - logits(label);
}

// ---------------------------------------------------------------------------
// Synthetic position → beam data.

struct Sample {
  VectorXd features;
  int label = 0;
};

struct SyntheticBeamDataset {
  std::vector<Sample> samples;
  int num_beams = 0;

  void validate() const {
    if (num_beams < 1) throw InvalidInput("dataset: num_beams must be >= 1");
    for (const auto& s : samples)
      if (s.label < 0 || s.label >= num_beams) throw InvalidInput("dataset: label out of range");
  }

  // Relative frequency of each beam index.
  std::vector<double> histogram() const {
    std::vector<double> h(static_cast<std::size_t>(num_beams), 0.0);
    for (const auto& s : samples) h[static_cast<std::size_t>(s.label)] += 1.0;
    for (double& v : h) v /= std::max<double>(1.0, static_cast<double>(samples.size()));
    return h;
  }
};

/// Beam sector of a position seen from a BS at the centre of the unit square:
/// B equal angular sectors starting at angle −π.
inline int beam_sector(double x, double y, int beams) {
  const double angle = std::atan2(y, x) + std::numbers::pi;  // [0, 2π]
  const int k = static_cast<int>(std::floor(angle / (2.0 * std::numbers::pi) * beams));
  return std::clamp(k, 0, beams - 1);
}

/// Positions uniform in [−½, ½]² (BS at the origin), label = beam sector,
/// features = position + N(0, σ²) per coordinate.
inline SyntheticBeamDataset generate_synthetic_dataset(int n, int beams, double noise_sigma,
                                                       Rng& rng) {
  if (beams < 1 || n < beams) throw InvalidInput("generate_synthetic_dataset: need n >= B >= 1");
  if (!(noise_sigma >= 0.0)) throw InvalidInput("generate_synthetic_dataset: sigma must be >= 0");
  SyntheticBeamDataset d;
  d.num_beams = beams;
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const double x = uniform(rng, -0.5, 0.5), y = uniform(rng, -0.5, 0.5);
    Sample s;
    s.label = beam_sector(x, y, beams);
    s.features = VectorXd(2);
    s.features << x + noise_sigma * noise(rng), y + noise_sigma * noise(rng);
    d.samples.push_back(std::move(s));
  }
  return d;
}

// CSV: feature columns f0..f{d-1}, then label.
inline void write_dataset_csv(std::ostream& os, const SyntheticBeamDataset& d) {
  const Index width = d.samples.empty() ? 0 : d.samples.front().features.size();
  for (Index j = 0; j < width; ++j) os << 'f' << j << ',';
  os << "label\n";
  for (const auto& s : d.samples) {
    for (Index j = 0; j < width; ++j) os << csv::format_double(s.features(j)) << ',';
    os << s.label << '\n';
  }
}

inline SyntheticBeamDataset read_dataset_csv(std::istream& is, int beams) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidInput("read_dataset_csv: empty input");
  const auto header = csv::split_line(line);
  if (header.empty() || header.back() != "label")
    throw InvalidInput("read_dataset_csv: last column must be 'label'");
  const Index width = static_cast<Index>(header.size()) - 1;
  SyntheticBeamDataset d;
  d.num_beams = beams;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = csv::split_line(line);
    if (static_cast<Index>(f.size()) != width + 1)
      throw InvalidInput("read_dataset_csv: wrong field count");
    Sample s;
    s.features.resize(width);
    for (Index j = 0; j < width; ++j) s.features(j) = csv::parse_double(f[static_cast<std::size_t>(j)]);
    s.label = std::stoi(f.back());
    d.samples.push_back(std::move(s));
  }
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// Metrics.

/// Fraction of samples with |predicted − true| ≤ delta (delta 0 is top-1).
inline double distance_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels,
                                int delta) {
  if (predictions.size() != labels.size())
    throw LengthMismatch("distance_accuracy: predictions and labels differ in length");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (std::abs(predictions[i] - labels[i]) <= delta) ++hits;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

// Entry (i, j) counts samples of true beam i predicted as j.
inline Eigen::MatrixXi confusion_matrix(const std::vector<int>& predictions,
                                        const std::vector<int>& labels, int beams) {
  if (predictions.size() != labels.size())
    throw LengthMismatch("confusion_matrix: predictions and labels differ in length");
  Eigen::MatrixXi c = Eigen::MatrixXi::Zero(beams, beams);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= beams || predictions[i] < 0 || predictions[i] >= beams)
      throw InvalidInput("confusion_matrix: index outside [0, B)");
    ++c(labels[i], predictions[i]);
  }
  return c;
}

inline void write_confusion_csv(std::ostream& os, const Eigen::MatrixXi& c) {
  os << "true\\pred";
  for (Index j = 0; j < c.cols(); ++j) os << ',' << j;
  os << '\n';
  for (Index i = 0; i < c.rows(); ++i) {
    os << i;
    for (Index j = 0; j < c.cols(); ++j) os << ',' << c(i, j);
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Training.

struct EpochMetrics {
  int epoch = 0;
  double cross_entropy = 0.0;
  double acc_delta0 = 0.0;
  double acc_delta1 = 0.0;
  double acc_delta2 = 0.0;
};

struct TrainingResult {
  HybridModel model;
  std::vector<EpochMetrics> train;
  std::vector<EpochMetrics> validation;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> validation_indices;
};

inline EpochMetrics evaluate(const HybridModel& model, const std::vector<Sample>& samples,
                             const std::vector<std::size_t>& indices, int epoch) {
  EpochMetrics m;
  m.epoch = epoch;
  std::vector<int> pred, lab;
  for (std::size_t i : indices) {
    const VectorXd l = model.logits(samples[i].features);
    m.cross_entropy += cross_entropy(l, samples[i].label);
    Index best = 0;
    l.maxCoeff(&best);
    pred.push_back(static_cast<int>(best));
    lab.push_back(samples[i].label);
  }
  if (!indices.empty()) m.cross_entropy /= static_cast<double>(indices.size());
  m.acc_delta0 = distance_accuracy(pred, lab, 0);
  m.acc_delta1 = distance_accuracy(pred, lab, 1);
  m.acc_delta2 = distance_accuracy(pred, lab, 2);
  return m;
}

/// Mean cross-entropy gradient over `indices`; circuit part by parameter shift.
inline HybridModel loss_gradient(const HybridModel& model, const std::vector<Sample>& samples,
                                 const std::vector<std::size_t>& indices) {
  HybridModel g;
  const int q = model.num_qubits();
  g.circuit.angles = MatrixXd::Zero(model.circuit.num_layers(), q);
  g.head_weights = MatrixXd::Zero(model.head_weights.rows(), model.head_weights.cols());
  g.head_bias = VectorXd::Zero(model.head_bias.size());
  for (std::size_t i : indices) {
    const Sample& s = samples[i];
    const VectorXd z = circuit_outputs(model.circuit, s.features);
    const VectorXd u = model.head_input(z, s.features);
    VectorXd delta = softmax(model.head_weights * u + model.head_bias);
    delta(s.label) -= 1.0;
    g.head_weights += delta * u.transpose();
    g.head_bias += delta;
    const VectorXd dz = model.head_weights.leftCols(q).transpose() * delta;
    const CircuitLoss head_loss = [&](const VectorXd&) { return std::pair{0.0, dz}; };
    g.circuit.angles += parameter_shift_grad(model.circuit, s.features, head_loss);
  }
  const double k = std::max<double>(1.0, static_cast<double>(indices.size()));
  g.circuit.angles /= k;
  g.head_weights /= k;
  g.head_bias /= k;
  return g;
}

/// Full-batch gradient descent on softmax cross-entropy. The 80/20 split is a
/// shuffle drawn from `rng`; metrics are recorded after every epoch's update.
inline TrainingResult train_hybrid(const SyntheticBeamDataset& data, HybridModel model, int epochs,
                                   double lr, Rng& rng) {
  data.validate();
  model.validate();
  if (epochs < 0) throw InvalidInput("train_hybrid: epochs must be >= 0");
  if (model.num_beams() != data.num_beams)
    throw DimensionMismatch("train_hybrid: model and dataset disagree on B");
  std::vector<std::size_t> order(data.samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_train = (order.size() * 4 + 4) / 5;

  TrainingResult out;
  out.train_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.validation_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  for (int e = 1; e <= epochs; ++e) {
    if (lr != 0.0) {
      const HybridModel g = loss_gradient(model, data.samples, out.train_indices);
      model.circuit.angles -= lr * g.circuit.angles;
      model.head_weights -= lr * g.head_weights;
      model.head_bias -= lr * g.head_bias;
    }
    out.train.push_back(evaluate(model, data.samples, out.train_indices, e));
    out.validation.push_back(evaluate(model, data.samples, out.validation_indices, e));
  }
  out.model = std::move(model);
  return out;
}

inline std::vector<int> predict_all(const HybridModel& model, const std::vector<Sample>& samples,
                                    const std::vector<std::size_t>& indices) {
  std::vector<int> out;
  for (std::size_t i : indices) out.push_back(model.predict(samples[i].features));
  return out;
}

// CSV: epoch,split,cross_entropy,acc_delta0,acc_delta1,acc_delta2.
inline void write_traces_csv(std::ostream& os, const TrainingResult& r) {
  os << "epoch,split,cross_entropy,acc_delta0,acc_delta1,acc_delta2\n";
  csv::RowWriter w(os);
  for (std::size_t i = 0; i < r.train.size(); ++i) {
    for (const auto* m : {&r.train[i], &r.validation[i]})
      w.row(m->epoch, m == &r.train[i] ? "train" : "validation", m->cross_entropy, m->acc_delta0,
            m->acc_delta1, m->acc_delta2);
  }
}

}  // namespace bdris::qml
