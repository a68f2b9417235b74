#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "bdris/config.hpp"
#include "bdris/harness.hpp"
#include "bdris/qml.hpp"
#include "support.hpp"

using namespace bdris;
using qml::VectorXd;
namespace fs = std::filesystem;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd x(static_cast<Index>(v.size()));
  Index i = 0;
  for (double d : v) x(i++) = d;
  return x;
}

qml::CircuitParams random_params(int layers, int q, Rng& rng) {
  qml::CircuitParams p;
  p.angles.resize(layers, q);
  for (Index i = 0; i < p.angles.size(); ++i) p.angles.data()[i] = uniform(rng, -std::numbers::pi, std::numbers::pi);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bdris_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Writes `text` as a config file and runs it with the output directory beside it.
int run_config(const fs::path& dir, const std::string& text, bool timing, std::string* err_out = nullptr) {
  std::ofstream(dir / "run.cfg") << text;
  harness::RunOptions o;
  o.config_path = (dir / "run.cfg").string();
  o.out_dir = (dir / "out").string();
  o.timing = timing;
  std::ostringstream err;
  const int code = harness::run(o, err);
  if (err_out) *err_out = err.str();
  return code;
}

const char* kPowerCfg = "experiment = power-comparison\ntrials = 4\nelement_counts = 4, 8\n";
const char* kBenchCfg =
    "experiment = beamforming-bench\ntrials = 2\nelement_counts = 4, 6\n[channel]\nsnapshots = 2\n";
const char* kQmlCfg = "experiment = qml-beam\n[qml]\nsamples = 40\nepochs = 3\n";

}  // namespace

// ---------------------------------------------------------------------------
// Simulator

TEST(Qml, EmbeddingExamplesAndErrors) {
  const auto s = qml::amplitude_embed(vec({3.0, 4.0}), 2);
  EXPECT_NEAR(s.amplitudes()(0).real(), 0.6, 1e-15);
  EXPECT_NEAR(s.amplitudes()(1).real(), 0.8, 1e-15);
  EXPECT_EQ(s.amplitudes()(2), Complex(0.0));
  EXPECT_THROW(qml::amplitude_embed(vec({1, 2, 3, 4, 5}), 2), TooLong);
  EXPECT_THROW(qml::amplitude_embed(vec({0, 0}), 1), ZeroVector);
  EXPECT_THROW(qml::StateVector(CVector::Ones(2), 1), InvalidInput);
  EXPECT_THROW(qml::StateVector::zero(13), InvalidInput);
}

TEST(Qml, SingleQubitRotationExpectation) {
  for (double t : {0.0, 0.3, std::numbers::pi / 2, 2.0, -1.1}) {
    qml::CircuitParams p;
    p.angles = Eigen::MatrixXd::Constant(1, 1, t);
    EXPECT_NEAR(qml::circuit_outputs(p, vec({1.0}))(0), std::cos(t), 1e-14);
  }
}

TEST(Qml, CnotRingOnBasisState) {
  // |001⟩ (qubit 0 set) with zero rotations: CNOT 0→1 sets qubit 1, CNOT 1→2
  // sets qubit 2, CNOT 2→0 clears qubit 0, giving index 0b110.
  const CMatrix u = qml::layer_unitary(VectorXd::Zero(3), 3);
  for (Index i = 0; i < 8; ++i) EXPECT_NEAR(std::abs(u(i, 1)), i == 6 ? 1.0 : 0.0, 1e-15);
}

TEST(QmlProperty, NormAndLayerUnitarity) {
  Rng rng(21);
  for (int c = 0; c < 40; ++c) {
    const int q = 1 + c % 4;
    VectorXd angles(q);
    for (int k = 0; k < q; ++k) angles(k) = uniform(rng, -4.0, 4.0);
    EXPECT_LE(testing_support::unitarity(qml::layer_unitary(angles, q)), 1e-10);
    VectorXd x(Index{1} << q);
    for (Index i = 0; i < x.size(); ++i) x(i) = uniform(rng, -1.0, 1.0);
    const auto s = qml::entangling_layer(qml::amplitude_embed(x, q), angles);
    EXPECT_NEAR(s.amplitudes().norm(), 1.0, 1e-12);
    const VectorXd z = qml::measure_z(s);
    EXPECT_LE(z.cwiseAbs().maxCoeff(), 1.0 + 1e-12);
  }
}

TEST(Qml, ExpectationsMatchShotSampling) {
  Rng rng(22);
  const auto params = random_params(2, 3, rng);
  const VectorXd x = vec({0.3, -0.7, 0.2});
  const VectorXd z = qml::circuit_outputs(params, x);
  auto s = qml::amplitude_embed(x, 3);
  for (int l = 0; l < 2; ++l) s = qml::entangling_layer(s, params.angles.row(l).transpose());
  std::vector<double> probs;
  for (Index i = 0; i < 8; ++i) probs.push_back(std::norm(s.amplitudes()(i)));
  std::discrete_distribution<int> shots(probs.begin(), probs.end());
  const int n = 1'000'000;
  VectorXd est = VectorXd::Zero(3);
  for (int k = 0; k < n; ++k) {
    const int b = shots(rng);
    for (int j = 0; j < 3; ++j) est(j) += (b >> j) & 1 ? -1.0 : 1.0;
  }
  est /= n;
  for (int j = 0; j < 3; ++j) {
    const double sigma = std::sqrt((1.0 - z(j) * z(j)) / n);
    EXPECT_NEAR(est(j), z(j), 3.0 * sigma + 1e-12) << "qubit " << j;
  }
}

TEST(Qml, ParameterShiftExamples) {
  qml::CircuitParams p;
  p.angles = Eigen::MatrixXd::Constant(1, 1, std::numbers::pi / 2);
  EXPECT_NEAR(qml::parameter_shift_jacobian(p, vec({1.0}))(0, 0), -1.0, 1e-14);
  p.angles(0, 0) = 0.0;
  EXPECT_NEAR(qml::parameter_shift_jacobian(p, vec({1.0}))(0, 0), 0.0, 1e-14);
}

TEST(QmlProperty, ParameterShiftMatchesFiniteDifferences) {
  Rng rng(23);
  for (int c = 0; c < 10; ++c) {
    const int q = 1 + c % 4, layers = 1 + c % 3;
    const auto params = random_params(layers, q, rng);
    VectorXd x(2);
    x << uniform(rng, -1, 1), uniform(rng, -1, 1);
    const Eigen::MatrixXd jac = qml::parameter_shift_jacobian(params, x);
    const double h = 1e-5;
    for (int l = 0; l < layers; ++l)
      for (int k = 0; k < q; ++k) {
        auto plus = params, minus = params;
        plus.angles(l, k) += h;
        minus.angles(l, k) -= h;
        const VectorXd fd = (qml::circuit_outputs(plus, x) - qml::circuit_outputs(minus, x)) / (2 * h);
        EXPECT_LE((fd - jac.col(l * q + k)).cwiseAbs().maxCoeff(), 1e-6);
      }
  }
}

// ---------------------------------------------------------------------------
// Head, metrics and dataset

TEST(Qml, CrossEntropyOfUniformLogits) {
  for (int b : {2, 4, 9}) EXPECT_NEAR(qml::cross_entropy(VectorXd::Constant(b, 0.7), 1), std::log(b), 1e-14);
  EXPECT_NEAR(qml::cross_entropy(vec({1000.0, 0.0}), 0), 0.0, 1e-12);
  EXPECT_NEAR(qml::softmax(vec({1000.0, 1000.0}))(1), 0.5, 1e-15);
}

TEST(Qml, DistanceAccuracyExamples) {
  const std::vector<int> pred{0, 1, 3, 3}, lab{0, 2, 1, 3};
  EXPECT_DOUBLE_EQ(qml::distance_accuracy(pred, lab, 0), 0.5);
  EXPECT_DOUBLE_EQ(qml::distance_accuracy(pred, lab, 1), 0.75);
  EXPECT_DOUBLE_EQ(qml::distance_accuracy(pred, lab, 2), 1.0);
  EXPECT_THROW(qml::distance_accuracy({0}, {0, 1}, 0), LengthMismatch);
  Rng rng(24);
  std::uniform_int_distribution<int> beam(0, 15);
  std::vector<int> p, l;
  for (int i = 0; i < 100000; ++i) {
    p.push_back(beam(rng));
    l.push_back(beam(rng));
  }
  EXPECT_NEAR(qml::distance_accuracy(p, l, 0), 1.0 / 16.0, 0.01);
}

TEST(QmlProperty, ConfusionMatrixTallyAndTrace) {
  Rng rng(25);
  for (int c = 0; c < 20; ++c) {
    const int b = 2 + c % 6;
    std::uniform_int_distribution<int> beam(0, b - 1);
    std::vector<int> p, l;
    for (int i = 0; i < 50; ++i) {
      p.push_back(beam(rng));
      l.push_back(beam(rng));
    }
    const Eigen::MatrixXi m = qml::confusion_matrix(p, l, b);
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < b; ++j) {
        int count = 0;
        for (int s = 0; s < 50; ++s) count += l[s] == i && p[s] == j;
        EXPECT_EQ(m(i, j), count);
      }
    EXPECT_DOUBLE_EQ(qml::distance_accuracy(p, l, 0), m.trace() / 50.0);
  }
  EXPECT_THROW(qml::confusion_matrix({4}, {0}, 4), InvalidInput);
}

TEST(QmlDataset, SectorsFrequenciesAndRoundTrip) {
  EXPECT_EQ(qml::beam_sector(-1.0, -1e-9, 4), 0);
  EXPECT_EQ(qml::beam_sector(1e-9, -1.0, 4), 1);
  EXPECT_EQ(qml::beam_sector(1.0, 1e-9, 4), 2);
  EXPECT_EQ(qml::beam_sector(-1.0, 0.0, 4), 3);
  Rng rng(26);
  const auto clean = qml::generate_synthetic_dataset(2000, 4, 0.0, rng);
  for (const auto& s : clean.samples) ASSERT_EQ(qml::beam_sector(s.features(0), s.features(1), 4), s.label);
  const auto eight = qml::generate_synthetic_dataset(20000, 8, 0.01, rng);
  for (double f : eight.histogram()) EXPECT_NEAR(f, 1.0 / 8.0, 0.02);
  // Nearest-sector rule on noisy features: an oracle for how separable the data is.
  const auto noisy = qml::generate_synthetic_dataset(5000, 4, 0.01, rng);
  int hits = 0;
  for (const auto& s : noisy.samples) hits += qml::beam_sector(s.features(0), s.features(1), 4) == s.label;
  EXPECT_GE(hits / 5000.0, 0.95);

  std::stringstream io;
  qml::write_dataset_csv(io, noisy);
  EXPECT_EQ(first_line(io.str()), "f0,f1,label");
  const auto back = qml::read_dataset_csv(io, 4);
  ASSERT_EQ(back.samples.size(), noisy.samples.size());
  for (std::size_t i = 0; i < back.samples.size(); ++i) {
    EXPECT_EQ(back.samples[i].label, noisy.samples[i].label);
    EXPECT_TRUE(back.samples[i].features == noisy.samples[i].features);
  }
}

// ---------------------------------------------------------------------------
// Training

TEST(QmlTraining, ZeroLearningRateKeepsMetricsConstant) {
  Rng rng(27);
  const auto data = qml::generate_synthetic_dataset(40, 4, 0.01, rng);
  auto model = qml::HybridModel::init(2, 1, 2, 4, rng);
  const auto r = qml::train_hybrid(data, model, 5, 0.0, rng);
  ASSERT_EQ(r.train.size(), 5u);
  for (const auto& m : r.train) {
    EXPECT_EQ(m.cross_entropy, r.train[0].cross_entropy);
    EXPECT_EQ(m.acc_delta0, r.train[0].acc_delta0);
  }
  EXPECT_TRUE(r.model.head_weights == model.head_weights);
  EXPECT_EQ(r.train_indices.size(), 32u);
  EXPECT_EQ(r.validation_indices.size(), 8u);
}

TEST(QmlTraining, HeadGradientMatchesFiniteDifferences) {
  Rng rng(28);
  const auto data = qml::generate_synthetic_dataset(12, 3, 0.05, rng);
  const auto model = qml::HybridModel::init(2, 2, 2, 3, rng);
  std::vector<std::size_t> idx(12);
  for (std::size_t i = 0; i < 12; ++i) idx[i] = i;
  const auto g = qml::loss_gradient(model, data.samples, idx);
  auto loss = [&](const qml::HybridModel& m) { return qml::evaluate(m, data.samples, idx, 0).cross_entropy; };
  const double h = 1e-6;
  for (Index i = 0; i < model.head_weights.size(); ++i) {
    auto p = model, q = model;
    p.head_weights.data()[i] += h;
    q.head_weights.data()[i] -= h;
    EXPECT_NEAR((loss(p) - loss(q)) / (2 * h), g.head_weights.data()[i], 1e-7);
  }
  for (Index i = 0; i < model.circuit.angles.size(); ++i) {
    auto p = model, q = model;
    p.circuit.angles.data()[i] += h;
    q.circuit.angles.data()[i] -= h;
    EXPECT_NEAR((loss(p) - loss(q)) / (2 * h), g.circuit.angles.data()[i], 1e-7);
  }
}

TEST(QmlTraining, ReachesTargetAccuracyAndIsDeterministic) {
  const auto a = experiments::run_qml({});
  EXPECT_GE(a.training.train.back().acc_delta0, 0.90);
  const auto b = experiments::run_qml({});
  std::ostringstream x, y;
  qml::write_traces_csv(x, a.training);
  qml::write_traces_csv(y, b.training);
  EXPECT_EQ(x.str(), y.str());
  const double n = static_cast<double>(a.training.validation_indices.size());
  EXPECT_DOUBLE_EQ(a.training.validation.back().acc_delta0, a.validation_confusion.trace() / n);
}

// ---------------------------------------------------------------------------
// Seeds

TEST(Seeds, FixedReferenceValues) {
  // Reference values computed independently from the documented seed rule.
  EXPECT_EQ(mix64(0), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(fnv1a64("a"), 0xAF63DC4C8601EC8CULL);
  EXPECT_EQ(optim::trial_seed(1, "power-comparison", 0), 7589729799981995305ULL);
  EXPECT_EQ(optim::trial_seed(1, "power-comparison", 2), 732021459335816141ULL);
  EXPECT_EQ(optim::trial_seed(1, "beamforming-bench", 1), 3918664809095238639ULL);
  EXPECT_EQ(optim::trial_seed(1, "qml-beam", 0), 13635026627405306330ULL);
  EXPECT_EQ(derive_seed(42, "qml-beam", 7), 3769311717262276288ULL);
}

// ---------------------------------------------------------------------------
// Config

TEST(Config, UnknownAndRepeatedKeys) {
  auto r = config::parse_string("experiment = qml-beam\ntrails = 3\n");
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(config::format_error(r.errors[0]), "config-error line=2 key=trails message=\"unknown key in [general]\"");
  r = config::parse_string("experiment = qml-beam\n[qml]\nepochs = 3\nepochs = 4\n");
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].line, 4);
  EXPECT_EQ(r.errors[0].key, "epochs");
  r = config::parse_string("# nothing\n\n");
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].message, "experiment missing");
  r = config::parse_string("experiment = power-comparison\n[channel]\nexponent_device_bs = two\n[bogus]\n");
  EXPECT_EQ(r.errors.size(), 2u);
}

TEST(Config, DefaultsOverridesAndSemanticChecks) {
  auto r = config::parse_string("experiment = power-comparison\n[channel]\nexponent_device_ris = 2.2\n");
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(*r.config.trials, 200);
  EXPECT_EQ(*r.config.element_counts, (std::vector<Index>{8, 16, 32, 64}));
  EXPECT_EQ(r.config.scenario.pathloss.exponent_device_ris, 2.2);
  std::ostringstream out;
  config::write_resolved(out, r.config);
  EXPECT_NE(out.str().find("exponent_device_ris = 2.2\n"), std::string::npos);
  r = config::parse_string("experiment = beamforming-bench\n");
  EXPECT_EQ(*r.config.trials, 50);
  EXPECT_EQ(*r.config.element_counts, (std::vector<Index>{16, 32, 64, 128}));
  EXPECT_FALSE(config::parse_string("experiment = beamforming-bench\nelement_counts = 8, 8\n").ok());
  EXPECT_FALSE(config::parse_string("experiment = beamforming-bench\narchitecture = group-connected:3\n"
                                    "element_counts = 8\n").ok());
  EXPECT_TRUE(config::parse_string("experiment = beamforming-bench\narchitecture = group-connected:4\n"
                                   "element_counts = 8\n").ok());
  EXPECT_FALSE(config::parse_string("experiment = qml-beam\ntrials = 0\n").ok());
}

TEST(ConfigProperty, ResolvedOutputRoundTrips) {
  for (const char* text : {kPowerCfg, kBenchCfg, kQmlCfg,
                           "experiment = beamforming-bench\nalgorithms = ao, qnm\narchitecture = diagonal\n"
                           "[optimizer]\nobjective_tolerance = 1e-9\n[channel]\ncarrier_hz = 2.4e9\n"}) {
    const auto a = config::parse_string(text);
    ASSERT_TRUE(a.ok()) << text;
    std::ostringstream x, y;
    config::write_resolved(x, a.config);
    const auto b = config::parse_string(x.str());
    ASSERT_TRUE(b.ok()) << x.str();
    config::write_resolved(y, b.config);
    EXPECT_EQ(x.str(), y.str());
  }
}

// ---------------------------------------------------------------------------
// Harness

TEST(Harness, OutputsMatchSchema) {
  const std::vector<std::pair<const char*, std::string>> cases{
      {kPowerCfg, "N,ris_type,trial,received_power_dbm"},
      {kBenchCfg,
       "algorithm,N,trial,sum_rate_bps_hz,wall_time_s,iterations,converged,rate_per_device_bps_hz,objective"},
      {kQmlCfg, "epoch,split,cross_entropy,acc_delta0,acc_delta1,acc_delta2"}};
  for (const auto& [cfg, header] : cases) {
    const fs::path dir = scratch("schema");
    ASSERT_EQ(run_config(dir, cfg, false), harness::kOk) << cfg;
    const fs::path out = dir / "out";
    EXPECT_EQ(first_line(slurp(out / "results.csv")), header);
    // Every `file:`/`columns:` pair in schema.txt matches the file written.
    std::istringstream schema(slurp(out / "schema.txt"));
    std::string line, file;
    int files = 0;
    while (std::getline(schema, line)) {
      if (line.rfind("file: ", 0) == 0) file = line.substr(6);
      if (line.rfind("columns: ", 0) == 0) {
        // confusion.csv continues with one column per beam after the listed ones.
        const std::string header = first_line(slurp(out / file));
        if (file == "confusion.csv")
          EXPECT_EQ(header.rfind(line.substr(9) + ",0,1", 0), 0u) << header;
        else
          EXPECT_EQ(header, line.substr(9)) << file;
        ++files;
      }
    }
    EXPECT_GE(files, 4);
    for (const char* f : {"manifest.txt", "config.resolved", "warnings.txt", "plotspec.csv"})
      EXPECT_TRUE(fs::exists(out / f)) << f;
  }
}

TEST(Harness, RerunsAreByteIdentical) {
  for (const char* cfg : {kPowerCfg, kBenchCfg, kQmlCfg}) {
    const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
    ASSERT_EQ(run_config(a, cfg, false), 0);
    ASSERT_EQ(run_config(b, cfg, false), 0);
    for (const auto& entry : fs::directory_iterator(a / "out")) {
      const auto name = entry.path().filename();
      if (name == "config.resolved") continue;  // holds the output directory
      EXPECT_EQ(slurp(entry.path()), slurp(b / "out" / name)) << name;
    }
  }
}

TEST(Harness, ManifestRecordsTrialSeeds) {
  const fs::path dir = scratch("manifest");
  ASSERT_EQ(run_config(dir, kPowerCfg, false), 0);
  const std::string m = slurp(dir / "out" / "manifest.txt");
  EXPECT_NE(m.find("trial_seed 0 = 7589729799981995305\n"), std::string::npos);
  EXPECT_NE(m.find("timing = false\n"), std::string::npos);
}

TEST(Harness, ExitCodes) {
  const fs::path dir = scratch("exit");
  std::string err;
  EXPECT_EQ(run_config(dir, "experiment = qml-beam\ntrails = 3\nfoo = 1\n", true, &err), harness::kConfigFault);
  EXPECT_EQ(err, "config-error line=2 key=trails message=\"unknown key in [general]\" more_errors=1\n");
  harness::RunOptions missing;
  missing.config_path = (dir / "absent.cfg").string();
  std::ostringstream sink;
  EXPECT_EQ(harness::run(missing, sink), harness::kConfigFault);
  // An output directory that cannot be created is a runtime fault.
  std::ofstream(dir / "blocker") << "x";
  auto parsed = config::parse_string(kQmlCfg);
  parsed.config.output_dir = (dir / "blocker" / "sub").string();
  EXPECT_EQ(harness::run_resolved(parsed.config, {}, sink), harness::kRuntimeFault);
  EXPECT_NE(sink.str().find("runtime-error"), std::string::npos);
}
