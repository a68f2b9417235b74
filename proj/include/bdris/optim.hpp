#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "bdris/channel.hpp"
#include "bdris/error.hpp"
#include "bdris/manifold.hpp"
#include "bdris/random.hpp"
#include "bdris/surface.hpp"

namespace bdris::optim {

using channel::ChannelRealization;
using manifold::BlockUnitaryManifold;
using surface::Architecture;
using Realizations = std::vector<ChannelRealization>;

inline double snr_linear(double db) { return std::pow(10.0, db / 10.0); }

// ---------------------------------------------------------------------------
// Sum rate under an RZF precoder.

/// W = H(H†H + (L/ρ)I)^{-1} scaled to unit total power; H is M × L with the
/// effective channels as columns. A zero H yields a zero precoder.
inline CMatrix rzf_precoder(const CMatrix& h, double rho) {
  const Index l = h.cols();
  if (!(rho > 0.0)) return CMatrix::Zero(h.rows(), l);
  CMatrix gram = h.adjoint() * h;
  gram.diagonal().array() += static_cast<double>(l) / rho;
  CMatrix w = h * gram.ldlt().solve(CMatrix::Identity(l, l));
  const double norm = w.norm();
  if (norm > 0.0) w /= norm;
  return w;
}

/// log2(1 + SINR_ℓ) per device for precoder W.
inline Eigen::VectorXd device_rates(const CMatrix& h, const CMatrix& w, double rho) {
  const CMatrix s = h.adjoint() * w;  // s(ℓ, j) = h_ℓ† w_j
  const Index l = h.cols();
  Eigen::VectorXd rates(l);
  for (Index k = 0; k < l; ++k) {
    const double total = s.row(k).squaredNorm();
    const double signal = std::norm(s(k, k));
    const double sinr = rho * signal / (rho * (total - signal) + 1.0);
    rates(k) = std::log2(1.0 + sinr);
  }
  return rates;
}

inline Eigen::VectorXd device_rates(const CMatrix& theta, const ChannelRealization& r,
                                    double tx_snr_db) {
  r.validate();
  if (theta.rows() != r.num_elements() || theta.cols() != r.num_elements())
    throw DimensionMismatch("sum_rate: Θ does not match N");
  const double rho = snr_linear(tx_snr_db);
  const CMatrix h = surface::effective_channels(r, theta);
  return device_rates(h, rzf_precoder(h, rho), rho);
}

/// Σ_ℓ log2(1 + SINR_ℓ) in bits/s/Hz with the RZF precoder.
inline double sum_rate(const CMatrix& theta, const ChannelRealization& r, double tx_snr_db) {
  return device_rates(theta, r, tx_snr_db).sum();
}

inline double sum_rate(const CMatrix& theta, const ChannelRealization& r) {
  return sum_rate(theta, r, r.tx_snr_db);
}

// Mean over snapshots of the aggregate sum rate.
inline double mean_sum_rate(const CMatrix& theta, const Realizations& rs) {
  if (rs.empty()) throw InvalidInput("mean_sum_rate: no realizations");
  double total = 0.0;
  for (const auto& r : rs) total += sum_rate(theta, r);
  return total / static_cast<double>(rs.size());
}

// ---------------------------------------------------------------------------
// Channel-gain objective and its gradient.

inline void check_realizations(const Realizations& rs, Index n, const char* what) {
  if (rs.empty()) throw InvalidInput(std::string(what) + ": no realizations");
  const Index m = rs.front().num_bs_antennas();
  for (const auto& r : rs) {
    r.validate();
    if (r.num_elements() != n || r.num_bs_antennas() != m)
      throw DimensionMismatch(std::string(what) + ": realizations disagree on N or M");
  }
}

/// G = Σ_{ℓ,p} b_ℓ,p h_ℓ,p† C_p†, the derivative ∂f/∂Θ* of the channel-gain
/// objective. The real gradient on R^{2N²} is 2G.
inline CMatrix euclidean_gradient(const CMatrix& theta, const Realizations& rs) {
  if (theta.rows() != theta.cols()) throw DimensionMismatch("euclidean_gradient: Θ not square");
  check_realizations(rs, theta.rows(), "euclidean_gradient");
  CMatrix g = CMatrix::Zero(theta.rows(), theta.cols());
  for (const auto& r : rs) {
    const CMatrix h = surface::effective_channels(r, theta);  // M × L
    g += (r.ris_device * h.adjoint()) * r.bs_ris.adjoint();
  }
  return g;
}

// Objective plus real Euclidean gradient; the interface the manifold solvers use.
struct ChannelGainProblem {
  const Realizations* rs;

  double value(const CMatrix& theta) const { return surface::channel_gain_objective(theta, *rs); }
  CMatrix gradient(const CMatrix& theta) const { return 2.0 * euclidean_gradient(theta, *rs); }
};

// ---------------------------------------------------------------------------
// Configuration and results.

struct OptimizerConfig {
  int max_iterations = 500;
  double objective_tolerance = 1e-6;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  // Length ‖step·direction‖_F of the first steepest-ascent trial step.
  double initial_step = 1.0;
  int lbfgs_memory = 10;
  int fp_inner_theta_steps = 20;
  std::uint64_t seed = 0;
  // Consecutive failed backtracks before a run is declared converged-by-stall.
  int max_backtracks = 50;
  // Stationarity gate: ‖grad‖ ≤ gradient_tolerance·(1 + |f|) at convergence.
  double gradient_tolerance = 1e-4;
  // Starting point; Haar-random on the feasible set when empty.
  std::optional<CMatrix> initial_theta;
  // Called with every accepted iterate (including the start).
  std::function<void(const CMatrix&)> on_iterate;

  void validate() const {
    if (max_iterations < 1 || lbfgs_memory < 1 || fp_inner_theta_steps < 1 || max_backtracks < 1)
      throw InvalidInput("OptimizerConfig: iteration counts must be positive");
    if (!(objective_tolerance > 0.0 && armijo_c > 0.0 && armijo_c < 1.0 && initial_step > 0.0 &&
          gradient_tolerance > 0.0))
      throw InvalidInput("OptimizerConfig: tolerances and steps must be positive");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
      throw InvalidInput("OptimizerConfig: backtrack_factor must lie in (0, 1)");
  }
};

struct OptimizerResult {
  CMatrix theta;
  std::vector<double> objective_trace;
  // FP only: quadratic-transform surrogate after each outer iteration (bits).
  std::vector<double> surrogate_trace;
  double wall_time_s = 0.0;
  int iterations = 0;
  bool converged = false;
  bool stalled = false;
  // "channel_gain" or "sum_rate": the quantity this algorithm maximizes.
  std::string objective_kind;
  std::vector<std::string> warnings;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline CMatrix initial_point(const BlockUnitaryManifold& mfd, const OptimizerConfig& cfg) {
  if (cfg.initial_theta) {
    const CMatrix& t = *cfg.initial_theta;
    if (t.rows() != mfd.dimension() || t.cols() != mfd.dimension())
      throw DimensionMismatch("initial_theta does not match N");
    return mfd.project(mfd.mask(t));
  }
  Rng rng(derive_seed(cfg.seed, "init", 0));
  return mfd.random_point(rng);
}

inline void notify(const OptimizerConfig& cfg, const CMatrix& theta) {
  if (cfg.on_iterate) cfg.on_iterate(theta);
}

struct StepOutcome {
  bool accepted = false;
  CMatrix theta;
  double value = 0.0;
  double step = 0.0;
  int trials = 0;
};

/// Backtracking until f(R(α·d)) ≥ f + c·α·slope, slope = ⟨grad, d⟩ > 0.
template <class Problem>
StepOutcome armijo(const Problem& prob, const BlockUnitaryManifold& mfd, const CMatrix& theta,
                   double f, const CMatrix& dir, double slope, double step0,
                   const OptimizerConfig& cfg) {
  double a = step0;
  StepOutcome out;
  for (int k = 0; k < cfg.max_backtracks; ++k) {
    CMatrix cand = mfd.retract(theta, dir, a);
    const double fc = prob.value(cand);
    out.trials = k + 1;
    if (std::isfinite(fc) && fc >= f + cfg.armijo_c * a * slope) {
      out.accepted = true;
      out.theta = std::move(cand);
      out.value = fc;
      out.step = a;
      return out;
    }
    a *= cfg.backtrack_factor;
  }
  return out;
}

inline double relative_change(double f_new, double f_old) {
  const double scale = std::max(std::abs(f_new), std::numeric_limits<double>::min());
  return std::abs(f_new - f_old) / scale;
}

// Gradient negligible against the objective itself (a stationary start).
inline bool numerically_stationary(double gnorm, double f) {
  return gnorm <= 1e-10 * std::max(std::abs(f), std::numeric_limits<double>::min());
}

// Steepest ascent state shared by AO and the FP inner loop.
struct AscentState {
  CMatrix theta;
  double value = 0.0;
  CMatrix grad;
  double grad_norm = 0.0;
  double next_step = 0.0;  // 0: derive from initial_step
};

template <class Problem>
void refresh_gradient(const Problem& prob, const BlockUnitaryManifold& mfd, AscentState& s) {
  s.grad = mfd.tangent(prob.gradient(s.theta), s.theta);
  s.grad_norm = s.grad.norm();
}

/// One Armijo steepest-ascent step. The trial step doubles after a first-try
/// acceptance and otherwise restarts from the last accepted step.
template <class Problem>
bool ascent_step(const Problem& prob, const BlockUnitaryManifold& mfd, AscentState& s,
                 const OptimizerConfig& cfg) {
  if (s.grad_norm == 0.0) return false;
  const double step0 = s.next_step > 0.0 ? s.next_step : cfg.initial_step / s.grad_norm;
  StepOutcome o = armijo(prob, mfd, s.theta, s.value, s.grad, s.grad_norm * s.grad_norm, step0, cfg);
  if (!o.accepted) return false;
  s.next_step = o.trials == 1 ? 2.0 * o.step : o.step;
  s.theta = std::move(o.theta);
  s.value = o.value;
  refresh_gradient(prob, mfd, s);
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// RZF: one-shot unitary Procrustes on the direct/reflected cross term.

/// Θ maximizing Re tr(Θ†M) with M = Σ_{ℓ,p} b_ℓ,p a_ℓ,p† C_p†, block-wise for
/// structured architectures. A zero M falls back to a Haar-random point.
inline OptimizerResult rzf_one_shot(const Realizations& rs,
                                    const Architecture& arch = surface::FullyConnected{},
                                    const OptimizerConfig& cfg = {}) {
  const auto t0 = detail::Clock::now();
  if (rs.empty()) throw InvalidInput("rzf_one_shot: no realizations");
  const Index n = rs.front().num_elements();
  check_realizations(rs, n, "rzf_one_shot");
  const BlockUnitaryManifold mfd(surface::block_structure(arch, n));

  CMatrix m = CMatrix::Zero(n, n);
  for (const auto& r : rs) m += (r.ris_device * r.direct.adjoint()) * r.bs_ris.adjoint();
  m = mfd.mask(m);

  OptimizerResult out;
  out.objective_kind = "channel_gain";
  out.iterations = 1;
  out.converged = true;
  // M has rank at most the BS antenna count, usually below N; any SVD
  // completion of the polar factor is a maximizer, so only M = 0 falls back.
  if (!(m.cwiseAbs().maxCoeff() > 0.0)) {
    out.warnings.push_back("RankDeficient: cross-term matrix is zero; using a random unitary");
    Rng rng(derive_seed(cfg.seed, "rzf-fallback", 0));
    out.theta = mfd.random_point(rng);
  } else {
    out.theta = mfd.project(m);
  }
  detail::notify(cfg, out.theta);
  out.objective_trace.push_back(surface::channel_gain_objective(out.theta, rs));
  out.wall_time_s = detail::seconds_since(t0);
  return out;
}

// ---------------------------------------------------------------------------
// AO: Riemannian steepest ascent with Armijo backtracking and polar retraction.

template <class Problem>
OptimizerResult ascent_solve(const Problem& prob, const BlockUnitaryManifold& mfd,
                             const OptimizerConfig& cfg) {
  OptimizerResult out;
  detail::AscentState s;
  s.theta = detail::initial_point(mfd, cfg);
  s.value = prob.value(s.theta);
  detail::refresh_gradient(prob, mfd, s);
  detail::notify(cfg, s.theta);
  out.objective_trace.push_back(s.value);

  if (detail::numerically_stationary(s.grad_norm, s.value)) {
    out.converged = true;
  } else {
    for (int it = 1; it <= cfg.max_iterations; ++it) {
      const double f_old = s.value;
      if (!detail::ascent_step(prob, mfd, s, cfg)) {
        out.converged = true;
        out.stalled = true;
        break;
      }
      out.iterations = it;
      out.objective_trace.push_back(s.value);
      detail::notify(cfg, s.theta);
      if (detail::numerically_stationary(s.grad_norm, s.value) ||
          (detail::relative_change(s.value, f_old) < cfg.objective_tolerance &&
           s.grad_norm <= cfg.gradient_tolerance * (1.0 + std::abs(s.value)))) {
        out.converged = true;
        break;
      }
    }
  }
  out.theta = std::move(s.theta);
  return out;
}

inline OptimizerResult ao_manifold(const Realizations& rs, const Architecture& arch,
                                   const OptimizerConfig& cfg = {}) {
  const auto t0 = detail::Clock::now();
  cfg.validate();
  if (rs.empty()) throw InvalidInput("ao_manifold: no realizations");
  const Index n = rs.front().num_elements();
  check_realizations(rs, n, "ao_manifold");
  const BlockUnitaryManifold mfd(surface::block_structure(arch, n));
  OptimizerResult out = ascent_solve(ChannelGainProblem{&rs}, mfd, cfg);
  out.objective_kind = "channel_gain";
  if (!out.converged) out.warnings.push_back("NonConvergence: iteration limit reached");
  out.wall_time_s = detail::seconds_since(t0);
  return out;
}

// ---------------------------------------------------------------------------
// QNM: limited-memory BFGS on the manifold. Curvature pairs live in the tangent
// space of the current iterate and are re-projected onto the new tangent space
// after every step.

template <class Problem>
OptimizerResult lbfgs_solve(const Problem& prob, const BlockUnitaryManifold& mfd,
                            const OptimizerConfig& cfg) {
  using manifold::real_inner;
  struct Pair {
    CMatrix s, y;  // y is the change in the gradient of −f
    double rho;
  };

  OptimizerResult out;
  CMatrix theta = detail::initial_point(mfd, cfg);
  double f = prob.value(theta);
  CMatrix g = mfd.tangent(prob.gradient(theta), theta);
  double gnorm = g.norm();
  detail::notify(cfg, theta);
  out.objective_trace.push_back(f);
  std::deque<Pair> memory;

  if (detail::numerically_stationary(gnorm, f)) {
    out.converged = true;
    out.theta = std::move(theta);
    return out;
  }

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    // Two-loop recursion on ∇(−f) = −g; the ascent direction is d = H·g.
    CMatrix q = g;
    std::vector<double> alpha(memory.size());
    for (std::size_t i = memory.size(); i-- > 0;) {
      alpha[i] = memory[i].rho * real_inner(memory[i].s, q);
      q -= alpha[i] * memory[i].y;
    }
    double step0 = 1.0;
    if (!memory.empty()) {
      const Pair& last = memory.back();
      q *= 1.0 / (last.rho * last.y.squaredNorm());
    } else {
      step0 = cfg.initial_step / gnorm;
    }
    for (std::size_t i = 0; i < memory.size(); ++i) {
      const double beta = memory[i].rho * real_inner(memory[i].y, q);
      q += (alpha[i] - beta) * memory[i].s;
    }
    CMatrix dir = mfd.tangent(q, theta);
    double slope = real_inner(g, dir);
    if (!(slope > 0.0) || !dir.allFinite()) {
      dir = g;
      slope = gnorm * gnorm;
      step0 = cfg.initial_step / gnorm;
      memory.clear();
    }

    detail::StepOutcome o = detail::armijo(prob, mfd, theta, f, dir, slope, step0, cfg);
    if (!o.accepted && !memory.empty()) {
      memory.clear();
      dir = g;
      slope = gnorm * gnorm;
      o = detail::armijo(prob, mfd, theta, f, dir, slope, cfg.initial_step / gnorm, cfg);
    }
    if (!o.accepted) {
      out.converged = true;
      out.stalled = true;
      break;
    }

    const CMatrix& next = o.theta;
    const CMatrix g_next = mfd.tangent(prob.gradient(next), next);
    const CMatrix s = mfd.tangent(o.step * dir, next);
    const CMatrix y = mfd.tangent(g, next) - g_next;
    for (auto& p : memory) {
      p.s = mfd.tangent(p.s, next);
      p.y = mfd.tangent(p.y, next);
      const double sy = real_inner(p.s, p.y);
      p.rho = sy > 0.0 ? 1.0 / sy : 0.0;
    }
    std::erase_if(memory, [](const Pair& p) { return !(p.rho > 0.0); });
    const double sy = real_inner(s, y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      memory.push_back({s, y, 1.0 / sy});
      while (static_cast<int>(memory.size()) > cfg.lbfgs_memory) memory.pop_front();
    }

    const double f_old = f;
    theta = std::move(o.theta);
    f = o.value;
    g = g_next;
    gnorm = g.norm();
    out.iterations = it;
    out.objective_trace.push_back(f);
    detail::notify(cfg, theta);
    if (detail::numerically_stationary(gnorm, f) ||
        (detail::relative_change(f, f_old) < cfg.objective_tolerance &&
         gnorm <= cfg.gradient_tolerance * (1.0 + std::abs(f)))) {
      out.converged = true;
      break;
    }
  }
  out.theta = std::move(theta);
  return out;
}

inline OptimizerResult qnm_manifold(const Realizations& rs, const Architecture& arch,
                                    const OptimizerConfig& cfg = {}) {
  const auto t0 = detail::Clock::now();
  cfg.validate();
  if (rs.empty()) throw InvalidInput("qnm_manifold: no realizations");
  const Index n = rs.front().num_elements();
  check_realizations(rs, n, "qnm_manifold");
  const BlockUnitaryManifold mfd(surface::block_structure(arch, n));
  OptimizerResult out = lbfgs_solve(ChannelGainProblem{&rs}, mfd, cfg);
  out.objective_kind = "channel_gain";
  if (!out.converged) out.warnings.push_back("NonConvergence: iteration limit reached");
  out.wall_time_s = detail::seconds_since(t0);
  return out;
}

// ---------------------------------------------------------------------------
// FP: quadratic-transform alternation for the snapshot-summed sum rate.
//
// For fixed precoders W_p each rate term log(1 + SINR_ℓ) is bounded below by
//   log(1 + 2√ρ·Re(y_ℓ* s_ℓℓ) − |y_ℓ|²(ρ Σ_{j≠ℓ} |s_ℓj|² + 1)),
// s_ℓj = h_ℓ† w_j, with equality at y_ℓ = √ρ s_ℓℓ / (ρ Σ_{j≠ℓ} |s_ℓj|² + 1).
// The argument of the log is a concave quadratic in Θ, so the bound is concave.
// The transform is applied inside the log: with the Lagrangian-dual form the
// signal power sits in the denominator and one outer step can raise |s_ℓℓ| by
// only a factor of about 1 + 1/SINR.

namespace detail {

struct FpSnapshot {
  const ChannelRealization* r;
  double rho;
  CMatrix w;            // M × L precoder
  CMatrix cw;           // C·W, N × L
  CMatrix aw;           // A†W, L × L
  Eigen::VectorXd gam;  // SINR at the last refresh
  CVector y;            // quadratic-transform auxiliaries
};

inline CMatrix cross_gains(const FpSnapshot& p, const CMatrix& theta) {
  return p.aw + p.r->ris_device.adjoint() * (theta * p.cw);
}

inline double rate_nats(const ChannelRealization& r, const CMatrix& theta, const CMatrix& w,
                        double rho) {
  const CMatrix h = surface::effective_channels(r, theta);
  return device_rates(h, w, rho).sum() * std::numbers::ln2;
}

struct FpSurrogate {
  const std::vector<FpSnapshot>* snaps;

  // Quadratic-transform SINR surrogate of every device, per snapshot.
  static Eigen::VectorXd sinr_bounds(const FpSnapshot& p, const CMatrix& s) {
    Eigen::VectorXd q(s.rows());
    const double sr = std::sqrt(p.rho);
    for (Index l = 0; l < s.rows(); ++l) {
      const double interference = s.row(l).squaredNorm() - std::norm(s(l, l));
      q(l) = 2.0 * sr * (std::conj(p.y(l)) * s(l, l)).real() -
             std::norm(p.y(l)) * (p.rho * interference + 1.0);
    }
    return q;
  }

  double value(const CMatrix& theta) const {
    double total = 0.0;
    for (const auto& p : *snaps) {
      const Eigen::VectorXd q = sinr_bounds(p, cross_gains(p, theta));
      for (Index l = 0; l < q.size(); ++l) {
        if (!(q(l) > -1.0)) return -std::numeric_limits<double>::infinity();
        total += std::log1p(q(l));
      }
    }
    return total;
  }

  CMatrix gradient(const CMatrix& theta) const {
    const Index n = theta.rows();
    CMatrix grad = CMatrix::Zero(n, n);
    for (const auto& p : *snaps) {
      const CMatrix s = cross_gains(p, theta);
      const Eigen::VectorXd q = sinr_bounds(p, s);
      const Index l = s.rows();
      const double sr = std::sqrt(p.rho);
      CMatrix coeff(l, l);  // row ℓ: (2√ρ y_ℓ e_ℓ − 2ρ|y_ℓ|² s_ℓ,: off the diagonal) / (1 + q_ℓ)
      for (Index k = 0; k < l; ++k) {
        coeff.row(k) = -2.0 * p.rho * std::norm(p.y(k)) * s.row(k);
        coeff(k, k) = 2.0 * sr * p.y(k);
        coeff.row(k) /= 1.0 + q(k);
      }
      grad += p.r->ris_device * (coeff * p.cw.adjoint());
    }
    return grad;
  }
};

inline void refresh_auxiliaries(FpSnapshot& p, const CMatrix& theta) {
  p.cw = p.r->bs_ris * p.w;
  p.aw = p.r->direct.adjoint() * p.w;
  const CMatrix s = cross_gains(p, theta);
  const Index l = s.rows();
  p.gam.resize(l);
  p.y.resize(l);
  for (Index k = 0; k < l; ++k) {
    const double total = s.row(k).squaredNorm();
    const double signal = std::norm(s(k, k));
    p.gam(k) = p.rho * signal / (p.rho * (total - signal) + 1.0);
    p.y(k) = std::sqrt(p.rho) * s(k, k) / (p.rho * (total - signal) + 1.0);
  }
}

/// Projected-gradient step Θ ← P(Θ + α∇g) with backtracking until
/// g(Θ_α) ≥ g(Θ) + c·⟨∇g, Θ_α − Θ⟩. The trial α doubles after a first-try
/// acceptance; α = 0 on entry means ‖α∇g‖_F = initial_step·√N.
template <class Problem>
bool projected_ascent_step(const Problem& prob, const BlockUnitaryManifold& mfd, CMatrix& theta,
                           double& value, double& step, const OptimizerConfig& cfg) {
  const CMatrix grad = mfd.mask(prob.gradient(theta));
  const double gnorm = grad.norm();
  if (!(gnorm > 0.0) || numerically_stationary(gnorm, value)) return false;
  double a = step > 0.0
                 ? step
                 : cfg.initial_step * std::sqrt(static_cast<double>(mfd.dimension())) / gnorm;
  for (int k = 0; k < cfg.max_backtracks; ++k) {
    CMatrix cand = mfd.project(theta + a * grad);
    const double predicted = manifold::real_inner(grad, cand - theta);
    const double fc = prob.value(cand);
    if (predicted > 0.0 && std::isfinite(fc) && fc >= value + cfg.armijo_c * predicted) {
      step = k == 0 ? 2.0 * a : a;
      theta = std::move(cand);
      value = fc;
      return true;
    }
    a *= cfg.backtrack_factor;
  }
  return false;
}

}  // namespace detail

/// Each outer iteration: (1) RZF precoder refresh per snapshot, kept only if it
/// does not lower that snapshot's rate; (2) closed-form SINR auxiliaries;
/// (3) closed-form quadratic-transform auxiliaries; (4) up to
/// fp_inner_theta_steps Armijo projected-gradient steps on the surrogate in Θ,
/// stopping early once a step improves it by less than objective_tolerance. The surrogate after
/// step (4) is non-decreasing across outer iterations. The returned Θ is the
/// iterate with the best RZF sum rate.
inline OptimizerResult fp_sum_rate(const Realizations& rs, const Architecture& arch,
                                   const OptimizerConfig& cfg = {}) {
  const auto t0 = detail::Clock::now();
  cfg.validate();
  if (rs.empty()) throw InvalidInput("fp_sum_rate: no realizations");
  const Index n = rs.front().num_elements();
  check_realizations(rs, n, "fp_sum_rate");
  const BlockUnitaryManifold mfd(surface::block_structure(arch, n));
  const double num_snaps = static_cast<double>(rs.size());

  OptimizerResult out;
  out.objective_kind = "sum_rate";
  CMatrix theta = detail::initial_point(mfd, cfg);
  detail::notify(cfg, theta);

  std::vector<detail::FpSnapshot> snaps;
  snaps.reserve(rs.size());
  for (const auto& r : rs) {
    detail::FpSnapshot p{&r, snr_linear(r.tx_snr_db), {}, {}, {}, {}, {}};
    p.w = rzf_precoder(surface::effective_channels(r, theta), p.rho);
    snaps.push_back(std::move(p));
  }

  double best = mean_sum_rate(theta, rs);
  out.objective_trace.push_back(best);
  out.theta = theta;
  double surrogate_prev = 0.0;
  for (const auto& p : snaps) surrogate_prev += detail::rate_nats(*p.r, theta, p.w, p.rho);
  out.surrogate_trace.push_back(surrogate_prev / std::numbers::ln2 / num_snaps);

  const detail::FpSurrogate surrogate{&snaps};
  double inner_step = 0.0;
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    for (auto& p : snaps) {
      const CMatrix h = surface::effective_channels(*p.r, theta);
      CMatrix w = rzf_precoder(h, p.rho);
      if (device_rates(h, w, p.rho).sum() >= device_rates(h, p.w, p.rho).sum()) p.w = std::move(w);
      detail::refresh_auxiliaries(p, theta);
    }

    double value = surrogate.value(theta);
    for (int k = 0; k < cfg.fp_inner_theta_steps; ++k) {
      const double before = value;
      if (!detail::projected_ascent_step(surrogate, mfd, theta, value, inner_step, cfg)) break;
      detail::notify(cfg, theta);
      if (detail::relative_change(value, before) < cfg.objective_tolerance) break;
    }

    const double surrogate_now = value;
    out.surrogate_trace.push_back(surrogate_now / std::numbers::ln2 / num_snaps);
    const double rate = mean_sum_rate(theta, rs);
    out.objective_trace.push_back(rate);
    if (rate > best) {
      best = rate;
      out.theta = theta;
    }
    out.iterations = it;
    if (detail::relative_change(surrogate_now, surrogate_prev) < cfg.objective_tolerance) {
      out.converged = true;
      break;
    }
    surrogate_prev = surrogate_now;
  }
  if (!out.converged) out.warnings.push_back("NonConvergence: iteration limit reached");
  out.wall_time_s = detail::seconds_since(t0);
  return out;
}

// Riemannian gradient norm of the channel-gain objective at Θ.
inline double riemannian_gradient_norm(const CMatrix& theta, const Realizations& rs,
                                       const Architecture& arch) {
  const BlockUnitaryManifold mfd(surface::block_structure(arch, theta.rows()));
  return mfd.tangent(2.0 * euclidean_gradient(theta, rs), theta).norm();
}

}  // namespace bdris::optim
