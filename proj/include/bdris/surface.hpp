#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "bdris/channel.hpp"
#include "bdris/error.hpp"
#include "bdris/manifold.hpp"

namespace bdris::surface {

using manifold::BlockStructure;
using manifold::UnitaryMatrix;

// Conventional RIS: one phase shifter per element.
struct Diagonal {};
// Elements split into (optionally permuted) groups; each block is unitary.
struct GroupConnected {
  BlockStructure blocks;
};
struct FullyConnected {};
// Element i is wired to element permutation[i] through a phase shifter.
struct NonDiagonalPaired {
  std::vector<Index> permutation;
};
// Reflective and transmissive halves; see HybridMatrices.
struct Hybrid {};
// Circuit topologies carried in the taxonomy only; no structural pattern or
// optimizer support beyond the unitarity check.
struct TreeConnected {};
struct ForestConnected {};

using Architecture = std::variant<Diagonal, GroupConnected, FullyConnected, NonDiagonalPaired,
                                  Hybrid, TreeConnected, ForestConnected>;

inline std::string architecture_name(const Architecture& arch) {
  return std::visit(
      [](const auto& a) -> std::string {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, Diagonal>) return "diagonal";
        else if constexpr (std::is_same_v<T, GroupConnected>) return "group-connected";
        else if constexpr (std::is_same_v<T, FullyConnected>) return "fully-connected";
        else if constexpr (std::is_same_v<T, NonDiagonalPaired>) return "non-diagonal-paired";
        else if constexpr (std::is_same_v<T, Hybrid>) return "hybrid";
        else if constexpr (std::is_same_v<T, TreeConnected>) return "tree-connected";
        else return "forest-connected";
      },
      arch);
}

/// Block structure of the optimizable architectures (diagonal, group- and
/// fully-connected); throws UnsupportedArchitecture for the others.
inline BlockStructure block_structure(const Architecture& arch, Index n) {
  if (std::holds_alternative<Diagonal>(arch)) return BlockStructure::singletons(n);
  if (std::holds_alternative<FullyConnected>(arch)) return BlockStructure::single(n);
  if (const auto* g = std::get_if<GroupConnected>(&arch)) {
    g->blocks.check(n);
    return g->blocks;
  }
  throw UnsupportedArchitecture("no block-unitary parameterization for " +
                                architecture_name(arch));
}

struct ValidationReport {
  std::vector<std::string> violations;
  double unitarity_error = 0.0;
  // Largest |entry| where the architecture forces an exact zero.
  double structural_violation = 0.0;

  bool ok() const noexcept { return violations.empty(); }
};

namespace detail {

inline void check_pattern(const CMatrix& theta, const Eigen::MatrixXd& allowed,
                          ValidationReport& report) {
  for (Index j = 0; j < theta.cols(); ++j)
    for (Index i = 0; i < theta.rows(); ++i)
      if (allowed(i, j) == 0.0 && theta(i, j) != Complex{}) {
        report.structural_violation = std::max(report.structural_violation, std::abs(theta(i, j)));
        if (report.violations.size() < 16)
          report.violations.push_back("nonzero entry (" + std::to_string(i) + "," +
                                      std::to_string(j) + ") outside the connectivity pattern");
      }
}

inline void check_unitary(const CMatrix& theta, double tol, ValidationReport& report) {
  report.unitarity_error = manifold::unitarity_error(theta);
  if (!(report.unitarity_error <= tol))
    report.violations.push_back("unitarity error " + std::to_string(report.unitarity_error) +
                                " exceeds tolerance");
}

}  // namespace detail

/// Checks the zero pattern exactly and unitarity of the connected part within
/// `tol`; every violated constraint is reported.
inline ValidationReport validate(const CMatrix& theta, const Architecture& arch,
                                 double tol = manifold::kUnitaryTolerance) {
  ValidationReport report;
  if (theta.rows() < 1 || theta.rows() != theta.cols()) {
    report.violations.push_back("matrix is not square");
    return report;
  }
  const Index n = theta.rows();
  if (!theta.allFinite()) {
    report.violations.push_back("non-finite entries");
    return report;
  }
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, Diagonal>) {
          detail::check_pattern(theta, Eigen::MatrixXd::Identity(n, n), report);
          detail::check_unitary(theta, tol, report);
        } else if constexpr (std::is_same_v<T, GroupConnected>) {
          if (a.blocks.dimension() != n) {
            report.violations.push_back("group sizes do not sum to N");
            return;
          }
          detail::check_pattern(theta, a.blocks.mask(), report);
          detail::check_unitary(theta, tol, report);
        } else if constexpr (std::is_same_v<T, NonDiagonalPaired>) {
          if (static_cast<Index>(a.permutation.size()) != n) {
            report.violations.push_back("pairing permutation has wrong length");
            return;
          }
          Eigen::MatrixXd allowed = Eigen::MatrixXd::Zero(n, n);
          std::vector<char> seen(static_cast<std::size_t>(n), 0);
          for (Index i = 0; i < n; ++i) {
            const Index p = a.permutation[static_cast<std::size_t>(i)];
            if (p < 0 || p >= n || seen[static_cast<std::size_t>(p)]) {
              report.violations.push_back("pairing permutation is not a bijection");
              return;
            }
            seen[static_cast<std::size_t>(p)] = 1;
            allowed(i, p) = 1.0;
          }
          detail::check_pattern(theta, allowed, report);
          detail::check_unitary(theta, tol, report);
        } else if constexpr (std::is_same_v<T, Hybrid>) {
          // A single half of a lossless split is a contraction.
          Eigen::JacobiSVD<CMatrix> svd(theta);
          const double s = svd.singularValues()(0);
          if (!(s <= 1.0 + tol))
            report.violations.push_back("hybrid half has spectral norm " + std::to_string(s) +
                                        " > 1");
        } else {
          detail::check_unitary(theta, tol, report);
        }
      },
      arch);
  return report;
}

/// Θ_r†Θ_r + Θ_t†Θ_t = I: incident power split losslessly between the
/// reflective and transmissive modes.
struct HybridMatrices {
  CMatrix reflect;
  CMatrix transmit;

  // Θ_r = √α·U₁, Θ_t = √(1−α)·U₂.
  static HybridMatrices split(double alpha, const UnitaryMatrix& u1, const UnitaryMatrix& u2) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInput("HybridMatrices: alpha outside [0,1]");
    if (u1.dimension() != u2.dimension())
      throw DimensionMismatch("HybridMatrices: U1 and U2 dimensions differ");
    return {std::sqrt(alpha) * u1.matrix(), std::sqrt(1.0 - alpha) * u2.matrix()};
  }

  double power_split_error() const {
    if (reflect.rows() != reflect.cols() || reflect.rows() != transmit.rows() ||
        transmit.rows() != transmit.cols())
      return INFINITY;
    const Index n = reflect.rows();
    return (reflect.adjoint() * reflect + transmit.adjoint() * transmit -
            CMatrix::Identity(n, n))
        .cwiseAbs()
        .maxCoeff();
  }
};

inline ValidationReport validate_hybrid(const HybridMatrices& h,
                                        double tol = manifold::kUnitaryTolerance) {
  ValidationReport report;
  report.unitarity_error = h.power_split_error();
  if (!(report.unitarity_error <= tol))
    report.violations.push_back("reflect/transmit power split error " +
                                std::to_string(report.unitarity_error) + " exceeds tolerance");
  return report;
}

// ---------------------------------------------------------------------------
// Effective channel and the location-summed channel-gain objective.

/// h with h† = a† + b†ΘC, i.e. h = a + C†Θ†b.
inline CVector effective_channel(const CVector& a, const CVector& b, const CMatrix& c,
                                 const CMatrix& theta) {
  const Index n = b.size(), m = a.size();
  if (theta.rows() != n || theta.cols() != n || c.rows() != n || c.cols() != m)
    throw DimensionMismatch("effective_channel: inconsistent dimensions");
  return a + c.adjoint() * (theta.adjoint() * b);
}

// Columns are the effective channels h_ℓ of every device (M × L).
inline CMatrix effective_channels(const channel::ChannelRealization& r, const CMatrix& theta) {
  if (theta.rows() != r.num_elements() || theta.cols() != r.num_elements())
    throw DimensionMismatch("effective_channels: Θ does not match N");
  return r.direct + r.bs_ris.adjoint() * (theta.adjoint() * r.ris_device);
}

/// Σ_p Σ_ℓ ‖a_ℓ,p† + b_ℓ,p†ΘC_p‖².
inline double channel_gain_objective(const CMatrix& theta,
                                     const std::vector<channel::ChannelRealization>& realizations) {
  double total = 0.0;
  for (const auto& r : realizations) {
    if (r.num_elements() != theta.rows() || theta.rows() != theta.cols())
      throw DimensionMismatch("channel_gain_objective: Θ does not match N");
    total += effective_channels(r, theta).squaredNorm();
  }
  return total;
}

// ---------------------------------------------------------------------------
// Closed-form single-tag optima: source → surface (c) → tag (b), maximizing
// the reflected amplitude |b†Θc|.

struct SingleTagOptimum {
  CMatrix theta;
  double amplitude = 0.0;
};

namespace detail {

inline void check_tag_vectors(const CVector& b, const CVector& c, const char* what) {
  if (b.size() < 1 || b.size() != c.size())
    throw DimensionMismatch(std::string(what) + ": b and c must have the same nonzero length");
  if (b.squaredNorm() == 0.0 || c.squaredNorm() == 0.0)
    throw ZeroChannel(std::string(what) + ": b and c must be nonzero");
}

// Unitary whose first column is the unit vector u. The remaining columns are
// Gram–Schmidt on the canonical basis in index order, skipping the index where
// |u_k| is largest.
inline CMatrix complete_basis(const CVector& u) {
  const Index n = u.size();
  CMatrix q(n, n);
  q.col(0) = u;
  Index skip = 0;
  u.cwiseAbs().maxCoeff(&skip);
  Index col = 1;
  for (Index k = 0; k < n; ++k) {
    if (k == skip) continue;
    CVector v = CVector::Unit(n, k);
    for (int pass = 0; pass < 2; ++pass)
      for (Index j = 0; j < col; ++j) v -= q.col(j) * q.col(j).dot(v);
    q.col(col++) = v / v.norm();
  }
  return q;
}

}  // namespace detail

/// θ_i = exp(i(arg b_i − arg c_i)) aligns every reflected term; amplitude
/// Σ|b_i||c_i|.
inline SingleTagOptimum optimal_diagonal_single_tag(const CVector& b, const CVector& c) {
  detail::check_tag_vectors(b, c, "optimal_diagonal_single_tag");
  const Index n = b.size();
  SingleTagOptimum out;
  out.theta = CMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const double mag = std::abs(b(i)) * std::abs(c(i));
    out.theta(i, i) = mag > 0.0 ? std::polar(1.0, std::arg(b(i)) - std::arg(c(i))) : Complex(1.0);
    out.amplitude += mag;
  }
  return out;
}

/// Θ = U V† with U e₁ = b/‖b‖ and V e₁ = c/‖c‖, so Θ maps c/‖c‖ onto b/‖b‖ and
/// |b†Θc| = ‖b‖‖c‖ (the Cauchy–Schwarz bound).
inline SingleTagOptimum optimal_fully_connected_single_tag(const CVector& b, const CVector& c) {
  detail::check_tag_vectors(b, c, "optimal_fully_connected_single_tag");
  const CMatrix u = detail::complete_basis(b / b.norm());
  const CMatrix v = detail::complete_basis(c / c.norm());
  return {u * v.adjoint(), b.norm() * c.norm()};
}

inline double reflected_amplitude(const CVector& b, const CVector& c, const CMatrix& theta) {
  return std::abs(b.dot(theta * c));
}

}  // namespace bdris::surface
