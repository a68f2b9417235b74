#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bdris/error.hpp"
#include "bdris/random.hpp"

namespace bdris {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Index = Eigen::Index;

namespace manifold {

inline constexpr double kUnitaryTolerance = 1e-10;
// Singular values at or below this make the polar factor non-unique.
inline constexpr double kRankThreshold = 1e-12;

// ‖Θ†Θ − I‖ in the element-wise max norm.
inline double unitarity_error(const CMatrix& theta) {
  if (theta.rows() != theta.cols()) return INFINITY;
  const CMatrix gram = theta.adjoint() * theta;
  return (gram - CMatrix::Identity(theta.rows(), theta.cols())).cwiseAbs().maxCoeff();
}

inline CMatrix skew(const CMatrix& x) { return 0.5 * (x - x.adjoint()); }

// Real inner product Re tr(X†Y) on complex matrices viewed as R^{2n²}.
inline double real_inner(const CMatrix& x, const CMatrix& y) {
  return (x.conjugate().cwiseProduct(y)).sum().real();
}

class UnitaryMatrix {
 public:
  explicit UnitaryMatrix(CMatrix entries, double tolerance = kUnitaryTolerance)
      : entries_(std::move(entries)), tolerance_(tolerance) {
    if (entries_.rows() < 1 || entries_.rows() != entries_.cols())
      throw DimensionMismatch("UnitaryMatrix: entries must be square with dimension >= 1");
    if (!(tolerance_ >= 0.0)) throw InvalidInput("UnitaryMatrix: tolerance must be nonnegative");
    const double err = unitarity_error(entries_);
    if (!(err <= tolerance_))
      throw NotUnitary("UnitaryMatrix: |Θ†Θ - I|_max = " + std::to_string(err) +
                       " exceeds tolerance");
  }

  static UnitaryMatrix identity(Index n) { return UnitaryMatrix(CMatrix::Identity(n, n)); }

  const CMatrix& matrix() const noexcept { return entries_; }
  Index dimension() const noexcept { return entries_.rows(); }
  double tolerance() const noexcept { return tolerance_; }

 private:
  CMatrix entries_;
  double tolerance_;
};

// A tangent vector at `base`: Θ†T is skew-Hermitian.
struct TangentDirection {
  CMatrix entries;
  CMatrix base_point;

  double skew_residual() const {
    const CMatrix x = base_point.adjoint() * entries;
    return (x + x.adjoint()).cwiseAbs().maxCoeff();
  }
};

/// Partition of {0..N-1} into consecutive groups of a (possibly permuted) index
/// order. Group g covers positions [offset_g, offset_g + size_g) of
/// `permutation`; without a permutation the order is the identity.
class BlockStructure {
 public:
  BlockStructure() = default;
  explicit BlockStructure(std::vector<Index> group_sizes,
                          std::optional<std::vector<Index>> permutation = std::nullopt)
      : group_sizes_(std::move(group_sizes)), permutation_(std::move(permutation)) {
    if (group_sizes_.empty()) throw InvalidInput("BlockStructure: no groups");
    for (Index s : group_sizes_)
      if (s < 1) throw InvalidInput("BlockStructure: group sizes must be positive");
    if (permutation_) {
      const auto n = static_cast<Index>(permutation_->size());
      std::vector<char> seen(static_cast<std::size_t>(n), 0);
      for (Index p : *permutation_) {
        if (p < 0 || p >= n || seen[static_cast<std::size_t>(p)])
          throw InvalidInput("BlockStructure: permutation is not a bijection");
        seen[static_cast<std::size_t>(p)] = 1;
      }
      if (n != dimension())
        throw InvalidInput("BlockStructure: permutation length differs from sum of group sizes");
    }
  }

  // K equal groups of N/K elements.
  static BlockStructure uniform(Index n, Index groups) {
    if (groups < 1 || n % groups != 0)
      throw InvalidInput("BlockStructure::uniform: group count must divide N");
    return BlockStructure(std::vector<Index>(static_cast<std::size_t>(groups), n / groups));
  }
  static BlockStructure single(Index n) { return BlockStructure({n}); }
  static BlockStructure singletons(Index n) {
    return BlockStructure(std::vector<Index>(static_cast<std::size_t>(n), 1));
  }

  Index dimension() const {
    return std::accumulate(group_sizes_.begin(), group_sizes_.end(), Index{0});
  }
  const std::vector<Index>& group_sizes() const noexcept { return group_sizes_; }
  const std::optional<std::vector<Index>>& permutation() const noexcept { return permutation_; }

  void check(Index n) const {
    if (dimension() != n)
      throw DimensionMismatch("BlockStructure: group sizes sum to " + std::to_string(dimension()) +
                              ", matrix dimension is " + std::to_string(n));
  }

  std::vector<std::vector<Index>> groups() const {
    std::vector<std::vector<Index>> out;
    Index pos = 0;
    for (Index s : group_sizes_) {
      std::vector<Index> g(static_cast<std::size_t>(s));
      for (Index k = 0; k < s; ++k)
        g[static_cast<std::size_t>(k)] =
            permutation_ ? (*permutation_)[static_cast<std::size_t>(pos + k)] : pos + k;
      out.push_back(std::move(g));
      pos += s;
    }
    return out;
  }

  // Element-wise 0/1 pattern of entries inside a diagonal block.
  Eigen::MatrixXd mask() const {
    const Index n = dimension();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (const auto& g : groups())
      for (Index i : g)
        for (Index j : g) m(i, j) = 1.0;
    return m;
  }

 private:
  std::vector<Index> group_sizes_;
  std::optional<std::vector<Index>> permutation_;
};

namespace detail {

inline void check_square(const CMatrix& m, const char* what) {
  if (m.rows() < 1 || m.rows() != m.cols())
    throw DimensionMismatch(std::string(what) + ": expected a non-empty square matrix");
}

inline CMatrix svd_polar_factor(const CMatrix& m, Eigen::VectorXd* singular_values) {
  Eigen::BDCSVD<CMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (singular_values) *singular_values = svd.singularValues();
  return svd.matrixU() * svd.matrixV().adjoint();
}

// UV† without a rank check. Well-conditioned inputs (the common case: retraction
// steps, projected gradient steps) go through the Hermitian eigen-decomposition
// M†M = WΛW†, polar factor M·WΛ^{-1/2}W†, which is several times cheaper than an
// SVD. Its error grows like cond(M)², so ill-conditioned inputs, or results that
// drift from unitarity, fall back to the SVD.
inline CMatrix polar_factor_unchecked(const CMatrix& m, Eigen::VectorXd* singular_values = nullptr) {
  if (m.rows() == 1) {
    const Complex z = m(0, 0);
    const double a = std::abs(z);
    if (singular_values) *singular_values = Eigen::VectorXd::Constant(1, a);
    CMatrix r(1, 1);
    r(0, 0) = a > 0.0 ? z / a : Complex(1.0, 0.0);
    return r;
  }
  const Eigen::SelfAdjointEigenSolver<CMatrix> es(m.adjoint() * m);
  const Eigen::VectorXd& lam = es.eigenvalues();  // ascending
  if (es.info() != Eigen::Success || !(lam(0) > 1e-4 * lam(lam.size() - 1)))
    return svd_polar_factor(m, singular_values);
  CMatrix q = m * (es.eigenvectors() * lam.cwiseSqrt().cwiseInverse().asDiagonal() *
                   es.eigenvectors().adjoint());
  if (unitarity_error(q) > 1e-13) return svd_polar_factor(m, singular_values);
  if (singular_values) *singular_values = lam.cwiseSqrt().reverse();
  return q;
}

}  // namespace detail

/// Nearest unitary matrix in Frobenius norm: UV† for M = UΣV†.
/// Throws RankDeficient when any singular value is <= 1e-12.
inline UnitaryMatrix project_to_unitary(const CMatrix& m) {
  detail::check_square(m, "project_to_unitary");
  if (!m.allFinite()) throw InvalidInput("project_to_unitary: non-finite entries");
  Eigen::VectorXd sv;
  CMatrix q = detail::polar_factor_unchecked(m, &sv);
  if (sv.minCoeff() <= kRankThreshold)
    throw RankDeficient("project_to_unitary: smallest singular value " +
                        std::to_string(sv.minCoeff()) + " <= 1e-12");
  return UnitaryMatrix(std::move(q));
}

// Θ·skew(Θ†G), the orthogonal projection onto the tangent space at Θ.
inline CMatrix tangent_projection(const CMatrix& g, const CMatrix& theta) {
  return theta * skew(theta.adjoint() * g);
}

inline TangentDirection tangent_project(const CMatrix& g, const UnitaryMatrix& at) {
  if (g.rows() != at.dimension() || g.cols() != at.dimension())
    throw DimensionMismatch("tangent_project: G and Θ dimensions differ");
  return {tangent_projection(g, at.matrix()), at.matrix()};
}

/// Polar retraction: project_to_unitary(Θ + step·T). step == 0 returns Θ unchanged.
inline UnitaryMatrix retract(const UnitaryMatrix& at, const TangentDirection& dir, double step) {
  if (dir.entries.rows() != at.dimension() || dir.entries.cols() != at.dimension())
    throw DimensionMismatch("retract: direction and base point dimensions differ");
  if (!std::isfinite(step)) throw InvalidInput("retract: step must be finite");
  if (step == 0.0) return at;
  return project_to_unitary(at.matrix() + step * dir.entries);
}

// Haar-distributed unitary: QR of a CN(0,1) matrix with R-diagonal phases
// folded into Q.
inline UnitaryMatrix random_unitary(Index n, Rng& rng) {
  if (n < 1) throw InvalidInput("random_unitary: N must be >= 1");
  CMatrix z(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) z(i, j) = complex_normal(rng);
  Eigen::HouseholderQR<CMatrix> qr(z);
  CMatrix q = qr.householderQ() * CMatrix::Identity(n, n);
  const CMatrix& r = qr.matrixQR();
  for (Index j = 0; j < n; ++j) {
    const Complex d = r(j, j);
    const double a = std::abs(d);
    q.col(j) *= (a > 0.0 ? d / a : Complex(1.0, 0.0));
  }
  // Absorb the ~1e-16 loss of orthogonality from the Householder product.
  if (unitarity_error(q) > 1e-13) q = detail::polar_factor_unchecked(q);
  return UnitaryMatrix(std::move(q));
}

/// Keeps only the (possibly permuted) diagonal blocks of M and replaces each
/// block by its polar factor.
inline UnitaryMatrix block_project(const CMatrix& m, const BlockStructure& structure) {
  detail::check_square(m, "block_project");
  structure.check(m.rows());
  CMatrix out = CMatrix::Zero(m.rows(), m.cols());
  for (const auto& g : structure.groups()) {
    const CMatrix block = m(g, g);
    out(g, g) = project_to_unitary(block).matrix();
  }
  return UnitaryMatrix(std::move(out));
}

/// Optimization geometry of a block-unitary feasible set: per-block tangent
/// projection, per-block polar retraction and per-block Haar sampling.
/// One group of size N is the full unitary group; N singletons is the torus of
/// diagonal phase matrices.
class BlockUnitaryManifold {
 public:
  explicit BlockUnitaryManifold(BlockStructure structure)
      : structure_(std::move(structure)), groups_(structure_.groups()), n_(structure_.dimension()) {
    all_singletons_ = std::all_of(groups_.begin(), groups_.end(),
                                  [](const auto& g) { return g.size() == 1; });
  }

  Index dimension() const noexcept { return n_; }
  const BlockStructure& structure() const noexcept { return structure_; }

  CMatrix tangent(const CMatrix& g, const CMatrix& theta) const {
    if (groups_.size() == 1 && !structure_.permutation()) return tangent_projection(g, theta);
    CMatrix out = CMatrix::Zero(n_, n_);
    if (all_singletons_) {
      for (Index i = 0; i < n_; ++i) {
        const Complex t = theta(i, i);
        out(i, i) = t * Complex(0.0, (std::conj(t) * g(i, i)).imag());
      }
      return out;
    }
    for (const auto& grp : groups_) {
      const CMatrix tb = theta(grp, grp);
      out(grp, grp) = tangent_projection(CMatrix(g(grp, grp)), tb);
    }
    return out;
  }

  // Block-wise polar factor of Θ + step·T; rank deficiency cannot occur for
  // tangent T and finite step since Θ + step·T = Θ(I + step·Ω) with Ω skew.
  CMatrix retract(const CMatrix& theta, const CMatrix& dir, double step) const {
    if (step == 0.0) return theta;
    const CMatrix y = theta + step * dir;
    return project(y);
  }

  CMatrix project(const CMatrix& m) const {
    if (groups_.size() == 1 && !structure_.permutation())
      return detail::polar_factor_unchecked(m);
    CMatrix out = CMatrix::Zero(n_, n_);
    if (all_singletons_) {
      for (Index i = 0; i < n_; ++i) {
        const double a = std::abs(m(i, i));
        out(i, i) = a > 0.0 ? m(i, i) / a : Complex(1.0, 0.0);
      }
      return out;
    }
    for (const auto& grp : groups_) out(grp, grp) = detail::polar_factor_unchecked(m(grp, grp));
    return out;
  }

  CMatrix random_point(Rng& rng) const {
    CMatrix out = CMatrix::Zero(n_, n_);
    for (const auto& grp : groups_)
      out(grp, grp) = random_unitary(static_cast<Index>(grp.size()), rng).matrix();
    return out;
  }

  // Zeroes entries outside the diagonal blocks.
  CMatrix mask(const CMatrix& m) const {
    CMatrix out = CMatrix::Zero(n_, n_);
    for (const auto& grp : groups_) out(grp, grp) = m(grp, grp);
    return out;
  }

 private:
  BlockStructure structure_;
  std::vector<std::vector<Index>> groups_;
  Index n_;
  bool all_singletons_ = false;
};

}  // namespace manifold
}  // namespace bdris
