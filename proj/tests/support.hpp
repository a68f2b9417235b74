#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "bdris/channel.hpp"
#include "bdris/manifold.hpp"
#include "bdris/random.hpp"

namespace testing_support {

using bdris::CMatrix;
using bdris::Complex;
using bdris::CVector;
using bdris::Index;
using bdris::Rng;

// Gaussian matrices with an explicit generator, independent of the library's
// own CN(0,1) helper.
inline CMatrix gaussian(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = Complex(n(rng), n(rng)) / std::sqrt(2.0);
  return m;
}

inline CVector gaussian_vector(Index n, Rng& rng) { return gaussian(n, 1, rng).col(0); }

inline bdris::channel::ChannelRealization realization(Index n, Index m, Index l, Rng& rng) {
  bdris::channel::ChannelRealization r;
  r.direct = gaussian(m, l, rng);
  r.ris_device = gaussian(n, l, rng);
  r.bs_ris = gaussian(n, m, rng);
  return r;
}

inline double max_abs(const CMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

inline double unitarity(const CMatrix& u) {
  return max_abs(u.adjoint() * u - CMatrix::Identity(u.cols(), u.cols()));
}

}  // namespace testing_support
