#pragma once

#include <cmath>
#include <limits>

#include "cldeepc/lti_plant.hpp"

namespace cldeepc::testing {

/// Exhaustive oracle for min 1/2 x^T H x + g^T x s.t. lo <= x <= hi: every
/// pattern of (free, at lower, at upper) is solved as an equality-
/// constrained problem; the best feasible candidate wins. 3^n patterns.
inline double box_qp_bruteforce(const Matrix& h, const Vector& g, const Vector& lo, const Vector& hi,
                                Vector* best_x = nullptr) {
  const Index n = h.rows();
  Index patterns = 1;
  for (Index i = 0; i < n; ++i) patterns *= 3;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> state(static_cast<std::size_t>(n));
  std::vector<Index> free_idx;
  free_idx.reserve(static_cast<std::size_t>(n));
  Vector x(n);
  for (Index code = 0; code < patterns; ++code) {
    Index c = code;
    free_idx.clear();
    for (Index i = 0; i < n; ++i) {
      state[static_cast<std::size_t>(i)] = static_cast<int>(c % 3);
      c /= 3;
      if (state[static_cast<std::size_t>(i)] == 0) free_idx.push_back(i);
      else x(i) = state[static_cast<std::size_t>(i)] == 1 ? lo(i) : hi(i);
    }
    const Index nf = static_cast<Index>(free_idx.size());
    if (nf > 0) {
      Matrix hff(nf, nf);
      Vector rhs(nf);
      for (Index a = 0; a < nf; ++a) {
        rhs(a) = -g(free_idx[a]);
        for (Index i = 0; i < n; ++i)
          if (state[static_cast<std::size_t>(i)] != 0) rhs(a) -= h(free_idx[a], i) * x(i);
        for (Index b = 0; b < nf; ++b) hff(a, b) = h(free_idx[a], free_idx[b]);
      }
      const Vector xf = hff.llt().solve(rhs);
      bool feasible = true;
      for (Index a = 0; a < nf; ++a) {
        const Index i = free_idx[a];
        x(i) = xf(a);
        if (x(i) < lo(i) - 1e-12 || x(i) > hi(i) + 1e-12) feasible = false;
      }
      if (!feasible) continue;
    }
    const double obj = 0.5 * x.dot(h * x) + g.dot(x);
    if (obj < best) {
      best = obj;
      if (best_x) *best_x = x;
    }
  }
  return best;
}

}  // namespace cldeepc::testing
