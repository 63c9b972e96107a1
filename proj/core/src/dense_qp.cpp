#include "cldeepc/dense_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cldeepc/errors.hpp"

namespace cldeepc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Working state of the dual method. J = L^{-T} Q, where H = L L^T and the
// first q columns of J span the (transformed) active constraint normals;
// R is the q x q upper-triangular factor of those normals.
class GoldfarbIdnani {
 public:
  GoldfarbIdnani(const Matrix& l_factor, Index n) : j_(Matrix::Identity(n, n)), r_(Matrix::Zero(n, n)), n_(n) {
    l_factor.triangularView<Eigen::Lower>().transpose().solveInPlace(j_);
  }

  const Matrix& j() const { return j_; }
  Index q() const { return q_; }

  // Primal direction z and dual direction rvec for a constraint normal np.
  void directions(const Vector& np, Vector& d, Vector& z, Vector& rvec) const {
    d.noalias() = j_.transpose() * np;
    z.noalias() = j_.rightCols(n_ - q_) * d.tail(n_ - q_);
    rvec = r_.topLeftCorner(q_, q_).triangularView<Eigen::Upper>().solve(d.head(q_));
  }

  // Appends a constraint whose transformed normal is d. Returns false when
  // it is numerically dependent on the active set.
  bool add(Vector d) {
    for (Index jj = n_ - 1; jj > q_; --jj) {
      double cc = d(jj - 1), ss = d(jj);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      d(jj) = 0.0;
      cc /= h;
      ss /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d(jj - 1) = -h;
      } else {
        d(jj - 1) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (Index k = 0; k < n_; ++k) {
        const double t1 = j_(k, jj - 1), t2 = j_(k, jj);
        j_(k, jj - 1) = t1 * cc + t2 * ss;
        j_(k, jj) = xny * (t1 + j_(k, jj - 1)) - t2;
      }
    }
    r_.col(q_).head(q_ + 1) = d.head(q_ + 1);
    const double scale = std::max(1.0, r_.topLeftCorner(q_ + 1, q_ + 1).cwiseAbs().maxCoeff());
    if (std::abs(d(q_)) <= std::numeric_limits<double>::epsilon() * scale) return false;
    ++q_;
    return true;
  }

  // Removes active constraint at position pos (0-based) and restores the
  // triangular structure of R with Givens rotations.
  void remove(Index pos) {
    for (Index c = pos; c < q_ - 1; ++c) r_.col(c) = r_.col(c + 1);
    r_.col(q_ - 1).setZero();
    --q_;
    for (Index jj = pos; jj < q_; ++jj) {
      double cc = r_(jj, jj), ss = r_(jj + 1, jj);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      cc /= h;
      ss /= h;
      r_(jj + 1, jj) = 0.0;
      if (cc < 0.0) {
        r_(jj, jj) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        r_(jj, jj) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (Index k = jj + 1; k < q_; ++k) {
        const double t1 = r_(jj, k), t2 = r_(jj + 1, k);
        r_(jj, k) = t1 * cc + t2 * ss;
        r_(jj + 1, k) = xny * (t1 + r_(jj, k)) - t2;
      }
      for (Index k = 0; k < n_; ++k) {
        const double t1 = j_(k, jj), t2 = j_(k, jj + 1);
        j_(k, jj) = t1 * cc + t2 * ss;
        j_(k, jj + 1) = xny * (j_(k, jj) + t1) - t2;
      }
    }
  }

 private:
  Matrix j_;
  Matrix r_;
  Index n_;
  Index q_ = 0;
};

Matrix cholesky_factor(const Matrix& h) {
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const double shift = 1e-10 * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
  Eigen::LLT<Matrix> shifted(h + shift * Matrix::Identity(h.rows(), h.cols()));
  if (shifted.info() != Eigen::Success)
    throw SolverError("solve_dense_qp: Hessian is not positive definite");
  return shifted.matrixL();
}

}  // namespace

DenseQpResult solve_dense_qp(const Matrix& h, const Vector& g, const Matrix& a, const Vector& b,
                             const DenseQpOptions& options) {
  const Index n = h.rows();
  const Index m = a.rows();
  if (h.cols() != n || g.size() != n || (m > 0 && a.cols() != n) || b.size() != m)
    throw DimensionError("solve_dense_qp: inconsistent problem dimensions");

  const Matrix l_factor = cholesky_factor(h);
  GoldfarbIdnani state(l_factor, n);

  DenseQpResult out;
  // Unconstrained minimiser x = -H^{-1} g.
  out.x = -(state.j() * (state.j().transpose() * g));
  Vector mult_active;  // multipliers of the active set, in order
  std::vector<Index> active;
  std::vector<char> is_active(static_cast<std::size_t>(m), 0);

  const int max_iter =
      options.max_iterations > 0 ? options.max_iterations : static_cast<int>(10 * (n + m) + 50);

  // Slack of row i in "c(x) >= 0" form: b_i - a_i x.
  auto slack = [&](Index i) { return b(i) - a.row(i).dot(out.x); };
  auto row_tol = [&](Index i) { return options.tolerance * std::max(1.0, std::abs(b(i))); };

  Vector d(n), z(n), rvec;
  while (true) {
    // Step 1: most violated inactive constraint (relative to its tolerance).
    Index p = -1;
    double worst = 0.0;
    for (Index i = 0; i < m; ++i) {
      if (is_active[i]) continue;
      const double s = slack(i);
      if (s < -row_tol(i)) {
        const double score = s / std::max(1.0, a.row(i).norm());
        if (p < 0 || score < worst) {
          worst = score;
          p = i;
        }
      }
    }
    if (p < 0) break;

    Vector u_plus(mult_active.size() + 1);
    u_plus << mult_active, 0.0;
    const Vector np = -a.row(p).transpose();

    // Step 2: move until constraint p is satisfied (added) or a blocking
    // active constraint must be dropped.
    while (true) {
      if (++out.iterations > max_iter) {
        throw SolverError("solve_dense_qp: iteration limit " + std::to_string(max_iter) +
                          " reached with " + std::to_string(active.size()) +
                          " active constraints; constraint " + std::to_string(p) +
                          " still violated by " + std::to_string(-slack(p)));
      }
      const Index q = state.q();
      state.directions(np, d, z, rvec);

      double t1 = kInf;
      Index drop = -1;
      for (Index k = 0; k < q; ++k) {
        if (rvec(k) > 0.0) {
          const double ratio = u_plus(k) / rvec(k);
          if (ratio < t1) {
            t1 = ratio;
            drop = k;
          }
        }
      }
      const double ztn = z.dot(np);
      const double dnorm2 = d.squaredNorm();
      const double t2 = (ztn > 1e-20 * dnorm2 && ztn > 0.0) ? -slack(p) / ztn : kInf;
      const double t = std::min(t1, t2);

      if (t == kInf) {
        out.status = DenseQpStatus::kInfeasible;
        out.multipliers = Vector::Zero(m);
        out.active_set = active;
        out.objective = 0.5 * out.x.dot(h * out.x) + g.dot(out.x);
        return out;
      }

      if (t2 == kInf) {
        // Dual-only step, then drop the blocking constraint.
        u_plus.head(q) -= t * rvec;
        u_plus(q) += t;
        is_active[active[drop]] = 0;
        active.erase(active.begin() + drop);
        Vector shrunk(u_plus.size() - 1);
        shrunk << u_plus.head(drop), u_plus.tail(u_plus.size() - drop - 1);
        u_plus = std::move(shrunk);
        state.remove(drop);
        continue;
      }

      out.x += t * z;
      u_plus.head(q) -= t * rvec;
      u_plus(q) += t;

      if (t == t2) {
        if (!state.add(d)) {
          out.status = DenseQpStatus::kInfeasible;
          out.multipliers = Vector::Zero(m);
          out.active_set = active;
          out.objective = 0.5 * out.x.dot(h * out.x) + g.dot(out.x);
          return out;
        }
        active.push_back(p);
        is_active[p] = 1;
        mult_active = u_plus;
        break;
      }

      // Partial step: drop the blocking constraint and retry p.
      is_active[active[drop]] = 0;
      active.erase(active.begin() + drop);
      Vector shrunk(u_plus.size() - 1);
      shrunk << u_plus.head(drop), u_plus.tail(u_plus.size() - drop - 1);
      u_plus = std::move(shrunk);
      state.remove(drop);
    }
  }

  out.status = DenseQpStatus::kOptimal;
  out.multipliers = Vector::Zero(m);
  for (std::size_t k = 0; k < active.size(); ++k) out.multipliers(active[k]) = mult_active(k);
  out.active_set = active;
  out.objective = 0.5 * out.x.dot(h * out.x) + g.dot(out.x);
  return out;
}

double KktResiduals::max() const {
  return std::max({stationarity, primal, dual, complementarity});
}

KktResiduals kkt_residuals(const Matrix& h, const Vector& g, const Matrix& a, const Vector& b,
                           const Vector& x, const Vector& multipliers) {
  KktResiduals res;
  Vector grad = h * x + g;
  if (a.rows() > 0) grad += a.transpose() * multipliers;
  res.stationarity = grad.cwiseAbs().maxCoeff();
  if (a.rows() > 0) {
    const Vector slack = b - a * x;
    res.primal = std::max(0.0, -slack.minCoeff());
    res.dual = std::max(0.0, -multipliers.minCoeff());
    res.complementarity = multipliers.cwiseProduct(slack).cwiseAbs().maxCoeff();
  }
  return res;
}

}  // namespace cldeepc
