#include "cldeepc/data_matrices.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cldeepc/errors.hpp"

namespace cldeepc {

namespace {

void require_range(std::size_t available, Index first, Index last, const char* what) {
  if (first < 0 || last >= static_cast<Index>(available)) {
    throw InsufficientDataError(std::string(what) + ": needs samples [" + std::to_string(first) +
                                ", " + std::to_string(last) + "] but only " +
                                std::to_string(available) + " are available");
  }
}

}  // namespace

BlockHankel block_hankel(std::span<const Vector> signal, Index k, int s, Index q) {
  if (s < 1 || q < 1) throw InvalidArgumentError("block_hankel: s and q must be positive");
  require_range(signal.size(), k, k + s + q - 2, "block_hankel");
  const int dim = static_cast<int>(signal[k].size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(q));
  Matrix m(static_cast<Index>(s) * dim, q);
  for (Index j = 0; j < q; ++j) {
    for (int i = 0; i < s; ++i) {
      const Vector& w = signal[k + j + i];
      if (w.size() != dim) throw DimensionError("block_hankel: samples differ in size");
      m.block(static_cast<Index>(i) * dim, j, dim, 1) = scale * w;
    }
  }
  return BlockHankel(k, s, q, dim, std::move(m));
}

PsiMatrix psi(std::span<const Vector> u, std::span<const Vector> y, Index k, int s, Index q,
              int p) {
  if (p < 1) throw InvalidArgumentError("psi: p must be positive");
  require_range(std::min(u.size(), y.size()), k, k + p + s + q - 2, "psi");
  const BlockHankel up = block_hankel(u, k, p, q);
  const BlockHankel uf = block_hankel(u, k + p, s, q);
  const BlockHankel yp = block_hankel(y, k, p, q);
  Matrix m(up.matrix().rows() + uf.matrix().rows() + yp.matrix().rows(), q);
  m << up.matrix(), uf.matrix(), yp.matrix();
  return PsiMatrix(k, p, s, q, up.dim(), yp.dim(), std::move(m));
}

Matrix block_toeplitz(const Matrix& acal, const Matrix& bcal, const Matrix& ccal,
                      const Matrix& dcal, int s) {
  if (s < 1) throw InvalidArgumentError("block_toeplitz: s must be positive");
  if (acal.rows() != acal.cols() || bcal.rows() != acal.rows() || ccal.cols() != acal.rows() ||
      dcal.rows() != ccal.rows() || dcal.cols() != bcal.cols()) {
    throw DimensionError("block_toeplitz: incompatible operand shapes");
  }
  const Index rb = dcal.rows(), cb = dcal.cols();
  // markov[m] = C A^{m-1} B for m >= 1, markov[0] = D.
  std::vector<Matrix> markov(s);
  markov[0] = dcal;
  Matrix cap = ccal;
  for (int m = 1; m < s; ++m) {
    markov[m] = cap * bcal;
    cap = cap * acal;
  }
  Matrix t = Matrix::Zero(rb * s, cb * s);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j <= i; ++j) t.block(i * rb, j * cb, rb, cb) = markov[i - j];
  return t;
}

Matrix extended_observability(const Matrix& acal, const Matrix& ccal, int s) {
  if (acal.rows() != acal.cols() || ccal.cols() != acal.rows())
    throw DimensionError("extended_observability: incompatible operand shapes");
  const Index l = ccal.rows();
  Matrix g(l * s, acal.cols());
  Matrix row = ccal;
  for (int i = 0; i < s; ++i) {
    g.middleRows(i * l, l) = row;
    row = row * acal;
  }
  return g;
}

Matrix extended_controllability(const Matrix& acal, const Matrix& bcal, int p) {
  if (acal.rows() != acal.cols() || bcal.rows() != acal.rows())
    throw DimensionError("extended_controllability: incompatible operand shapes");
  const Index r = bcal.cols();
  Matrix k(acal.rows(), r * p);
  Matrix col = bcal;
  for (int j = p - 1; j >= 0; --j) {
    k.middleCols(j * r, r) = col;
    col = acal * col;
  }
  return k;
}

ToeplitzSet toeplitz_set(const StateSpaceModel& model, int s, int p) {
  ToeplitzSet t;
  const Matrix eye_l = Matrix::Identity(model.outputs(), model.outputs());
  t.tu = block_toeplitz(model.a(), model.b(), model.c(), model.d(), s);
  t.tu_tilde = block_toeplitz(model.a_tilde(), model.b_tilde(), model.c(), model.d(), s);
  t.h = block_toeplitz(model.a(), model.k(), model.c(), eye_l, s);
  t.h_tilde = block_toeplitz(model.a_tilde(), model.k(), -model.c(), eye_l, s);
  t.gamma = extended_observability(model.a(), model.c(), s);
  t.gamma_tilde = extended_observability(model.a_tilde(), model.c(), s);
  t.ku_tilde = extended_controllability(model.a_tilde(), model.b_tilde(), p);
  t.ky_tilde = extended_controllability(model.a_tilde(), model.k(), p);
  t.l.resize(t.tu.rows(), t.ku_tilde.cols() + t.tu.cols() + t.ky_tilde.cols());
  t.l << t.gamma * t.ku_tilde, t.tu, t.gamma * t.ky_tilde;
  t.l_tilde.resize(t.l.rows(), t.l.cols());
  t.l_tilde << t.gamma_tilde * t.ku_tilde, t.tu_tilde, t.gamma_tilde * t.ky_tilde;
  return t;
}

bool pe_order_check(std::span<const Vector> signal, int s, Index n_cols, Index k,
                    double rank_scale) {
  const BlockHankel h = block_hankel(signal, k, s, n_cols);
  const Matrix& m = h.matrix();
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return false;
  const double tol = sv(0) * static_cast<double>(std::max(m.rows(), m.cols())) * rank_scale *
                     std::numeric_limits<double>::epsilon();
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  return rank == m.rows();
}

DataEquationResidual data_equation_residual(const StateSpaceModel& model, const SignalLog& log,
                                            Index k, int s, Index q, int p) {
  const PsiMatrix ps = psi(log.u(), log.y(), k, s, q, p);
  const Matrix yf = block_hankel(log.y(), k + p, s, q).matrix();
  const Matrix ef = block_hankel(log.e(), k + p, s, q).matrix();
  const Matrix x0 = block_hankel(log.x(), k, 1, q).matrix();
  const ToeplitzSet t = toeplitz_set(model, s, p);

  Matrix a_tilde_p = Matrix::Identity(model.states(), model.states());
  for (int i = 0; i < p; ++i) a_tilde_p = a_tilde_p * model.a_tilde();

  DataEquationResidual res;
  res.innovation = yf - t.l * ps.matrix() - t.h * ef - t.gamma * a_tilde_p * x0;
  const Matrix eye = Matrix::Identity(yf.rows(), yf.rows());
  res.predictor = yf - t.l_tilde * ps.matrix() - ef - (eye - t.h_tilde) * yf -
                  t.gamma_tilde * a_tilde_p * x0;
  return res;
}

}  // namespace cldeepc
