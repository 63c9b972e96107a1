#pragma once

#include <span>

#include "cldeepc/lti_plant.hpp"

namespace cldeepc {

/// Scaled block-Hankel matrix W_{k,s,q}: column j stacks samples
/// w_{k+j}..w_{k+j+s-1}, and every entry carries the factor 1/sqrt(q).
class BlockHankel {
 public:
  BlockHankel() = default;
  BlockHankel(Index start, int block_rows, Index cols, int dim, Matrix payload)
      : start_(start), block_rows_(block_rows), cols_(cols), dim_(dim),
        payload_(std::move(payload)) {}

  Index start() const noexcept { return start_; }
  int block_rows() const noexcept { return block_rows_; }
  Index cols() const noexcept { return cols_; }
  int dim() const noexcept { return dim_; }
  const Matrix& matrix() const noexcept { return payload_; }

 private:
  Index start_ = 0;
  int block_rows_ = 0;
  Index cols_ = 0;
  int dim_ = 0;
  Matrix payload_;
};

/// Requires signal to cover [k, k + s + q - 2].
BlockHankel block_hankel(std::span<const Vector> signal, Index k, int s, Index q);

/// Psi_{k,s,q} = [U_{k,p,q}; U_{k+p,s,q}; Y_{k,p,q}].
class PsiMatrix {
 public:
  PsiMatrix() = default;
  PsiMatrix(Index start, int past, int block, Index cols, int inputs, int outputs,
            Matrix payload)
      : start_(start), past_(past), block_(block), cols_(cols), r_(inputs), l_(outputs),
        payload_(std::move(payload)) {}

  Index start() const noexcept { return start_; }
  int past() const noexcept { return past_; }
  int block() const noexcept { return block_; }
  Index cols() const noexcept { return cols_; }
  int inputs() const noexcept { return r_; }
  int outputs() const noexcept { return l_; }
  Index rows() const noexcept { return payload_.rows(); }

  const Matrix& matrix() const noexcept { return payload_; }
  auto past_inputs() const { return payload_.topRows(past_ * r_); }
  auto future_inputs() const { return payload_.middleRows(past_ * r_, block_ * r_); }
  auto past_outputs() const { return payload_.bottomRows(past_ * l_); }

 private:
  Index start_ = 0;
  int past_ = 0, block_ = 0;
  Index cols_ = 0;
  int r_ = 0, l_ = 0;
  Matrix payload_;
};

/// Requires the logs to cover [k, k + p + s + q - 2].
PsiMatrix psi(std::span<const Vector> u, std::span<const Vector> y, Index k, int s, Index q,
              int p);

/// Lower block-triangular Toeplitz operator with Dcal on the diagonal and
/// Ccal Acal^{i-j-1} Bcal below it.
Matrix block_toeplitz(const Matrix& acal, const Matrix& bcal, const Matrix& ccal,
                      const Matrix& dcal, int s);

/// [C; C A; ...; C A^{s-1}].
Matrix extended_observability(const Matrix& acal, const Matrix& ccal, int s);

/// [A^{p-1} B, ..., A B, B] (reversed order).
Matrix extended_controllability(const Matrix& acal, const Matrix& bcal, int p);

/// Structured operators of a model for future length s and past length p.
struct ToeplitzSet {
  Matrix tu;        ///< T_s(A, B, C, D)
  Matrix tu_tilde;  ///< T_s(A~, B~, C, D)
  Matrix h;         ///< T_s(A, K, C, I)
  Matrix h_tilde;   ///< T_s(A~, K, -C, I)
  Matrix gamma;
  Matrix gamma_tilde;
  Matrix ku_tilde;  ///< reversed controllability of (A~, B~)
  Matrix ky_tilde;  ///< reversed controllability of (A~, K)
  Matrix l;         ///< [Gamma K~u, T^u, Gamma K~y]
  Matrix l_tilde;   ///< [Gamma~ K~u, T~^u, Gamma~ K~y]
};

ToeplitzSet toeplitz_set(const StateSpaceModel& model, int s, int p);

/// True iff the (s*dim) x N block-Hankel matrix of `signal` starting at k has
/// full row rank. Singular values below
/// sigma_max * max(rows, cols) * rank_scale * eps count as zero.
bool pe_order_check(std::span<const Vector> signal, int s, Index n_cols, Index k = 0,
                    double rank_scale = 1.0);

struct DataEquationResidual {
  Matrix innovation;  ///< Y - L Psi - H E - Gamma A~^p X
  Matrix predictor;   ///< Y - L~ Psi - E - (I - H~) Y - Gamma~ A~^p X
};

/// Evaluates both data equations with the true model on a simulated log that
/// carries states and innovations.
DataEquationResidual data_equation_residual(const StateSpaceModel& model, const SignalLog& log,
                                            Index k, int s, Index q, int p);

}  // namespace cldeepc
