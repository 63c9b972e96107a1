#pragma once

#include <string>
#include <vector>

#include "cldeepc/data_matrices.hpp"

namespace cldeepc {

/// Regressors, targets and instruments from one sliding data window:
/// Psi_{i,s,N}, Y_{i+p,s,N} and the instrument matrix Z (n_z x N).
struct IvDataset {
  PsiMatrix psi;
  BlockHankel yf;
  Matrix z;
  /// Set while Z is Psi itself; enables the factorisation shortcuts.
  bool instruments_are_psi = true;

  Index start() const noexcept { return psi.start(); }
  int past() const noexcept { return psi.past(); }
  int block() const noexcept { return psi.block(); }
  Index cols() const noexcept { return psi.cols(); }
  int inputs() const noexcept { return psi.inputs(); }
  int outputs() const noexcept { return psi.outputs(); }
};

/// Dataset over the `nbar` samples [end_index - nbar, end_index) of `log`,
/// with N = nbar - p - s + 1 columns and Z = Psi.
IvDataset build_dataset(const SignalLog& log, Index end_index, Index nbar, int p, int s);

/// Replaces the instruments; Z must have N columns.
IvDataset with_instruments(IvDataset data, Matrix z);

struct IvCorrelations {
  Matrix sigma_psi_z;  ///< Psi Z^T
  Matrix sigma_yz;     ///< Y_f Z^T
};

IvCorrelations iv_correlations(const IvDataset& data);

struct FitOptions {
  /// Largest accepted condition number of Psi Z^T.
  double max_condition = 1e12;
  /// Above max_condition: return the minimum-norm (pseudo-inverse) solution
  /// instead of throwing.
  bool minimum_norm_fallback = false;
  /// Relative singular value cut-off used by the minimum-norm solution.
  double rank_tolerance = 1e-10;
};

/// M = Sigma_yz Sigma_psiz^{-1} (or the pseudo-inverse when ill-conditioned
/// and the fallback is enabled).
struct IvRegression {
  Matrix coefficients;
  double condition = 0.0;
  Index rank = 0;
  bool ill_conditioned = false;
};

IvRegression solve_iv_regression(const IvDataset& data, const FitOptions& options = {});

/// One-step predictor Markov blocks. beta has p + 1 entries (l x r), theta
/// has p entries (l x l), both ordered past to present.
struct OneStepCoeffs {
  int past = 0;
  int inputs = 0;
  int outputs = 0;
  std::vector<Matrix> beta;
  std::vector<Matrix> theta;

  /// [beta_1 .. beta_{p+1}, theta_1 .. theta_p] as one l x ((p+1)r + pl) row.
  Matrix packed() const;
  static OneStepCoeffs unpack(const Matrix& row, int p, int r, int l);
};

/// Requires s = 1 and a square Sigma_psiz.
OneStepCoeffs fit_one_step(const IvDataset& data, const FitOptions& options = {});

/// Banded block-Toeplitz matrices of the sequentially applied one-step
/// predictor:
///   y_hat = [Lu~ Gu~][u_past; u_future] + [Ly~ Gy~][y_past; y_hat].
struct PredictorTilde {
  int past = 0, horizon = 0, inputs = 0, outputs = 0;
  Matrix lu;  ///< fl x pr
  Matrix gu;  ///< fl x fr
  Matrix ly;  ///< fl x pl
  Matrix gy;  ///< fl x fl, strictly block-lower-triangular
};

PredictorTilde assemble_tilde(const OneStepCoeffs& coeffs, int f);

/// y_hat = Lu u_past + Ly y_past + Gu u_future.
struct PredictorMatrices {
  int past = 0, horizon = 0, inputs = 0, outputs = 0;
  Matrix lu;  ///< fl x pr
  Matrix gu;  ///< fl x fr
  Matrix ly;  ///< fl x pl
};

/// Forward recursion over row blocks of (I - Gy~)^{-1}[Lu~ Gu~ Ly~]. Only
/// the first block column of Gu is propagated; the rest is copied along the
/// block diagonals.
PredictorMatrices solve_final(const PredictorTilde& tilde);

/// Same quantity as solve_final by a dense triangular solve. Reference route.
PredictorMatrices solve_final_dense(const PredictorTilde& tilde);

Vector predict(const PredictorMatrices& m, const Vector& u_past, const Vector& y_past,
               const Vector& u_future);

/// CL-DeePC with block length s = data.block() applied q times (f = s q).
/// Each block is produced from [Psi_bar; Y_hat] = [Psi; Y_f] Z^T G with the
/// minimum-norm G, and feeds its predicted outputs into the next block's past.
Vector unified_cl_deepc(const IvDataset& data, int q, const Vector& u_past,
                        const Vector& y_past, const Vector& u_future,
                        const FitOptions& options = {});

/// DeePC with instruments (s = f, one application): the full-horizon IV
/// regression split into [Lu Gu Ly]. Gu is not constrained to be causal.
PredictorMatrices deepc_iv_fit(const IvDataset& data, const FitOptions& options = {});

Vector deepc_iv_predict(const IvDataset& data, const Vector& u_past, const Vector& y_past,
                        const Vector& u_future, const FitOptions& options = {});

/// CL-SPC: the same one-step regression as fit_one_step.
OneStepCoeffs clspc_fit(const IvDataset& data, const FitOptions& options = {});

/// CL-SPC horizon predictor: builds the Markov-parameter estimates of
/// Gamma~ K~u, T~u, Gamma~ K~y and H~ (assuming A~^p = 0) and converts them
/// with H~^{-1}.
PredictorMatrices clspc_assemble(const OneStepCoeffs& coeffs, int f);

/// Minimum-norm g with Psi g = psi_bar (Z = Psi): g = Z^T Sigma_psiz^{-1} psi_bar.
Vector min_norm_g(const IvDataset& data, const Vector& psi_bar_column,
                  const FitOptions& options = {});

/// Exact structural checks on a block-partitioned matrix.
bool is_block_lower_triangular(const Matrix& m, Index block_rows, Index block_cols);
bool is_block_toeplitz(const Matrix& m, Index block_rows, Index block_cols);

// Serialisation for downstream analysis tooling.
std::string to_json(const OneStepCoeffs& coeffs);
std::string to_json(const PredictorMatrices& m);
OneStepCoeffs one_step_coeffs_from_json(const std::string& text);
PredictorMatrices predictor_matrices_from_json(const std::string& text);
void write_matrix_csv(std::ostream& os, const Matrix& m);
/// Rows "kind,index,row,col,value" with kind beta or theta.
void write_coeffs_csv(std::ostream& os, const OneStepCoeffs& coeffs);

}  // namespace cldeepc
