#include "cldeepc/predictors.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cldeepc/errors.hpp"

namespace cldeepc {

namespace {

std::string window_name(const IvDataset& data) {
  return "window starting at sample " + std::to_string(data.start()) + " (p=" +
         std::to_string(data.past()) + ", s=" + std::to_string(data.block()) +
         ", N=" + std::to_string(data.cols()) + ")";
}

[[noreturn]] void throw_ill_conditioned(const IvDataset& data, double condition) {
  throw IllConditionedError("correlation matrix Psi Z^T is singular or ill-conditioned "
                            "(condition " + std::to_string(condition) + ") for " +
                                window_name(data),
                            condition);
}

// Pseudo-inverse of a general matrix from its SVD, dropping singular values
// below tol * sigma_max.
Matrix pinv_from_svd(const Eigen::JacobiSVD<Matrix>& svd, double tol, Index* rank) {
  const Vector& sv = svd.singularValues();
  const double cut = sv.size() > 0 ? tol * sv(0) : 0.0;
  Vector inv = Vector::Zero(sv.size());
  Index kept = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cut && sv(i) > 0.0) {
      inv(i) = 1.0 / sv(i);
      ++kept;
    }
  }
  if (rank) *rank = kept;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

double condition_of(const Vector& singular_values_desc, Index expected) {
  if (singular_values_desc.size() < expected || expected == 0)
    return std::numeric_limits<double>::infinity();
  const double smin = singular_values_desc(expected - 1);
  if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
  return singular_values_desc(0) / smin;
}

// Pseudo-inverse of Sigma_psiz together with its condition number.
struct CorrelationInverse {
  Matrix pinv;
  double condition = 0.0;
  Index rank = 0;
};

CorrelationInverse invert_correlation(const IvDataset& data, const Matrix& sigma_psi_z,
                                      const FitOptions& options) {
  Eigen::JacobiSVD<Matrix> svd(sigma_psi_z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  CorrelationInverse out;
  out.condition = condition_of(svd.singularValues(), sigma_psi_z.rows());
  const bool ok = out.condition <= options.max_condition;
  if (!ok && !options.minimum_norm_fallback) throw_ill_conditioned(data, out.condition);
  out.pinv = pinv_from_svd(svd, ok ? 0.0 : options.rank_tolerance, &out.rank);
  return out;
}

void require_size(const Vector& v, Index n, const char* what) {
  if (v.size() != n) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(n) +
                         ", got " + std::to_string(v.size()));
  }
}

}  // namespace

IvDataset build_dataset(const SignalLog& log, Index end_index, Index nbar, int p, int s) {
  if (p < 1 || s < 1) throw InvalidArgumentError("build_dataset: p and s must be positive");
  if (nbar < p + s) {
    throw InsufficientDataError("build_dataset: window of " + std::to_string(nbar) +
                                " samples is shorter than p + s = " + std::to_string(p + s));
  }
  if (end_index > static_cast<Index>(log.size()) || end_index - nbar < 0) {
    throw InsufficientDataError("build_dataset: log does not cover samples [" +
                                std::to_string(end_index - nbar) + ", " +
                                std::to_string(end_index) + ")");
  }
  const Index i = end_index - nbar;
  const Index n_cols = nbar - p - s + 1;
  IvDataset data;
  data.psi = psi(log.u(), log.y(), i, s, n_cols, p);
  data.yf = block_hankel(log.y(), i + p, s, n_cols);
  data.z = data.psi.matrix();
  data.instruments_are_psi = true;
  return data;
}

IvDataset with_instruments(IvDataset data, Matrix z) {
  if (z.cols() != data.cols()) {
    throw DimensionError("with_instruments: Z must have " + std::to_string(data.cols()) +
                         " columns, got " + std::to_string(z.cols()));
  }
  data.z = std::move(z);
  data.instruments_are_psi = false;
  return data;
}

IvCorrelations iv_correlations(const IvDataset& data) {
  return {data.psi.matrix() * data.z.transpose(), data.yf.matrix() * data.z.transpose()};
}

IvRegression solve_iv_regression(const IvDataset& data, const FitOptions& options) {
  const Matrix& ps = data.psi.matrix();
  const Matrix& yf = data.yf.matrix();
  IvRegression out;

  if (!data.instruments_are_psi) {
    const IvCorrelations corr = iv_correlations(data);
    CorrelationInverse inv = invert_correlation(data, corr.sigma_psi_z, options);
    out.coefficients = corr.sigma_yz * inv.pinv;
    out.condition = inv.condition;
    out.rank = inv.rank;
    out.ill_conditioned = inv.condition > options.max_condition;
    return out;
  }

  // Z = Psi: Sigma_psiz is the symmetric Gram matrix Psi Psi^T.
  const Index m = ps.rows();
  Matrix gram = Matrix::Zero(m, m);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(ps);
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  const Matrix sigma_yz = yf * ps.transpose();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Vector& lambda = eig.eigenvalues();  // ascending
  const double lmax = lambda(m - 1);
  const double lmin = lambda(0);
  out.condition = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();

  if (out.condition <= options.max_condition) {
    const Matrix& v = eig.eigenvectors();
    out.coefficients = (sigma_yz * v) * lambda.cwiseInverse().asDiagonal() * v.transpose();
    out.rank = m;
    return out;
  }
  if (!options.minimum_norm_fallback) throw_ill_conditioned(data, out.condition);

  // Y Psi^+ from the SVD of Psi^T; avoids squaring the conditioning.
  out.ill_conditioned = true;
  Eigen::JacobiSVD<Matrix> svd(ps.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double cut = sv.size() > 0 ? options.rank_tolerance * sv(0) : 0.0;
  Vector inv = Vector::Zero(sv.size());
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cut && sv(i) > 0.0) {
      inv(i) = 1.0 / sv(i);
      ++out.rank;
    }
  }
  out.coefficients = (yf * svd.matrixU()) * inv.asDiagonal() * svd.matrixV().transpose();
  return out;
}

Matrix OneStepCoeffs::packed() const {
  Matrix row(outputs, (past + 1) * inputs + past * outputs);
  for (int j = 0; j <= past; ++j) row.middleCols(j * inputs, inputs) = beta[j];
  for (int j = 0; j < past; ++j)
    row.middleCols((past + 1) * inputs + j * outputs, outputs) = theta[j];
  return row;
}

OneStepCoeffs OneStepCoeffs::unpack(const Matrix& row, int p, int r, int l) {
  if (row.rows() != l || row.cols() != (p + 1) * r + p * l)
    throw DimensionError("OneStepCoeffs::unpack: coefficient row has the wrong shape");
  OneStepCoeffs c;
  c.past = p;
  c.inputs = r;
  c.outputs = l;
  c.beta.reserve(p + 1);
  c.theta.reserve(p);
  for (int j = 0; j <= p; ++j) c.beta.emplace_back(row.middleCols(j * r, r));
  for (int j = 0; j < p; ++j) c.theta.emplace_back(row.middleCols((p + 1) * r + j * l, l));
  return c;
}

OneStepCoeffs fit_one_step(const IvDataset& data, const FitOptions& options) {
  if (data.block() != 1) throw InvalidArgumentError("fit_one_step: dataset must have s = 1");
  if (data.z.rows() != data.psi.rows()) {
    throw DimensionError("fit_one_step: Psi Z^T must be square (n_z = " +
                         std::to_string(data.psi.rows()) + ")");
  }
  const IvRegression reg = solve_iv_regression(data, options);
  for (Index i = 0; i < reg.coefficients.size(); ++i) {
    if (!std::isfinite(reg.coefficients.data()[i]))
      throw_ill_conditioned(data, std::numeric_limits<double>::infinity());
  }
  return OneStepCoeffs::unpack(reg.coefficients, data.past(), data.inputs(), data.outputs());
}

PredictorTilde assemble_tilde(const OneStepCoeffs& coeffs, int f) {
  if (f < 1) throw InvalidArgumentError("assemble_tilde: f must be positive");
  const int p = coeffs.past, r = coeffs.inputs, l = coeffs.outputs;
  PredictorTilde t;
  t.past = p;
  t.horizon = f;
  t.inputs = r;
  t.outputs = l;
  t.lu = Matrix::Zero(f * l, p * r);
  t.gu = Matrix::Zero(f * l, f * r);
  t.ly = Matrix::Zero(f * l, p * l);
  t.gy = Matrix::Zero(f * l, f * l);
  for (int i = 0; i < f; ++i) {
    // beta_m sits at block column i + m - 1 of [u_past, u_future].
    for (int m = 1; m <= p + 1; ++m) {
      const int c = i + m - 1;
      if (c < p)
        t.lu.block(i * l, c * r, l, r) = coeffs.beta[m - 1];
      else
        t.gu.block(i * l, (c - p) * r, l, r) = coeffs.beta[m - 1];
    }
    for (int m = 1; m <= p; ++m) {
      const int c = i + m - 1;
      if (c < p)
        t.ly.block(i * l, c * l, l, l) = coeffs.theta[m - 1];
      else
        t.gy.block(i * l, (c - p) * l, l, l) = coeffs.theta[m - 1];
    }
  }
  return t;
}

PredictorMatrices solve_final(const PredictorTilde& tilde) {
  const int p = tilde.past, f = tilde.horizon, r = tilde.inputs, l = tilde.outputs;
  // Row block alpha_j over [Lu | first block column of Gu | Ly].
  const Index width = p * r + r + p * l;
  Matrix alpha(f * l, width);
  alpha << tilde.lu, tilde.gu.leftCols(r), tilde.ly;
  for (int j = 1; j < f; ++j) {
    for (int jp = std::max(0, j - p); jp < j; ++jp) {
      const auto theta = tilde.gy.block(j * l, jp * l, l, l);
      alpha.middleRows(j * l, l).noalias() += theta * alpha.middleRows(jp * l, l);
    }
  }
  PredictorMatrices out;
  out.past = p;
  out.horizon = f;
  out.inputs = r;
  out.outputs = l;
  out.lu = alpha.leftCols(p * r);
  out.ly = alpha.rightCols(p * l);
  out.gu = Matrix::Zero(f * l, f * r);
  const auto first = alpha.middleCols(p * r, r);
  for (int j = 0; j < f; ++j)
    for (int i = j; i < f; ++i) out.gu.block(i * l, j * r, l, r) = first.middleRows((i - j) * l, l);
  return out;
}

PredictorMatrices solve_final_dense(const PredictorTilde& tilde) {
  const Index fl = tilde.gy.rows();
  const Matrix lhs = Matrix::Identity(fl, fl) - tilde.gy;
  Matrix rhs(fl, tilde.lu.cols() + tilde.gu.cols() + tilde.ly.cols());
  rhs << tilde.lu, tilde.gu, tilde.ly;
  const Matrix sol = lhs.triangularView<Eigen::Lower>().solve(rhs);
  PredictorMatrices out;
  out.past = tilde.past;
  out.horizon = tilde.horizon;
  out.inputs = tilde.inputs;
  out.outputs = tilde.outputs;
  out.lu = sol.leftCols(tilde.lu.cols());
  out.gu = sol.middleCols(tilde.lu.cols(), tilde.gu.cols());
  out.ly = sol.rightCols(tilde.ly.cols());
  return out;
}

Vector predict(const PredictorMatrices& m, const Vector& u_past, const Vector& y_past,
               const Vector& u_future) {
  require_size(u_past, m.lu.cols(), "predict: u_past");
  require_size(y_past, m.ly.cols(), "predict: y_past");
  require_size(u_future, m.gu.cols(), "predict: u_future");
  return m.lu * u_past + m.ly * y_past + m.gu * u_future;
}

Vector unified_cl_deepc(const IvDataset& data, int q, const Vector& u_past,
                        const Vector& y_past, const Vector& u_future,
                        const FitOptions& options) {
  const int p = data.past(), s = data.block(), r = data.inputs(), l = data.outputs();
  if (q < 1) throw InvalidArgumentError("unified_cl_deepc: q must be positive");
  const int f = s * q;
  require_size(u_past, p * r, "unified_cl_deepc: u_past");
  require_size(y_past, p * l, "unified_cl_deepc: y_past");
  require_size(u_future, f * r, "unified_cl_deepc: u_future");
  if (data.z.rows() < data.psi.rows()) {
    throw IllConditionedError("unified_cl_deepc: Psi Z^T cannot have full row rank with n_z = " +
                                  std::to_string(data.z.rows()) + " instruments for " +
                                  window_name(data),
                              std::numeric_limits<double>::infinity());
  }

  const IvCorrelations corr = iv_correlations(data);
  const CorrelationInverse inv = invert_correlation(data, corr.sigma_psi_z, options);

  Vector u_all(static_cast<Index>(p + f) * r);
  u_all << u_past, u_future;
  Vector y_all = Vector::Zero(static_cast<Index>(p + f) * l);
  y_all.head(p * l) = y_past;

  Vector column(data.psi.rows());
  for (int j = 0; j < q; ++j) {
    const Index st = static_cast<Index>(j) * s;
    column << u_all.segment(st * r, p * r), u_all.segment((st + p) * r, s * r),
        y_all.segment(st * l, p * l);
    const Vector g_iv = inv.pinv * column;  // minimum-norm representative, W = 0
    y_all.segment((st + p) * l, s * l) = corr.sigma_yz * g_iv;
  }
  return y_all.tail(static_cast<Index>(f) * l);
}

PredictorMatrices deepc_iv_fit(const IvDataset& data, const FitOptions& options) {
  const int p = data.past(), f = data.block(), r = data.inputs(), l = data.outputs();
  const IvRegression reg = solve_iv_regression(data, options);
  PredictorMatrices out;
  out.past = p;
  out.horizon = f;
  out.inputs = r;
  out.outputs = l;
  out.lu = reg.coefficients.leftCols(p * r);
  out.gu = reg.coefficients.middleCols(p * r, f * r);
  out.ly = reg.coefficients.rightCols(p * l);
  return out;
}

Vector deepc_iv_predict(const IvDataset& data, const Vector& u_past, const Vector& y_past,
                        const Vector& u_future, const FitOptions& options) {
  if (data.z.rows() != data.psi.rows())
    throw DimensionError("deepc_iv_predict: Psi Z^T must be square");
  return predict(deepc_iv_fit(data, options), u_past, y_past, u_future);
}

OneStepCoeffs clspc_fit(const IvDataset& data, const FitOptions& options) {
  return fit_one_step(data, options);
}

PredictorMatrices clspc_assemble(const OneStepCoeffs& coeffs, int f) {
  if (f < 1) throw InvalidArgumentError("clspc_assemble: f must be positive");
  const int p = coeffs.past, r = coeffs.inputs, l = coeffs.outputs;
  // Markov parameters: C A~^m B~ = beta_{p-m}, C A~^m K = theta_{p-m}, D = beta_{p+1};
  // powers m >= p vanish.
  auto cab = [&](int m) -> Matrix {
    return m < p ? coeffs.beta[p - m - 1] : Matrix::Zero(l, r);
  };
  auto cak = [&](int m) -> Matrix {
    return m < p ? coeffs.theta[p - m - 1] : Matrix::Zero(l, l);
  };

  Matrix obs_ku(f * l, p * r), obs_ky(f * l, p * l);
  Matrix tu = Matrix::Zero(f * l, f * r);
  Matrix h = Matrix::Identity(f * l, f * l);
  for (int i = 0; i < f; ++i) {
    // Gamma~_f K~_p block (i, j) = C A~^{i + p - 1 - j} (B~ | K).
    for (int j = 0; j < p; ++j) {
      obs_ku.block(i * l, j * r, l, r) = cab(i + p - 1 - j);
      obs_ky.block(i * l, j * l, l, l) = cak(i + p - 1 - j);
    }
    tu.block(i * l, i * r, l, r) = coeffs.beta[p];
    for (int j = 0; j < i; ++j) {
      tu.block(i * l, j * r, l, r) = cab(i - j - 1);
      h.block(i * l, j * l, l, l) = -cak(i - j - 1);
    }
  }
  Matrix rhs(f * l, p * r + f * r + p * l);
  rhs << obs_ku, tu, obs_ky;
  const Matrix sol = h.partialPivLu().solve(rhs);

  PredictorMatrices out;
  out.past = p;
  out.horizon = f;
  out.inputs = r;
  out.outputs = l;
  out.lu = sol.leftCols(p * r);
  out.gu = sol.middleCols(p * r, f * r);
  out.ly = sol.rightCols(p * l);
  return out;
}

Vector min_norm_g(const IvDataset& data, const Vector& psi_bar_column, const FitOptions& options) {
  require_size(psi_bar_column, data.psi.rows(), "min_norm_g: psi_bar_column");
  const Matrix sigma = data.psi.matrix() * data.z.transpose();
  const CorrelationInverse inv = invert_correlation(data, sigma, options);
  return data.z.transpose() * (inv.pinv * psi_bar_column);
}

bool is_block_lower_triangular(const Matrix& m, Index block_rows, Index block_cols) {
  const Index nr = m.rows() / block_rows, nc = m.cols() / block_cols;
  for (Index i = 0; i < nr; ++i)
    for (Index j = i + 1; j < nc; ++j)
      if ((m.block(i * block_rows, j * block_cols, block_rows, block_cols).array() != 0.0).any())
        return false;
  return true;
}

bool is_block_toeplitz(const Matrix& m, Index block_rows, Index block_cols) {
  const Index nr = m.rows() / block_rows, nc = m.cols() / block_cols;
  for (Index i = 1; i < nr; ++i)
    for (Index j = 1; j < nc; ++j)
      if ((m.block(i * block_rows, j * block_cols, block_rows, block_cols).array() !=
           m.block((i - 1) * block_rows, (j - 1) * block_cols, block_rows, block_cols).array())
              .any())
        return false;
  return true;
}

}  // namespace cldeepc
