#include "cldeepc/lti_plant.hpp"

#include <cmath>
#include <string>

#include "cldeepc/errors.hpp"

namespace cldeepc {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

double spectral_radius(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("spectral_radius: matrix is " + shape(m));
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

StateSpaceModel::StateSpaceModel(Matrix a, Matrix b, Matrix c, Matrix d, Matrix k,
                                 double stability_tolerance)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), d_(std::move(d)), k_(std::move(k)) {
  const Index n = a_.rows();
  require(a_.cols() == n, "A must be square, got " + shape(a_));
  require(b_.rows() == n, "B rows must equal n, got " + shape(b_));
  require(c_.cols() == n, "C cols must equal n, got " + shape(c_));
  require(d_.rows() == c_.rows() && d_.cols() == b_.cols(),
          "D must be l x r, got " + shape(d_));
  require(k_.rows() == n && k_.cols() == c_.rows(), "K must be n x l, got " + shape(k_));

  a_tilde_ = a_ - k_ * c_;
  b_tilde_ = b_ - k_ * d_;
  rho_tilde_ = spectral_radius(a_tilde_);
  if (!(rho_tilde_ < 1.0 - stability_tolerance)) {
    throw InvalidArgumentError("predictor matrix A - KC is not stable: rho = " +
                               std::to_string(rho_tilde_));
  }
}

InnovationStep step_innovation(const StateSpaceModel& model, const Vector& x,
                               const Vector& u, const Vector& e) {
  require(x.size() == model.states() && u.size() == model.inputs() &&
              e.size() == model.outputs(),
          "step_innovation: vector sizes do not match the model");
  return {model.a() * x + model.b() * u + model.k() * e,
          model.c() * x + model.d() * u + e};
}

Vector step_predictor(const StateSpaceModel& model, const Vector& x, const Vector& u,
                      const Vector& y) {
  require(x.size() == model.states() && u.size() == model.inputs() &&
              y.size() == model.outputs(),
          "step_predictor: vector sizes do not match the model");
  return model.a_tilde() * x + model.b_tilde() * u + model.k() * y;
}

StateSpaceModel benchmark_system() {
  Matrix a = Matrix::Zero(5, 5);
  a.col(0) << 4.40, -8.09, 7.83, -4.00, 0.86;
  a.topRightCorner(4, 4).setIdentity();
  Matrix b(5, 1);
  b << 0.00098, 0.01299, 0.01859, 0.0033, -0.00002;
  Matrix c = Matrix::Zero(1, 5);
  c(0, 0) = 1.0;
  Matrix d = Matrix::Zero(1, 1);
  Matrix k(5, 1);
  k << 2.3, -6.64, 7.515, -4.0146, 0.86336;
  return StateSpaceModel(std::move(a), std::move(b), std::move(c), std::move(d), std::move(k));
}

NoiseProcess::NoiseProcess(std::uint64_t seed, Matrix variance)
    : seed_(seed), variance_(std::move(variance)), engine_(seed) {
  if (variance_.rows() != variance_.cols() || variance_.rows() == 0) {
    throw DimensionError("noise variance must be a nonempty square matrix");
  }
  if (!variance_.isApprox(variance_.transpose())) {
    throw InvalidArgumentError("noise variance must be symmetric");
  }
  // Symmetric square root; tolerates singular (including zero) covariances.
  Eigen::SelfAdjointEigenSolver<Matrix> eig(variance_);
  const Vector& lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  if (lambda.minCoeff() < -1e-12 * scale) {
    throw InvalidArgumentError("noise variance must be positive semi-definite");
  }
  factor_ = eig.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal() *
            eig.eigenvectors().transpose();
}

NoiseProcess::NoiseProcess(std::uint64_t seed, double variance, int dim)
    : NoiseProcess(seed, Matrix::Identity(dim, dim) * variance) {}

Vector NoiseProcess::draw() {
  Vector z(variance_.rows());
  for (Index i = 0; i < z.size(); ++i) z(i) = normal_(engine_);
  return factor_ * z;
}

void SignalLog::append(const Vector& x, const Vector& u, const Vector& y, const Vector& e,
                       const Vector& r) {
  if (empty() && n_ == 0 && r_ == 0 && l_ == 0) {
    n_ = static_cast<int>(x.size());
    r_ = static_cast<int>(u.size());
    l_ = static_cast<int>(y.size());
  }
  require(x.size() == n_ && u.size() == r_ && y.size() == l_ && e.size() == l_ &&
              r.size() == l_,
          "SignalLog::append: sample sizes do not match the log");
  x_.push_back(x);
  u_.push_back(u);
  y_.push_back(y);
  e_.push_back(e);
  ref_.push_back(r);
}

void SignalLog::reserve(std::size_t steps) {
  x_.reserve(steps);
  u_.reserve(steps);
  y_.reserve(steps);
  e_.reserve(steps);
  ref_.reserve(steps);
}

Simulator::Simulator(StateSpaceModel model, NoiseProcess noise, Vector x0)
    : model_(std::move(model)),
      noise_(std::move(noise)),
      x_(std::move(x0)),
      log_(model_.states(), model_.inputs(), model_.outputs()) {
  require(x_.size() == model_.states(), "Simulator: x0 has the wrong size");
  require(noise_.dim() == model_.outputs(), "Simulator: noise dimension must equal l");
}

Vector Simulator::advance(const Vector& u, const Vector& r) {
  const Vector e = noise_.draw();
  InnovationStep step = step_innovation(model_, x_, u, e);
  log_.append(x_, u, step.y, e, r);
  x_ = std::move(step.x_next);
  return step.y;
}

SignalLog simulate_open_loop(const StateSpaceModel& model, std::span<const Vector> u_seq,
                             NoiseProcess noise, const Vector& x0) {
  if (u_seq.empty()) throw InvalidArgumentError("simulate_open_loop: empty input sequence");
  Simulator sim(model, std::move(noise), x0);
  const Vector r = Vector::Zero(model.outputs());
  for (const Vector& u : u_seq) sim.advance(u, r);
  return std::move(sim).take_log();
}

Vector ControlContext::reference_preview(int horizon) const {
  if (reference.empty()) throw InsufficientDataError("reference sequence is empty");
  const Index l = reference.front().size();
  Vector out(horizon * l);
  for (int j = 0; j < horizon; ++j) {
    const std::size_t idx = std::min<std::size_t>(j, reference.size() - 1);
    out.segment(j * l, l) = reference[idx];
  }
  return out;
}

void run_closed_loop(Simulator& sim, const ControlLaw& controller,
                     std::span<const Vector> reference, Index steps) {
  if (static_cast<Index>(reference.size()) < steps) {
    throw InsufficientDataError("run_closed_loop: reference shorter than steps");
  }
  for (Index j = 0; j < steps; ++j) {
    const Index k = static_cast<Index>(sim.log().size());
    Vector u;
    try {
      ControlContext ctx{k, sim.log(), reference.subspan(j), sim.state()};
      u = controller(ctx);
    } catch (const ControllerError&) {
      throw;
    } catch (const std::exception& ex) {
      throw ControllerError("controller failed at step " + std::to_string(k) + ": " + ex.what(),
                            static_cast<long>(k));
    }
    sim.advance(u, reference[j]);
  }
}

SignalLog run_closed_loop(const StateSpaceModel& model, const ControlLaw& controller,
                          std::span<const Vector> reference, Index steps, NoiseProcess noise,
                          const Vector& x0) {
  Simulator sim(model, std::move(noise), x0);
  run_closed_loop(sim, controller, reference, steps);
  return std::move(sim).take_log();
}

}  // namespace cldeepc
