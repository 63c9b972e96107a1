#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace cldeepc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Largest eigenvalue magnitude of a square matrix.
double spectral_radius(const Matrix& m);

/// Discrete LTI system in innovation form
///
///   x_{k+1} = A x_k + B u_k + K e_k
///   y_k     = C x_k + D u_k + e_k
///
/// together with the predictor-form matrices A~ = A - K C and B~ = B - K D.
/// Construction rejects inconsistent shapes and any model whose predictor
/// matrix A~ is not asymptotically stable.
class StateSpaceModel {
 public:
  StateSpaceModel(Matrix a, Matrix b, Matrix c, Matrix d, Matrix k,
                  double stability_tolerance = 1e-9);

  const Matrix& a() const noexcept { return a_; }
  const Matrix& b() const noexcept { return b_; }
  const Matrix& c() const noexcept { return c_; }
  const Matrix& d() const noexcept { return d_; }
  const Matrix& k() const noexcept { return k_; }
  const Matrix& a_tilde() const noexcept { return a_tilde_; }
  const Matrix& b_tilde() const noexcept { return b_tilde_; }

  int states() const noexcept { return static_cast<int>(a_.rows()); }
  int inputs() const noexcept { return static_cast<int>(b_.cols()); }
  int outputs() const noexcept { return static_cast<int>(c_.rows()); }

  /// rho(A~); always below one for a constructed model.
  double predictor_spectral_radius() const noexcept { return rho_tilde_; }

 private:
  Matrix a_, b_, c_, d_, k_;
  Matrix a_tilde_, b_tilde_;
  double rho_tilde_ = 0.0;
};

struct InnovationStep {
  Vector x_next;
  Vector y;
};

InnovationStep step_innovation(const StateSpaceModel& model, const Vector& x,
                               const Vector& u, const Vector& e);

Vector step_predictor(const StateSpaceModel& model, const Vector& x,
                      const Vector& u, const Vector& y);

/// The fifth-order two-plate benchmark (n = 5, r = l = 1, D = 0).
StateSpaceModel benchmark_system();

/// Seeded zero-mean Gaussian vector source with covariance `variance`.
///
/// Two processes with equal seed and variance yield bit-identical streams.
/// A zero covariance is accepted and produces exact zeros.
class NoiseProcess {
 public:
  NoiseProcess(std::uint64_t seed, Matrix variance);
  NoiseProcess(std::uint64_t seed, double variance, int dim = 1);

  Vector draw();

  std::uint64_t seed() const noexcept { return seed_; }
  const Matrix& variance() const noexcept { return variance_; }
  int dim() const noexcept { return static_cast<int>(variance_.rows()); }

 private:
  std::uint64_t seed_;
  Matrix variance_;
  Matrix factor_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Time-indexed record of one run. All sequences always share one length.
class SignalLog {
 public:
  SignalLog() = default;
  SignalLog(int states, int inputs, int outputs)
      : n_(states), r_(inputs), l_(outputs) {}

  void append(const Vector& x, const Vector& u, const Vector& y,
              const Vector& e, const Vector& r);
  void reserve(std::size_t steps);

  std::size_t size() const noexcept { return u_.size(); }
  bool empty() const noexcept { return u_.empty(); }

  const std::vector<Vector>& x() const noexcept { return x_; }
  const std::vector<Vector>& u() const noexcept { return u_; }
  const std::vector<Vector>& y() const noexcept { return y_; }
  const std::vector<Vector>& e() const noexcept { return e_; }
  const std::vector<Vector>& r() const noexcept { return ref_; }

  int states() const noexcept { return n_; }
  int inputs() const noexcept { return r_; }
  int outputs() const noexcept { return l_; }

 private:
  int n_ = 0, r_ = 0, l_ = 0;
  std::vector<Vector> x_, u_, y_, e_, ref_;
};

/// Writes `k,u,y,e,r,x1..xn` (vector channels expand to u1..ur etc.).
void write_signal_csv(std::ostream& os, const SignalLog& log);

/// Steps a plant forward one sample at a time and records every signal.
class Simulator {
 public:
  Simulator(StateSpaceModel model, NoiseProcess noise, Vector x0);

  /// Applies u_k, draws e_k, logs (x_k, u_k, y_k, e_k, r_k) and returns y_k.
  Vector advance(const Vector& u, const Vector& r);

  const StateSpaceModel& model() const noexcept { return model_; }
  const Vector& state() const noexcept { return x_; }
  const SignalLog& log() const noexcept { return log_; }
  SignalLog take_log() && { return std::move(log_); }

 private:
  StateSpaceModel model_;
  NoiseProcess noise_;
  Vector x_;
  SignalLog log_;
};

SignalLog simulate_open_loop(const StateSpaceModel& model,
                             std::span<const Vector> u_seq,
                             NoiseProcess noise, const Vector& x0);

/// What a controller may see at step k: the log up to k - 1, the reference
/// from k onward, and the true plant state x_k (used only by the oracle).
struct ControlContext {
  Index step = 0;
  const SignalLog& log;
  std::span<const Vector> reference;
  const Vector& state;

  /// Stacked reference r_k..r_{k+horizon-1}; the last sample is held when
  /// the horizon runs past the end of the sequence.
  Vector reference_preview(int horizon) const;
};

using ControlLaw = std::function<Vector(const ControlContext&)>;

/// Runs `steps` closed-loop samples. u_k is fixed before y_k is computed.
/// Exceptions thrown by the controller are rethrown as ControllerError
/// tagged with the step index.
SignalLog run_closed_loop(const StateSpaceModel& model, const ControlLaw& controller,
                          std::span<const Vector> reference, Index steps,
                          NoiseProcess noise, const Vector& x0);

/// Continues an existing simulation for `steps` closed-loop samples, reading
/// reference entries reference[0..steps) for those samples.
void run_closed_loop(Simulator& sim, const ControlLaw& controller,
                     std::span<const Vector> reference, Index steps);

}  // namespace cldeepc
