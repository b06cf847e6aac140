#pragma once

// Synchronous-equilibrium solver.
//
// A post-disturbance equilibrium generally has a nonzero common frequency
// deviation, so raw angles drift together and only relative angles settle.
// The solver therefore works in the rotating frame: the first area's angle is
// pinned as reference, the remaining angle equations are replaced by
// synchronism residuals df_k - df_1, and every other residual is the
// corresponding right-hand side with explicit commanded references u (the AGC
// integrators are inputs here, not unknowns).
//
// Measurement-filter states with a disabled filter have identically zero
// dynamics; their rows become pin residuals filt - raw so the Jacobian stays
// nonsingular.

#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "agc/system_model.hpp"
#include "agc/types.hpp"

namespace agc {

struct SteadyStateResult {
  State state;
  int iterations = 0;
  double residual = 0.0;  // final infinity norm
};

namespace detail {

inline void steady_state_residual(const SystemModel& model, const State& x,
                                  const Eigen::VectorXd& u_flat, const Eigen::VectorXd& load_dev,
                                  const Eigen::VectorXd& eta_target, Eigen::VectorXd& tie_scratch,
                                  State& dx, Eigen::VectorXd& r) {
  derivatives_with_u_into(model, x, u_flat, load_dev, tie_scratch, dx);
  r = dx;

  r[model.idx_angle(0)] = x[model.idx_angle(0)];
  for (int k = 1; k < model.num_areas(); ++k)
    r[model.idx_angle(k)] = x[model.idx_freq(k)] - x[model.idx_freq(0)];

  for (int k = 0; k < model.num_areas(); ++k) {
    if (!(model.area(k).measurement_filter > 0.0)) {
      r[model.idx_filt_freq(k)] = x[model.idx_filt_freq(k)] - x[model.idx_freq(k)];
      r[model.idx_filt_ni(k)] = x[model.idx_filt_ni(k)] - tie_scratch[k];
    }
    r[model.idx_eta(k)] = x[model.idx_eta(k)] - eta_target[k];
  }
}

}  // namespace detail

// Newton iteration with a forward-difference Jacobian (step 1e-6), at most 50
// iterations, converged when the residual infinity norm drops below 1e-10.
// Throws NumericalError on divergence, a singular Jacobian, or a tie angle
// spread beyond pi/2 (past the stable branch of the sine coupling).
[[nodiscard]] inline SteadyStateResult solve_steady_state(
    const SystemModel& model, const Eigen::VectorXd& u_flat, const Eigen::VectorXd& load_dev,
    const std::optional<Eigen::VectorXd>& eta = std::nullopt) {
  const int n = model.num_areas();
  const int dim = model.state_size();
  if (u_flat.size() != model.total_generators())
    throw std::invalid_argument("solve_steady_state: u vector does not match generator count");
  if (load_dev.size() != n)
    throw std::invalid_argument("solve_steady_state: load deviation dimension mismatch");
  Eigen::VectorXd eta_target = eta.value_or(Eigen::VectorXd::Zero(n));
  if (eta_target.size() != n)
    throw std::invalid_argument("solve_steady_state: eta dimension mismatch");

  // Closed-form seed: ties cancel in the aggregate swing balance, so the
  // common frequency offset is the net reference surplus over the total
  // frequency response characteristic.
  double surplus = 0.0;
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < model.num_generators(k); ++i)
      surplus += u_flat[model.gen_flat_index(k, i)] -
                 model.area(k).generators[static_cast<std::size_t>(i)].base_setpoint;
    surplus -= load_dev[k];
  }
  const double df_guess = surplus / model.total_frc();

  State x = State::Zero(dim);
  for (int k = 0; k < n; ++k) {
    x[model.idx_freq(k)] = df_guess;
    x[model.idx_filt_freq(k)] = df_guess;
    x[model.idx_eta(k)] = eta_target[k];
    for (int i = 0; i < model.num_generators(k); ++i) {
      const double p = u_flat[model.gen_flat_index(k, i)] -
                       df_guess / model.area(k).generators[static_cast<std::size_t>(i)].droop;
      x[model.idx_gov(k, i)] = p;
      x[model.idx_mech(k, i)] = p;
    }
  }

  constexpr double kFdStep = 1e-6;
  constexpr double kTol = 1e-10;
  constexpr int kMaxIter = 50;

  Eigen::VectorXd tie_scratch(n);
  State dx(dim);
  Eigen::VectorXd r(dim), r_pert(dim);
  Eigen::MatrixXd jac(dim, dim);

  detail::steady_state_residual(model, x, u_flat, load_dev, eta_target, tie_scratch, dx, r);
  double rnorm = r.lpNorm<Eigen::Infinity>();

  int iter = 0;
  for (; iter < kMaxIter && rnorm > kTol; ++iter) {
    for (int j = 0; j < dim; ++j) {
      State xp = x;
      xp[j] += kFdStep;
      detail::steady_state_residual(model, xp, u_flat, load_dev, eta_target, tie_scratch, dx,
                                    r_pert);
      jac.col(j) = (r_pert - r) / kFdStep;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible())
      throw NumericalError("steady-state jacobian is singular");
    x -= lu.solve(r);
    if (!x.allFinite())
      throw NumericalError("steady-state iteration produced non-finite values");
    detail::steady_state_residual(model, x, u_flat, load_dev, eta_target, tie_scratch, dx, r);
    rnorm = r.lpNorm<Eigen::Infinity>();
  }
  if (rnorm > kTol)
    throw NumericalError("steady-state solve did not converge (residual " +
                         std::to_string(rnorm) + ")");

  for (const TieLine& t : model.ties()) {
    const double spread = std::abs(x[model.idx_angle(t.area_a)] - x[model.idx_angle(t.area_b)]);
    if (spread > 0.5 * M_PI)
      throw NumericalError("steady-state tie angle difference exceeds pi/2");
  }

  return SteadyStateResult{std::move(x), iter, rnorm};
}

// ===== Equilibrium identities =====

// Structural facts any synchronous equilibrium must satisfy; each field is
// the worst violation in its category.
struct IdentityReport {
  double synchronism = 0.0;       // spread of df across areas
  double interchange_sum = 0.0;   // |sum of net-interchange deviations|
  double swing_balance = 0.0;     // max |swing rhs|
  double governor_statics = 0.0;  // max |pm - (u - df / R)|
  double measurement_pin = 0.0;   // max |filtered - raw| on both channels
  double tolerance = 1e-8;

  [[nodiscard]] bool pass() const {
    return synchronism <= tolerance && interchange_sum <= tolerance &&
           swing_balance <= tolerance && governor_statics <= tolerance &&
           measurement_pin <= tolerance;
  }
};

[[nodiscard]] inline IdentityReport verify_steady_state_identities(
    const SystemModel& model, const State& x, const Eigen::VectorXd& u_flat,
    const Eigen::VectorXd& load_dev, double tolerance = 1e-8) {
  IdentityReport rep;
  rep.tolerance = tolerance;

  const Measurements m = measurements(model, x, u_flat);
  rep.synchronism = m.freq_raw.maxCoeff() - m.freq_raw.minCoeff();
  rep.interchange_sum = std::abs(m.ni_raw.sum());
  rep.measurement_pin = std::max((m.freq_filt - m.freq_raw).lpNorm<Eigen::Infinity>(),
                                 (m.ni_filt - m.ni_raw).lpNorm<Eigen::Infinity>());

  for (int k = 0; k < model.num_areas(); ++k) {
    const AreaParams& a = model.area(k);
    double mech_sum = 0.0;
    double sched_sum = 0.0;
    for (int i = 0; i < model.num_generators(k); ++i) {
      const GeneratorParams& g = a.generators[static_cast<std::size_t>(i)];
      const int gi = model.gen_flat_index(k, i);
      mech_sum += x[model.idx_mech(k, i)];
      sched_sum += g.base_setpoint;
      rep.governor_statics = std::max(
          rep.governor_statics,
          std::abs(x[model.idx_mech(k, i)] - (u_flat[gi] - m.freq_raw[k] / g.droop)));
    }
    const double swing = mech_sum - sched_sum - a.load_damping * m.freq_raw[k] - load_dev[k] -
                         m.ni_raw[k];
    rep.swing_balance = std::max(rep.swing_balance, std::abs(swing));
  }
  return rep;
}

// Per-area reference surplus 1' u_dev_k - w_k. At a synchronous equilibrium
// these vanish for every area exactly when all ACEs vanish, exactly when the
// frequency and every net interchange return to schedule.
[[nodiscard]] inline Eigen::VectorXd area_imbalance(const SystemModel& model,
                                                    const Eigen::VectorXd& u_flat,
                                                    const Eigen::VectorXd& load_dev) {
  Eigen::VectorXd out(model.num_areas());
  for (int k = 0; k < model.num_areas(); ++k) {
    double s = -load_dev[k];
    for (int i = 0; i < model.num_generators(k); ++i)
      s += u_flat[model.gen_flat_index(k, i)] -
           model.area(k).generators[static_cast<std::size_t>(i)].base_setpoint;
    out[k] = s;
  }
  return out;
}

}  // namespace agc
