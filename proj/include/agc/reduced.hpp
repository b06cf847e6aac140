#pragma once

// Quasi-steady reduction of the AGC loop.
//
// On the slow timescale the machine, governor, and tie dynamics are collapsed
// to their equilibrium maps; what remains is one integrator per area,
//   tau_k * d(eta_k)/dt = -[ B (phi(eta) - w) ]_k
// where phi_k is the area's aggregate commanded-response curve (piecewise
// linear and nondecreasing in eta_k) and w the active load deviation. The
// coupling matrix B is a rank-one update of the identity, B = I - gamma 1',
// with gamma determined by the bias tuning; the simplified and textbook
// controllers differ only in gamma.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "agc/controller.hpp"
#include "agc/system_model.hpp"
#include "agc/types.hpp"

namespace agc {

// ===== Aggregate response curve =====

// phi_k(eta): total commanded deviation from schedule across the area's AGC
// participants, with each reference clamped to its capacity limits.
[[nodiscard]] inline double phi(const AreaParams& area, double eta) {
  double total = 0.0;
  for (const GeneratorParams& g : area.generators)
    if (g.agc_participant) total += allocate_one(g, eta) - g.base_setpoint;
  return total;
}

// ===== Coupling matrices =====

// B = I - gamma 1' with gamma_k = (frc_k - bias_k) / sum(frc). Maps the
// aggregate area surpluses to the area control errors.
[[nodiscard]] inline Eigen::MatrixXd ace_coupling_matrix(const Eigen::VectorXd& bias,
                                                         const Eigen::VectorXd& frc) {
  if (bias.size() != frc.size())
    throw std::invalid_argument("ace_coupling_matrix: dimension mismatch");
  const Eigen::VectorXd gamma = (frc - bias) / frc.sum();
  const int n = static_cast<int>(bias.size());
  return Eigen::MatrixXd::Identity(n, n) - gamma * Eigen::RowVectorXd::Ones(n);
}

// Coupling of the textbook controller, whose integrator also feeds back the
// generation mismatch. Identical to the plain ACE coupling evaluated at the
// inflated bias b + 1/R, which is how it is computed so the identity holds
// exactly in floating point.
[[nodiscard]] inline Eigen::MatrixXd textbook_coupling_matrix(const Eigen::VectorXd& bias,
                                                              const Eigen::VectorXd& frc,
                                                              const Eigen::VectorXd& droop_sum) {
  if (droop_sum.size() != bias.size())
    throw std::invalid_argument("textbook_coupling_matrix: dimension mismatch");
  return ace_coupling_matrix(bias + droop_sum, frc);
}

// ===== Bias mistuning =====

// Overbias O_k = (bias_k - frc_k) / sum(frc); zero means matched tuning.
[[nodiscard]] inline Eigen::VectorXd overbias_of(const Eigen::VectorXd& bias,
                                                 const Eigen::VectorXd& frc) {
  return (bias - frc) / frc.sum();
}

[[nodiscard]] inline Eigen::VectorXd bias_from_overbias(const Eigen::VectorXd& overbias,
                                                        const Eigen::VectorXd& frc) {
  if (overbias.size() != frc.size())
    throw std::invalid_argument("bias_from_overbias: dimension mismatch");
  Eigen::VectorXd bias = frc + overbias * frc.sum();
  for (int k = 0; k < bias.size(); ++k)
    if (!(bias[k] > 0.0))
      throw std::invalid_argument("bias_from_overbias: overbias " + std::to_string(overbias[k]) +
                                  " drives area " + std::to_string(k + 1) +
                                  " bias nonpositive");
  return bias;
}

// ===== Reduced model =====

struct ReducedModel {
  AgcVariant variant = AgcVariant::Simplified;
  Eigen::MatrixXd b_dyn;  // coupling driving the integrators
  Eigen::MatrixXd b_ace;  // coupling producing the measured control errors
  Eigen::VectorXd tau;
  Eigen::VectorXd bias;
  Eigen::VectorXd frc;
  Eigen::VectorXd droop_sum;
  std::vector<AreaParams> areas;  // capacity and participation data for phi

  static ReducedModel build(const SystemModel& model, AgcVariant variant) {
    ReducedModel r;
    r.variant = variant;
    r.tau = model.tau_vector();
    r.bias = model.bias_vector();
    r.frc = model.frc_vector();
    r.droop_sum = model.droop_sum_vector();
    r.b_ace = ace_coupling_matrix(r.bias, r.frc);
    r.b_dyn = variant == AgcVariant::Simplified
                  ? r.b_ace
                  : textbook_coupling_matrix(r.bias, r.frc, r.droop_sum);
    r.areas.reserve(static_cast<std::size_t>(model.num_areas()));
    for (int k = 0; k < model.num_areas(); ++k) r.areas.push_back(model.area(k));
    return r;
  }

  [[nodiscard]] int num_areas() const { return static_cast<int>(areas.size()); }
};

[[nodiscard]] inline Eigen::VectorXd aggregate_surplus(const ReducedModel& r,
                                                       const Eigen::VectorXd& eta,
                                                       const Eigen::VectorXd& load_dev) {
  Eigen::VectorXd v(r.num_areas());
  for (int k = 0; k < r.num_areas(); ++k)
    v[k] = phi(r.areas[static_cast<std::size_t>(k)], eta[k]) - load_dev[k];
  return v;
}

[[nodiscard]] inline Eigen::VectorXd reduced_rhs(const ReducedModel& r, const Eigen::VectorXd& eta,
                                                 const Eigen::VectorXd& load_dev) {
  const Eigen::VectorXd v = aggregate_surplus(r, eta, load_dev);
  return (-(r.b_dyn * v)).cwiseQuotient(r.tau);
}

[[nodiscard]] inline Eigen::VectorXd reduced_ace(const ReducedModel& r, const Eigen::VectorXd& eta,
                                                 const Eigen::VectorXd& load_dev) {
  return r.b_ace * aggregate_surplus(r, eta, load_dev);
}

// Quasi-steady frequency and net-interchange deviations implied by the area
// surpluses v = phi(eta) - w: the system frequency absorbs the total surplus
// through the aggregate response characteristic, each area exports whatever
// its own surplus exceeds its primary-response share.
struct MappedSteadyState {
  double freq_dev = 0.0;
  Eigen::VectorXd ni_dev;
};

[[nodiscard]] inline MappedSteadyState steady_state_freq_and_ni(const Eigen::VectorXd& surplus,
                                                                const Eigen::VectorXd& frc) {
  MappedSteadyState out;
  out.freq_dev = surplus.sum() / frc.sum();
  out.ni_dev = surplus - frc * out.freq_dev;
  return out;
}

// ===== Equilibrium of the reduced dynamics =====

// Capacity feasibility is strict: the load deviation must lie in the open
// interval of attainable aggregate responses so the equilibrium is not pinned
// against a limit.
namespace detail {

[[nodiscard]] inline std::vector<double> phi_breakpoints(const AreaParams& area) {
  std::vector<double> bp;
  for (const GeneratorParams& g : area.generators) {
    if (!g.agc_participant || g.participation <= 0.0) continue;
    bp.push_back((g.u_min - g.base_setpoint) / g.participation);
    bp.push_back((g.u_max - g.base_setpoint) / g.participation);
  }
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
  return bp;
}

// Slope of phi on the open segment containing eta (sum of participation
// factors of the unsaturated participants there).
[[nodiscard]] inline double phi_slope_at(const AreaParams& area, double eta) {
  double slope = 0.0;
  for (const GeneratorParams& g : area.generators) {
    if (!g.agc_participant || g.participation <= 0.0) continue;
    const double raw = g.base_setpoint + g.participation * eta;
    if (raw > g.u_min && raw < g.u_max) slope += g.participation;
  }
  return slope;
}

}  // namespace detail

// Smallest and largest eta with phi(eta) equal to the target; a single point
// unless the curve is flat at the target level.
struct PreimageInterval {
  double lo = 0.0;
  double hi = 0.0;
};

[[nodiscard]] inline PreimageInterval preimage_interval(const AreaParams& area, double target) {
  const CapacityInterval cap = capacity_interval(area);
  if (!(target > cap.lo && target < cap.hi))
    throw InfeasibleError("area '" + area.name + "': load deviation " + std::to_string(target) +
                          " is outside the attainable response interval (" +
                          std::to_string(cap.lo) + ", " + std::to_string(cap.hi) + ")");

  const std::vector<double> bp = detail::phi_breakpoints(area);
  // Strict feasibility puts the crossing strictly between the outermost
  // breakpoints, so an interior segment always brackets it.
  PreimageInterval out;
  bool found = false;
  for (std::size_t j = 0; j + 1 < bp.size(); ++j) {
    const double lo_val = phi(area, bp[j]);
    const double hi_val = phi(area, bp[j + 1]);
    if (target < lo_val || target > hi_val) continue;
    const double slope = detail::phi_slope_at(area, 0.5 * (bp[j] + bp[j + 1]));
    if (!found) {
      out.lo = slope > 0.0 ? bp[j] + (target - lo_val) / slope : bp[j];
      found = true;
    }
    out.hi = slope > 0.0 ? bp[j] + (target - lo_val) / slope : bp[j + 1];
  }
  if (!found)
    throw NumericalError("preimage_interval: no bracketing segment found");
  return out;
}

// Equilibrium integrator values: per area the eta driving the aggregate
// response onto the load deviation (any point of the preimage is an
// equilibrium; the canonical choice is the interval midpoint, which is the
// crossing itself whenever the slope there is positive).
[[nodiscard]] inline Eigen::VectorXd equilibrium_eta(const ReducedModel& r,
                                                     const Eigen::VectorXd& load_dev) {
  if (load_dev.size() != r.num_areas())
    throw std::invalid_argument("equilibrium_eta: load deviation dimension mismatch");
  Eigen::VectorXd eta(r.num_areas());
  for (int k = 0; k < r.num_areas(); ++k) {
    const PreimageInterval pre = preimage_interval(r.areas[static_cast<std::size_t>(k)],
                                                   load_dev[k]);
    eta[k] = 0.5 * (pre.lo + pre.hi);
  }
  return eta;
}

}  // namespace agc
