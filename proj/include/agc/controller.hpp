#pragma once

// ACE construction, AGC integrator right-hand sides, the saturating
// participation-factor allocation rule, and regulation-capacity checks.

#include <algorithm>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "agc/types.hpp"

namespace agc {

// ===== Area control error =====

struct AceSample {
  double value = 0.0;     // ni_dev + bias * freq_dev, exactly
  double ni_dev = 0.0;    // net-interchange component, pu
  double freq_term = 0.0; // bias * freq_dev component, pu
};

// Componentwise ACE_k = dNI_k + b_k * df_k. Bias positivity is a
// configuration invariant and is not re-validated here.
[[nodiscard]] inline std::vector<AceSample> compute_ace(const Eigen::VectorXd& ni_dev,
                                                        const Eigen::VectorXd& freq_dev,
                                                        const Eigen::VectorXd& bias) {
  if (ni_dev.size() != freq_dev.size() || ni_dev.size() != bias.size())
    throw std::invalid_argument("compute_ace: mismatched vector lengths");
  std::vector<AceSample> out(static_cast<std::size_t>(ni_dev.size()));
  for (Eigen::Index k = 0; k < ni_dev.size(); ++k) {
    AceSample& s = out[static_cast<std::size_t>(k)];
    s.ni_dev = ni_dev[k];
    s.freq_term = bias[k] * freq_dev[k];
    s.value = s.ni_dev + s.freq_term;
  }
  return out;
}

// ===== Integrator right-hand sides =====

// Simplified:  tau_k * deta_k = -ACE_k
// Textbook:    tau_k * deta_k = -ACE_k - sum_j (u_j - P_j), summed over ALL
//              generators of the area, not only AGC participants.
[[nodiscard]] inline double controller_rhs(AgcVariant variant, double ace, double tau,
                                           std::span<const double> u,
                                           std::span<const double> p) {
  double rhs = -ace;
  if (variant == AgcVariant::Textbook) {
    if (u.size() != p.size())
      throw std::invalid_argument("controller_rhs: textbook variant needs matching u and P channels");
    for (std::size_t j = 0; j < u.size(); ++j) rhs -= u[j] - p[j];
  }
  return rhs / tau;
}

// ===== Allocation =====

// u_i = clamp(u*_i + alpha_i * eta, [u_min, u_max]) for participants,
// u_i = u*_i otherwise. Returns one entry per generator of the area.
[[nodiscard]] inline std::vector<double> allocate(const AreaParams& area, double eta) {
  std::vector<double> u(area.generators.size());
  for (std::size_t i = 0; i < area.generators.size(); ++i) {
    const GeneratorParams& g = area.generators[i];
    u[i] = g.agc_participant
               ? std::clamp(g.base_setpoint + g.participation * eta, g.u_min, g.u_max)
               : g.base_setpoint;
  }
  return u;
}

[[nodiscard]] inline double allocate_one(const GeneratorParams& g, double eta) {
  return g.agc_participant
             ? std::clamp(g.base_setpoint + g.participation * eta, g.u_min, g.u_max)
             : g.base_setpoint;
}

// ===== Regulation capacity =====

// Open interval of net-load deviations the area's participating units can
// absorb: (sum(u_min - u*), sum(u_max - u*)) over participants.
struct CapacityInterval {
  double lo = 0.0;
  double hi = 0.0;
};

[[nodiscard]] inline CapacityInterval capacity_interval(const AreaParams& area) {
  CapacityInterval c;
  for (const auto& g : area.generators) {
    if (!g.agc_participant) continue;
    c.lo += g.u_min - g.base_setpoint;
    c.hi += g.u_max - g.base_setpoint;
  }
  return c;
}

struct FeasibilityReport {
  std::vector<bool> area_ok;
  std::vector<CapacityInterval> capacity;
  bool all_ok = true;
};

// Strict-interval membership per area: a deviation exactly at a capacity
// boundary is infeasible (the equilibrium would sit on a saturation corner).
template <typename ModelLike>
[[nodiscard]] FeasibilityReport check_feasibility(const Eigen::VectorXd& load_dev,
                                                  const ModelLike& model) {
  const int n = model.num_areas();
  if (load_dev.size() != n)
    throw std::invalid_argument("check_feasibility: load_dev length does not match area count");
  FeasibilityReport rep;
  rep.area_ok.resize(static_cast<std::size_t>(n));
  rep.capacity.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const CapacityInterval c = capacity_interval(model.area(k));
    const bool ok = load_dev[k] > c.lo && load_dev[k] < c.hi;
    rep.capacity[static_cast<std::size_t>(k)] = c;
    rep.area_ok[static_cast<std::size_t>(k)] = ok;
    rep.all_ok = rep.all_ok && ok;
  }
  return rep;
}

}  // namespace agc
