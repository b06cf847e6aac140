#pragma once

// Nonlinear multi-area surrogate model.
//
// Per area k (equivalent machine aggregation):
//   d(delta_k)/dt = df_k
//   2 H_k * d(df_k)/dt = sum_i pm_i - sum_i u*_i - D_k df_k - w_k - p_out_k
//   T_f * d(filt)/dt = raw - filt          (freq and net-interchange channels)
// Per generator i of area k (governor and turbine first-order lags):
//   T_g * d(pg)/dt = (u_i - df_k / R_i) - pg
//   T_t * d(pm)/dt = pg - pm
// Tie flow deviation on line (a, b):
//   p_ab = P_max * (sin(delta_a - delta_b) - sin of scheduled difference)
// with scheduled angle differences of zero. Flows accumulate antisymmetrically
// so the interchange deviations sum to zero in exact floating point.
//
// The equivalent angle integrates the per-unit frequency deviation directly,
// so P_max is the tie's synchronizing coefficient on the control timescale
// (pu power per pu-frequency-second). This keeps the inter-area oscillation
// inside the band where governor droop still damps it: every feasible
// equilibrium is exponentially stable apart from the uniform angle-shift mode,
// including areas with zero load damping.
//
// The AGC integrator block eta (one entry per area) closes the loop through
// the allocation rule; see controller.hpp for the integrator right-hand sides.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "agc/controller.hpp"
#include "agc/types.hpp"

namespace agc {

// How the AGC integrators evolve inside full_derivatives.
enum class LoopMode { Simplified, Textbook, PrimaryOnly };

[[nodiscard]] inline LoopMode loop_mode(AgcVariant v) {
  return v == AgcVariant::Simplified ? LoopMode::Simplified : LoopMode::Textbook;
}

using State = Eigen::VectorXd;

// ===== Model =====

// Immutable validated system. State layout, area-major:
//   per area k: [delta, df, filt_f, filt_ni, (pg, pm) per generator]
// followed by the eta block (one AGC integrator per area) at the tail.
class SystemModel {
 public:
  static SystemModel build(std::vector<AreaParams> areas, std::vector<TieLine> ties,
                           double base_mva = kDefaultBaseMva) {
    validate(areas, ties, base_mva);
    return SystemModel(std::move(areas), std::move(ties), base_mva);
  }

  [[nodiscard]] int num_areas() const { return static_cast<int>(areas_.size()); }
  [[nodiscard]] const AreaParams& area(int k) const { return areas_[static_cast<std::size_t>(k)]; }
  [[nodiscard]] const std::vector<TieLine>& ties() const { return ties_; }
  [[nodiscard]] double base_mva() const { return base_mva_; }

  [[nodiscard]] int num_generators(int k) const {
    return static_cast<int>(areas_[static_cast<std::size_t>(k)].generators.size());
  }
  [[nodiscard]] int total_generators() const { return total_gens_; }

  // Derived frequency-response quantities, cached at build time.
  [[nodiscard]] double frc(int k) const { return frc_[static_cast<std::size_t>(k)]; }
  [[nodiscard]] double total_frc() const { return total_frc_; }
  [[nodiscard]] double droop_sum(int k) const { return droop_sum_[static_cast<std::size_t>(k)]; }

  [[nodiscard]] Eigen::VectorXd frc_vector() const {
    return Eigen::Map<const Eigen::VectorXd>(frc_.data(), num_areas());
  }
  [[nodiscard]] Eigen::VectorXd droop_sum_vector() const {
    return Eigen::Map<const Eigen::VectorXd>(droop_sum_.data(), num_areas());
  }
  [[nodiscard]] Eigen::VectorXd bias_vector() const {
    Eigen::VectorXd b(num_areas());
    for (int k = 0; k < num_areas(); ++k) b[k] = area(k).frequency_bias;
    return b;
  }
  [[nodiscard]] Eigen::VectorXd tau_vector() const {
    Eigen::VectorXd t(num_areas());
    for (int k = 0; k < num_areas(); ++k) t[k] = area(k).agc_time_constant;
    return t;
  }

  // ----- State layout -----

  [[nodiscard]] int state_size() const { return eta_offset_ + num_areas(); }
  [[nodiscard]] int idx_angle(int k) const { return area_offset_[static_cast<std::size_t>(k)]; }
  [[nodiscard]] int idx_freq(int k) const { return area_offset_[static_cast<std::size_t>(k)] + 1; }
  [[nodiscard]] int idx_filt_freq(int k) const { return area_offset_[static_cast<std::size_t>(k)] + 2; }
  [[nodiscard]] int idx_filt_ni(int k) const { return area_offset_[static_cast<std::size_t>(k)] + 3; }
  [[nodiscard]] int idx_gov(int k, int i) const {
    return area_offset_[static_cast<std::size_t>(k)] + 4 + 2 * i;
  }
  [[nodiscard]] int idx_mech(int k, int i) const { return idx_gov(k, i) + 1; }
  [[nodiscard]] int idx_eta(int k) const { return eta_offset_ + k; }

  // Flat generator index, area-major; matches measurement vector layout.
  [[nodiscard]] int gen_flat_index(int k, int i) const {
    return gen_offset_[static_cast<std::size_t>(k)] + i;
  }

 private:
  SystemModel(std::vector<AreaParams> areas, std::vector<TieLine> ties, double base_mva)
      : areas_(std::move(areas)), ties_(std::move(ties)), base_mva_(base_mva) {
    area_offset_.reserve(areas_.size());
    gen_offset_.reserve(areas_.size());
    int off = 0;
    int gens = 0;
    for (const auto& a : areas_) {
      area_offset_.push_back(off);
      gen_offset_.push_back(gens);
      off += 4 + 2 * static_cast<int>(a.generators.size());
      gens += static_cast<int>(a.generators.size());
      frc_.push_back(a.frc());
      droop_sum_.push_back(a.droop_sum());
      total_frc_ += a.frc();
    }
    eta_offset_ = off;
    total_gens_ = gens;
  }

  static void validate(const std::vector<AreaParams>& areas, const std::vector<TieLine>& ties,
                       double base_mva) {
    auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
    if (areas.empty()) fail("at least one area is required");
    if (!(base_mva > 0.0) || !std::isfinite(base_mva)) fail("base_mva must be positive");

    for (std::size_t k = 0; k < areas.size(); ++k) {
      const AreaParams& a = areas[k];
      const std::string where = "area " + std::to_string(k + 1) + ": ";
      if (!(a.load_damping >= 0.0)) fail(where + "load_damping must be nonnegative");
      if (!(a.inertia > 0.0)) fail(where + "inertia must be positive");
      if (!(a.frequency_bias > 0.0)) fail(where + "frequency_bias must be positive");
      if (!(a.agc_time_constant >= kMinAgcTimeConstantS &&
            a.agc_time_constant <= kMaxAgcTimeConstantS))
        fail(where + "agc_time_constant must lie in [1, 10000] s");
      if (!(a.measurement_filter >= 0.0)) fail(where + "measurement_filter must be nonnegative");
      if (a.generators.empty()) fail(where + "at least one generator is required");

      double alpha_sum = 0.0;
      int participants = 0;
      for (std::size_t i = 0; i < a.generators.size(); ++i) {
        const GeneratorParams& g = a.generators[i];
        const std::string gwhere =
            where + "generator " + std::to_string(i + 1) + ": ";
        if (!(g.droop > 0.0)) fail(gwhere + "droop must be positive");
        if (!(g.u_min <= g.base_setpoint && g.base_setpoint <= g.u_max))
          fail(gwhere + "base_setpoint must lie within [u_min, u_max]");
        if (!(g.governor_lag > 0.0)) fail(gwhere + "governor_lag must be positive");
        if (!(g.turbine_lag > 0.0)) fail(gwhere + "turbine_lag must be positive");
        if (g.agc_participant) {
          if (!(g.participation >= 0.0)) fail(gwhere + "participation must be nonnegative");
          alpha_sum += g.participation;
          ++participants;
        } else if (g.participation != 0.0) {
          fail(gwhere + "participation must be 0 for non-participants");
        }
      }
      if (participants == 0) fail(where + "at least one agc participant is required");
      if (std::abs(alpha_sum - 1.0) > 1e-9)
        fail(where + "participation factors of agc participants must sum to 1 (got " +
             std::to_string(alpha_sum) + ")");
      if (!(a.frc() > 0.0)) fail(where + "frequency response characteristic must be positive");
    }

    const int n = static_cast<int>(areas.size());
    for (const TieLine& t : ties) {
      if (t.area_a < 0 || t.area_a >= n || t.area_b < 0 || t.area_b >= n)
        fail("tie references an unknown area index");
      if (t.area_a == t.area_b) fail("tie must connect two distinct areas");
      if (!(t.stiffness > 0.0)) fail("tie stiffness must be positive");
    }

    // Connectivity over the tie graph; single-area systems are trivially fine.
    if (n > 1) {
      std::vector<int> root(static_cast<std::size_t>(n));
      for (int k = 0; k < n; ++k) root[static_cast<std::size_t>(k)] = k;
      auto find = [&](int x) {
        while (root[static_cast<std::size_t>(x)] != x) x = root[static_cast<std::size_t>(x)];
        return x;
      };
      for (const TieLine& t : ties) root[static_cast<std::size_t>(find(t.area_a))] = find(t.area_b);
      for (int k = 1; k < n; ++k)
        if (find(k) != find(0)) fail("tie graph must connect all areas");
    }
  }

  std::vector<AreaParams> areas_;
  std::vector<TieLine> ties_;
  double base_mva_ = kDefaultBaseMva;

  std::vector<int> area_offset_;
  std::vector<int> gen_offset_;
  std::vector<double> frc_;
  std::vector<double> droop_sum_;
  double total_frc_ = 0.0;
  int eta_offset_ = 0;
  int total_gens_ = 0;
};

// ===== Scheduled operating point =====

// Zero-deviation equilibrium: all angles and deviations zero, governor and
// turbine states at the load references, AGC integrators at zero. Balanced by
// construction since every load reference is measured against the schedule.
[[nodiscard]] inline State scheduled_state(const SystemModel& model) {
  State x = State::Zero(model.state_size());
  for (int k = 0; k < model.num_areas(); ++k)
    for (int i = 0; i < model.num_generators(k); ++i) {
      const double u0 = model.area(k).generators[static_cast<std::size_t>(i)].base_setpoint;
      x[model.idx_gov(k, i)] = u0;
      x[model.idx_mech(k, i)] = u0;
    }
  return x;
}

// ===== Tie flows =====

// Net deviation outflow per area. Antisymmetric accumulation keeps the sum
// over areas identically zero.
inline void accumulate_tie_outflow(const SystemModel& model, const State& x,
                                   Eigen::VectorXd& out) {
  out.setZero();
  for (const TieLine& t : model.ties()) {
    const double flow =
        t.stiffness * std::sin(x[model.idx_angle(t.area_a)] - x[model.idx_angle(t.area_b)]);
    out[t.area_a] += flow;
    out[t.area_b] -= flow;
  }
}

[[nodiscard]] inline Eigen::VectorXd tie_outflow(const SystemModel& model, const State& x) {
  Eigen::VectorXd out(model.num_areas());
  accumulate_tie_outflow(model, x, out);
  return out;
}

// ===== Measurements =====

struct Measurements {
  Eigen::VectorXd freq_raw;   // df per area, pu
  Eigen::VectorXd freq_filt;  // filtered df (raw when the filter is disabled)
  Eigen::VectorXd ni_raw;     // net-interchange deviation per area, pu
  Eigen::VectorXd ni_filt;
  Eigen::VectorXd gen_u;      // commanded load reference per generator, flat
  Eigen::VectorXd gen_p;      // electrical power from governor statics, raw df
  Eigen::VectorXd gen_p_filt; // statics evaluated on the filtered df channel
};

// Electrical powers follow the governor statics P_i = u_i - df_k / R_i.
// With explicit u the commanded references are decoupled from the eta block
// (used by the steady-state solver); the two-argument form allocates from eta.
[[nodiscard]] inline Measurements measurements(const SystemModel& model, const State& x,
                                               const Eigen::VectorXd& u_flat) {
  const int n = model.num_areas();
  if (x.size() != model.state_size())
    throw std::invalid_argument("measurements: state dimension mismatch");
  if (u_flat.size() != model.total_generators())
    throw std::invalid_argument("measurements: u vector does not match generator count");

  Measurements m;
  m.freq_raw.resize(n);
  m.freq_filt.resize(n);
  m.ni_raw.resize(n);
  m.ni_filt.resize(n);
  m.gen_u = u_flat;
  m.gen_p.resize(model.total_generators());
  m.gen_p_filt.resize(model.total_generators());

  accumulate_tie_outflow(model, x, m.ni_raw);
  for (int k = 0; k < n; ++k) {
    const AreaParams& a = model.area(k);
    const bool filtered = a.measurement_filter > 0.0;
    m.freq_raw[k] = x[model.idx_freq(k)];
    m.freq_filt[k] = filtered ? x[model.idx_filt_freq(k)] : m.freq_raw[k];
    m.ni_filt[k] = filtered ? x[model.idx_filt_ni(k)] : m.ni_raw[k];
    for (int i = 0; i < model.num_generators(k); ++i) {
      const int gi = model.gen_flat_index(k, i);
      const double inv_r = 1.0 / a.generators[static_cast<std::size_t>(i)].droop;
      m.gen_p[gi] = u_flat[gi] - m.freq_raw[k] * inv_r;
      m.gen_p_filt[gi] = u_flat[gi] - m.freq_filt[k] * inv_r;
    }
  }
  return m;
}

[[nodiscard]] inline Eigen::VectorXd allocate_flat(const SystemModel& model, const State& x) {
  Eigen::VectorXd u(model.total_generators());
  for (int k = 0; k < model.num_areas(); ++k) {
    const double eta = x[model.idx_eta(k)];
    for (int i = 0; i < model.num_generators(k); ++i)
      u[model.gen_flat_index(k, i)] =
          allocate_one(model.area(k).generators[static_cast<std::size_t>(i)], eta);
  }
  return u;
}

[[nodiscard]] inline Measurements measurements(const SystemModel& model, const State& x) {
  return measurements(model, x, allocate_flat(model, x));
}

// ===== Right-hand side =====

namespace detail {

// Shared derivative kernel. UFn maps (area k, generator i, params, eta_k) to
// the commanded reference u_{k,i}, letting the closed loop allocate from eta
// while the steady-state solver pins an explicit u. Writes into dx; tie_out
// is caller-provided scratch of area dimension.
template <typename UFn>
inline void rhs_kernel(const SystemModel& model, const State& x, const Eigen::VectorXd& load_dev,
                       LoopMode mode, UFn&& u_of, Eigen::VectorXd& tie_out, State& dx) {
  const int n = model.num_areas();
  accumulate_tie_outflow(model, x, tie_out);

  for (int k = 0; k < n; ++k) {
    const AreaParams& a = model.area(k);
    const double df = x[model.idx_freq(k)];
    const bool filtered = a.measurement_filter > 0.0;
    const double df_meas = filtered ? x[model.idx_filt_freq(k)] : df;
    const double ni_meas = filtered ? x[model.idx_filt_ni(k)] : tie_out[k];
    const double eta = x[model.idx_eta(k)];

    double mech_sum = 0.0;
    double sched_sum = 0.0;
    double power_feedback = 0.0; // sum of (u_i - P_i) on the measured channel
    for (int i = 0; i < model.num_generators(k); ++i) {
      const GeneratorParams& g = a.generators[static_cast<std::size_t>(i)];
      const double u = u_of(k, i, g, eta);
      const double pg = x[model.idx_gov(k, i)];
      const double pm = x[model.idx_mech(k, i)];
      mech_sum += pm;
      sched_sum += g.base_setpoint;

      dx[model.idx_gov(k, i)] = (u - df / g.droop - pg) / g.governor_lag;
      dx[model.idx_mech(k, i)] = (pg - pm) / g.turbine_lag;

      const double p_meas = u - df_meas / g.droop;
      power_feedback += u - p_meas;
    }

    dx[model.idx_angle(k)] = df;
    dx[model.idx_freq(k)] =
        (mech_sum - sched_sum - a.load_damping * df - load_dev[k] - tie_out[k]) /
        (2.0 * a.inertia);

    if (filtered) {
      dx[model.idx_filt_freq(k)] = (df - df_meas) / a.measurement_filter;
      dx[model.idx_filt_ni(k)] = (tie_out[k] - ni_meas) / a.measurement_filter;
    } else {
      dx[model.idx_filt_freq(k)] = 0.0;
      dx[model.idx_filt_ni(k)] = 0.0;
    }

    switch (mode) {
      case LoopMode::PrimaryOnly:
        dx[model.idx_eta(k)] = 0.0;
        break;
      case LoopMode::Simplified: {
        const double ace = ni_meas + a.frequency_bias * df_meas;
        dx[model.idx_eta(k)] = -ace / a.agc_time_constant;
        break;
      }
      case LoopMode::Textbook: {
        const double ace = ni_meas + a.frequency_bias * df_meas;
        dx[model.idx_eta(k)] = (-ace - power_feedback) / a.agc_time_constant;
        break;
      }
    }
  }
}

}  // namespace detail

// Closed-loop derivative with the commanded references allocated from the
// eta block (or frozen AGC under PrimaryOnly).
inline void full_derivatives_into(const SystemModel& model, const State& x,
                                  const Eigen::VectorXd& load_dev, LoopMode mode,
                                  Eigen::VectorXd& tie_scratch, State& dx) {
  detail::rhs_kernel(
      model, x, load_dev, mode,
      [](int, int, const GeneratorParams& g, double eta) { return allocate_one(g, eta); },
      tie_scratch, dx);
}

// Derivative with explicit commanded references; the eta block is frozen.
// Used by the steady-state solver, where u is an independent input.
inline void derivatives_with_u_into(const SystemModel& model, const State& x,
                                    const Eigen::VectorXd& u_flat,
                                    const Eigen::VectorXd& load_dev,
                                    Eigen::VectorXd& tie_scratch, State& dx) {
  detail::rhs_kernel(
      model, x, load_dev, LoopMode::PrimaryOnly,
      [&](int k, int i, const GeneratorParams&, double) {
        return u_flat[model.gen_flat_index(k, i)];
      },
      tie_scratch, dx);
}

[[nodiscard]] inline State full_derivatives(const SystemModel& model, const State& x,
                                            const Eigen::VectorXd& load_dev, LoopMode mode) {
  if (x.size() != model.state_size())
    throw std::invalid_argument("full_derivatives: state dimension mismatch");
  if (load_dev.size() != model.num_areas())
    throw std::invalid_argument("full_derivatives: load deviation dimension mismatch");
  if (!x.allFinite()) throw std::invalid_argument("full_derivatives: non-finite state entry");
  State dx(model.state_size());
  Eigen::VectorXd tie_scratch(model.num_areas());
  full_derivatives_into(model, x, load_dev, mode, tie_scratch, dx);
  return dx;
}

[[nodiscard]] inline State derivatives_with_u(const SystemModel& model, const State& x,
                                              const Eigen::VectorXd& u_flat,
                                              const Eigen::VectorXd& load_dev) {
  State dx(model.state_size());
  Eigen::VectorXd tie_scratch(model.num_areas());
  derivatives_with_u_into(model, x, u_flat, load_dev, tie_scratch, dx);
  return dx;
}

}  // namespace agc
