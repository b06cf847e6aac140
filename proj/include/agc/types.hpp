#pragma once

// Core parameter types and unit conventions for the multi-area AGC toolkit.
//
// Everything is expressed in per-unit on a single common MVA base. Frequency
// deviations are per-unit of nominal frequency, powers per-unit of the base,
// so droop R and load damping D are pu/pu and a frequency-response
// characteristic beta = D + sum(1/R) is pu/pu as well.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace agc {

// ===== Constants and defaults =====

inline constexpr double kNominalFrequencyHz = 60.0;
inline constexpr double kDefaultBaseMva = 900.0;

// Full-model defaults. The lags place primary-control settling well below the
// slowest admissible AGC time constant (30 s), preserving the two-time-scale
// separation the reduced models rely on.
inline constexpr double kDefaultInertiaS = 6.5;           // H, s
inline constexpr double kDefaultGovernorLagS = 0.2;       // T_g, s
inline constexpr double kDefaultTurbineLagS = 0.5;        // T_t, s
inline constexpr double kDefaultMeasurementFilterS = 1.0; // T_f, s
inline constexpr double kDefaultTieStiffnessPu = 2.0;     // P_max, pu

inline constexpr double kMinAgcTimeConstantS = 1.0;
inline constexpr double kMaxAgcTimeConstantS = 10000.0;

// ===== Errors =====

// A requested operating point exceeds the configured regulation capacity.
// Mapped to CLI exit code 2.
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

// Solver breakdown: Newton non-convergence, trajectory blow-up, loss of
// synchronism. Mapped to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// ===== Controller variants =====

// Simplified: the area integrator consumes only the area control error.
// Textbook: adds a feedback sum of (commanded minus measured) unit powers
// over every generator of the area, participants or not.
enum class AgcVariant { Simplified, Textbook };

[[nodiscard]] inline const char* to_string(AgcVariant v) {
  return v == AgcVariant::Simplified ? "simplified" : "textbook";
}

// ===== Parameter structs =====

struct GeneratorParams {
  // Primary droop gain, pu frequency per pu power. The governor reduces
  // output by freq_dev / droop.
  double droop = 0.05;

  // Scheduled load reference u*, pu. Must lie inside [u_min, u_max].
  double base_setpoint = 0.0;
  double u_min = -0.5;
  double u_max = 0.5;

  // AGC allocation. participation is the fraction of the area control signal
  // assigned to this unit; participants within an area must sum to 1.
  // Non-participants hold u* and must carry participation 0.
  bool agc_participant = false;
  double participation = 0.0;

  double governor_lag = kDefaultGovernorLagS; // T_g, s
  double turbine_lag = kDefaultTurbineLagS;   // T_t, s
};

struct AreaParams {
  std::string name;

  double load_damping = 0.0;        // D, pu/pu, >= 0
  double inertia = kDefaultInertiaS; // H, s, > 0

  // ACE bias weight on frequency deviation, pu/pu, > 0. Equal to the area
  // FRC when tuned for non-interaction, larger when overbiased.
  double frequency_bias = 0.0;

  double agc_time_constant = 60.0;  // tau, s, validated to [1, 10000]

  // First-order measurement filter applied to freq_dev and net-interchange
  // deviation before ACE formation; 0 disables filtering (pass-through).
  double measurement_filter = kDefaultMeasurementFilterS;

  std::vector<GeneratorParams> generators;

  // Frequency response characteristic beta_k = D + sum_i 1/R_i.
  [[nodiscard]] double frc() const {
    double s = load_damping;
    for (const auto& g : generators) s += 1.0 / g.droop;
    return s;
  }

  // Aggregate inverse droop over every generator (the R_k^{-1} of the area).
  [[nodiscard]] double droop_sum() const {
    double s = 0.0;
    for (const auto& g : generators) s += 1.0 / g.droop;
    return s;
  }
};

// Lossless sine-coupled tie between two areas. Flow deviation from a to b is
// stiffness * (sin(delta_a - delta_b) - sin of the scheduled difference).
struct TieLine {
  int area_a = 0;
  int area_b = 0;
  double stiffness = kDefaultTieStiffnessPu; // P_max, pu
};

// Additive net-load step applied to one area at a fixed time.
struct Disturbance {
  double time = 0.0; // s, >= 0
  int area = 0;
  double step = 0.0; // pu, additive
};

}  // namespace agc
