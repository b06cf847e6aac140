#pragma once

// Frequency-domain and stability analysis of the reduced AGC dynamics.
//
// Everything here exploits the rank-one structure B = I - gamma 1': the
// spectrum, inverse, and resolvent have closed forms, and the entrywise
// transfer functions of the unsaturated loop tau eta' = -B (eta - w) reduce
// to first-order expressions in tau*s.

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "agc/reduced.hpp"
#include "agc/types.hpp"

namespace agc {

using Complex = std::complex<double>;

// ===== Rank-one update algebra =====

// Eigenvalues of I - gamma 1': entry 0 is 1 - sum(gamma) (the only
// tuning-dependent eigenvalue), the remaining n-1 entries are 1.
[[nodiscard]] inline Eigen::VectorXd rank_one_update_eigenvalues(const Eigen::VectorXd& gamma) {
  Eigen::VectorXd ev = Eigen::VectorXd::Ones(gamma.size());
  ev[0] = 1.0 - gamma.sum();
  return ev;
}

// (I - gamma 1')^{-1} = I + gamma 1' / (1 - sum(gamma)).
[[nodiscard]] inline Eigen::MatrixXd rank_one_update_inverse(const Eigen::VectorXd& gamma) {
  const double pivot = 1.0 - gamma.sum();
  if (std::abs(pivot) < 1e-14)
    throw std::domain_error("rank_one_update_inverse: matrix is singular");
  const int n = static_cast<int>(gamma.size());
  return Eigen::MatrixXd::Identity(n, n) + (gamma / pivot) * Eigen::RowVectorXd::Ones(n);
}

// (s I + I - gamma 1')^{-1} = 1/(s+1) [ I + gamma 1' / ((s+1) - sum(gamma)) ].
[[nodiscard]] inline Eigen::MatrixXcd rank_one_update_resolvent(const Eigen::VectorXd& gamma,
                                                                Complex s) {
  const Complex a = s + 1.0;
  const Complex pivot = a - gamma.sum();
  if (std::abs(a) < 1e-14 || std::abs(pivot) < 1e-14)
    throw std::domain_error("rank_one_update_resolvent: s is a pole");
  const int n = static_cast<int>(gamma.size());
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(n, n);
  out += (gamma.cast<Complex>() / pivot) * Eigen::RowVectorXcd::Ones(n);
  out /= a;
  return out;
}

// ===== LTI loop model =====

// Unsaturated reduced loop with a common integrator time constant:
//   tau * eta' = -B (eta - w),  B = I - gamma 1'.
struct LtiReducedModel {
  Eigen::VectorXd gamma;
  double tau = 60.0;

  [[nodiscard]] int num_areas() const { return static_cast<int>(gamma.size()); }
  [[nodiscard]] double gamma_sum() const { return gamma.sum(); }
  // Mistuning of area i relative to the aggregate response; for the plain ACE
  // coupling this equals (bias_i - frc_i) / sum(frc).
  [[nodiscard]] double overbias(int i) const { return -gamma[i]; }
};

[[nodiscard]] inline LtiReducedModel make_lti(Eigen::VectorXd gamma, double tau) {
  if (gamma.size() == 0) throw std::invalid_argument("make_lti: empty gamma");
  if (!(tau > 0.0)) throw std::invalid_argument("make_lti: tau must be positive");
  return LtiReducedModel{std::move(gamma), tau};
}

[[nodiscard]] inline LtiReducedModel lti_from_tuning(const Eigen::VectorXd& bias,
                                                     const Eigen::VectorXd& frc, double tau,
                                                     AgcVariant variant,
                                                     const Eigen::VectorXd& droop_sum =
                                                         Eigen::VectorXd()) {
  Eigen::VectorXd eff_bias = bias;
  if (variant == AgcVariant::Textbook) {
    if (droop_sum.size() != bias.size())
      throw std::invalid_argument("lti_from_tuning: textbook coupling needs droop sums");
    eff_bias += droop_sum;
  }
  return make_lti((frc - eff_bias) / frc.sum(), tau);
}

[[nodiscard]] inline LtiReducedModel lti_from_model(const SystemModel& model, AgcVariant variant) {
  const Eigen::VectorXd tau = model.tau_vector();
  for (int k = 1; k < model.num_areas(); ++k)
    if (tau[k] != tau[0])
      throw std::invalid_argument(
          "transfer-function analysis requires a common agc_time_constant across areas");
  return lti_from_tuning(model.bias_vector(), model.frc_vector(), tau[0], variant,
                         model.droop_sum_vector());
}

// ===== Spectrum =====

enum class Dominance { UnitCluster, BiasMode, AllEqual };

// Continuous-time poles: a cluster of n-1 poles at -1/tau and one
// tuning-dependent pole at -(1 - sum(gamma))/tau. The slower of the two
// (closer to the imaginary axis) dominates the settling tail.
struct ReducedSpectrum {
  double cluster_rate = 0.0;    // -1/tau
  double bias_mode_rate = 0.0;  // -(1 - sum(gamma))/tau
  Dominance dominance = Dominance::AllEqual;

  [[nodiscard]] double dominant_rate() const {
    return std::max(cluster_rate, bias_mode_rate);
  }
};

[[nodiscard]] inline ReducedSpectrum reduced_spectrum(const LtiReducedModel& m) {
  ReducedSpectrum s;
  s.cluster_rate = -1.0 / m.tau;
  s.bias_mode_rate = -(1.0 - m.gamma_sum()) / m.tau;
  if (s.bias_mode_rate > s.cluster_rate)
    s.dominance = Dominance::BiasMode;
  else if (s.bias_mode_rate < s.cluster_rate)
    s.dominance = Dominance::UnitCluster;
  else
    s.dominance = Dominance::AllEqual;
  return s;
}

// ===== Transfer functions =====

// Load-to-integrator map T(s) = (tau s I + B)^{-1} B. Entrywise,
//   T_ij(s) = 1/(tau s + 1) [ delta_ij - gamma_i tau s / (tau s + 1 - sum(gamma)) ],
// so T(0) = I: every area eventually tracks its own load deviation.
[[nodiscard]] inline Complex transfer_T(const LtiReducedModel& m, int i, int j, Complex s) {
  const Complex a = m.tau * s + 1.0;
  const Complex pivot = a - m.gamma_sum();
  if (std::abs(a) < 1e-14 || std::abs(pivot) < 1e-14)
    throw std::domain_error("transfer_T: s is a pole");
  const Complex delta = i == j ? 1.0 : 0.0;
  return (delta - m.gamma[i] * (a - 1.0) / pivot) / a;
}

// Load-to-drive map S(s) = -tau s T(s): the transfer from load deviation to
// the integrator drive -tau eta' (the area control error when the dynamics
// coupling equals the ACE coupling). S(0) = 0 and the high-frequency limit of
// |S_ij| is |delta_ij - gamma_i|.
[[nodiscard]] inline Complex transfer_S(const LtiReducedModel& m, int i, int j, Complex s) {
  return -m.tau * s * transfer_T(m, i, j, s);
}

[[nodiscard]] inline double hf_gain_limit(const LtiReducedModel& m, int i, int j) {
  const double delta = i == j ? 1.0 : 0.0;
  return std::abs(delta - m.gamma[i]);
}

// Log-spaced frequency grid, rad/s.
[[nodiscard]] inline Eigen::VectorXd default_bode_grid(double omega_lo = 1e-4,
                                                       double omega_hi = 1e2, int points = 2000) {
  if (!(omega_lo > 0.0 && omega_hi > omega_lo && points >= 2))
    throw std::invalid_argument("default_bode_grid: bad grid parameters");
  Eigen::VectorXd w(points);
  const double llo = std::log10(omega_lo);
  const double lhi = std::log10(omega_hi);
  for (int k = 0; k < points; ++k)
    w[k] = std::pow(10.0, llo + (lhi - llo) * k / (points - 1));
  return w;
}

struct BodeResult {
  Eigen::VectorXd omega;
  Eigen::VectorXd magnitude;
  double grid_peak = 0.0;      // largest magnitude found on (refined) grid
  double omega_at_peak = 0.0;  // argmax; meaningful only when interior
  double hf_limit = 0.0;
  double sup_gain = 0.0;       // max of grid peak and high-frequency limit
};

// Magnitude sweep of S_ij with golden-section refinement around the grid
// argmax. The supremum may sit at the high-frequency limit without being
// attained, so sup_gain takes the limit into account.
[[nodiscard]] inline BodeResult bode_S(const LtiReducedModel& m, int i, int j,
                                       const Eigen::VectorXd& omega) {
  if (omega.size() < 2) throw std::invalid_argument("bode_S: grid needs at least two points");
  BodeResult out;
  out.omega = omega;
  out.magnitude.resize(omega.size());

  auto mag = [&](double w) { return std::abs(transfer_S(m, i, j, Complex(0.0, w))); };

  int argmax = 0;
  for (int k = 0; k < omega.size(); ++k) {
    out.magnitude[k] = mag(omega[k]);
    if (out.magnitude[k] > out.magnitude[argmax]) argmax = k;
  }
  out.grid_peak = out.magnitude[argmax];
  out.omega_at_peak = omega[argmax];

  if (argmax > 0 && argmax + 1 < omega.size()) {
    // Golden-section maximization on log frequency between the neighbors.
    double lo = std::log(omega[argmax - 1]);
    double hi = std::log(omega[argmax + 1]);
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - invphi * (hi - lo);
    double d = lo + invphi * (hi - lo);
    double fc = mag(std::exp(c));
    double fd = mag(std::exp(d));
    for (int it = 0; it < 80 && hi - lo > 1e-12; ++it) {
      if (fc > fd) {
        hi = d;
        d = c;
        fd = fc;
        c = hi - invphi * (hi - lo);
        fc = mag(std::exp(c));
      } else {
        lo = c;
        c = d;
        fc = fd;
        d = lo + invphi * (hi - lo);
        fd = mag(std::exp(d));
      }
    }
    const double w_ref = std::exp(0.5 * (lo + hi));
    const double m_ref = mag(w_ref);
    if (m_ref > out.grid_peak) {
      out.grid_peak = m_ref;
      out.omega_at_peak = w_ref;
    }
  }

  out.hf_limit = hf_gain_limit(m, i, j);
  out.sup_gain = std::max(out.grid_peak, out.hf_limit);
  return out;
}

// ===== Transient peak of cross coupling =====

// Classical closed-form estimate of the normalized transient peak that a
// mistuned area's integrator reaches when the load step lands elsewhere:
//   peak ~ O_i (1 + sum(O))^{sum(O)/(1 + sum(O))}.
// Requires 1 + sum(O) > 0 (the tuning-dependent mode must be stable).
[[nodiscard]] inline double peak_eta(double overbias_i, double overbias_sum) {
  const double a = 1.0 + overbias_sum;
  if (!(a > 0.0))
    throw std::domain_error("peak_eta: 1 + total overbias must be positive");
  return overbias_i * std::pow(a, overbias_sum / a);
}

// Exact extremum of the same response. With a = 1 + sum(O) and time measured
// in units of tau, the cross response to a unit step is
//   eta_i(x) = O_i (exp(-x) - exp(-a x)) / (a - 1),
// extremal at x* = ln(a)/(a-1) with value O_i a^{-a/(a-1)}. The a -> 1 limit
// is O_i / e at x* = 1.
struct StepExtremum {
  double value = 0.0;
  double time_over_tau = 0.0;
};

[[nodiscard]] inline StepExtremum step_response_extremum(double overbias_i, double overbias_sum) {
  const double a = 1.0 + overbias_sum;
  if (!(a > 0.0))
    throw std::domain_error("step_response_extremum: 1 + total overbias must be positive");
  // r = ln(a)/(a-1), series near a = 1 to dodge 0/0.
  const double u = a - 1.0;
  const double r = std::abs(u) < 1e-6 ? 1.0 - u / 2.0 + u * u / 3.0 : std::log(a) / u;
  StepExtremum out;
  out.time_over_tau = r;
  out.value = overbias_i * std::exp(-a * r);
  return out;
}

// ===== Lyapunov certificate =====

namespace detail {

// Integral of the clamped single-generator response over [lo, hi], lo <= hi.
[[nodiscard]] inline double clamped_response_integral(const GeneratorParams& g, double lo,
                                                      double hi) {
  if (!g.agc_participant || g.participation <= 0.0) return 0.0;
  const double xi_lo = (g.u_min - g.base_setpoint) / g.participation;
  const double xi_hi = (g.u_max - g.base_setpoint) / g.participation;
  const double lo_val = g.u_min - g.base_setpoint;
  const double hi_val = g.u_max - g.base_setpoint;

  double acc = 0.0;
  const double left_end = std::min(hi, xi_lo);
  if (left_end > lo) acc += (left_end - lo) * lo_val;
  const double mid_lo = std::max(lo, xi_lo);
  const double mid_hi = std::min(hi, xi_hi);
  if (mid_hi > mid_lo) acc += 0.5 * g.participation * (mid_hi * mid_hi - mid_lo * mid_lo);
  const double right_start = std::max(lo, xi_hi);
  if (hi > right_start) acc += (hi - right_start) * hi_val;
  return acc;
}

[[nodiscard]] inline double phi_integral(const AreaParams& area, double from, double to) {
  const double sign = to >= from ? 1.0 : -1.0;
  const double lo = std::min(from, to);
  const double hi = std::max(from, to);
  double acc = 0.0;
  for (const GeneratorParams& g : area.generators) acc += clamped_response_integral(g, lo, hi);
  return sign * acc;
}

}  // namespace detail

// Storage-style candidate around an equilibrium eta_bar:
//   V = 1/2 sum_k d_k tau_k integral_{eta_bar_k}^{eta_k} (phi_k(xi) - phi_k(eta_bar_k)) dxi.
// Nonnegative because each phi_k is nondecreasing; the integral is evaluated
// in closed form from the piecewise-linear structure.
[[nodiscard]] inline double lyapunov_value(const ReducedModel& r, const Eigen::VectorXd& d,
                                           const Eigen::VectorXd& eta,
                                           const Eigen::VectorXd& eta_bar) {
  const int n = r.num_areas();
  if (d.size() != n || eta.size() != n || eta_bar.size() != n)
    throw std::invalid_argument("lyapunov_value: dimension mismatch");
  double v = 0.0;
  for (int k = 0; k < n; ++k) {
    if (!(d[k] > 0.0)) throw std::invalid_argument("lyapunov_value: weights must be positive");
    const AreaParams& area = r.areas[static_cast<std::size_t>(k)];
    const double anchor = phi(area, eta_bar[k]);
    const double integral =
        detail::phi_integral(area, eta_bar[k], eta[k]) - (eta[k] - eta_bar[k]) * anchor;
    v += 0.5 * d[k] * r.tau[k] * integral;
  }
  return v;
}

// Decrease margin of the diagonal certificate: lambda_min of sym(D B). A
// positive margin certifies exponential decay of the storage candidate along
// unsaturated trajectories.
[[nodiscard]] inline double diagonal_certificate_margin(const Eigen::MatrixXd& b,
                                                        const Eigen::VectorXd& d) {
  if (b.rows() != b.cols() || d.size() != b.rows())
    throw std::invalid_argument("diagonal_certificate_margin: dimension mismatch");
  const Eigen::MatrixXd db = d.asDiagonal() * b;
  const Eigen::MatrixXd sym = 0.5 * (db + db.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

struct CertificateSearchResult {
  Eigen::VectorXd d;
  double margin = 0.0;
  bool found = false;  // margin strictly positive
};

// Coordinate search for positive diagonal weights maximizing the margin.
// Multiplicative moves on each coordinate, weights confined to [1e-2, 1e2],
// at most max_sweeps passes.
[[nodiscard]] inline CertificateSearchResult find_diagonal_certificate(const Eigen::MatrixXd& b,
                                                                       int max_sweeps = 50) {
  const int n = static_cast<int>(b.rows());
  CertificateSearchResult res;
  res.d = Eigen::VectorXd::Ones(n);
  res.margin = diagonal_certificate_margin(b, res.d);

  constexpr double kLo = 1e-2;
  constexpr double kHi = 1e2;
  const double moves[] = {0.25, 0.5, 0.8, 1.25, 2.0, 4.0};

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool improved = false;
    for (int k = 0; k < n; ++k) {
      double best_dk = res.d[k];
      double best_margin = res.margin;
      for (double mlt : moves) {
        const double cand = std::clamp(res.d[k] * mlt, kLo, kHi);
        if (cand == res.d[k]) continue;
        Eigen::VectorXd trial = res.d;
        trial[k] = cand;
        const double margin = diagonal_certificate_margin(b, trial);
        if (margin > best_margin) {
          best_margin = margin;
          best_dk = cand;
        }
      }
      if (best_dk != res.d[k]) {
        res.d[k] = best_dk;
        res.margin = best_margin;
        improved = true;
      }
    }
    if (!improved) break;
  }
  res.found = res.margin > 0.0;
  return res;
}

}  // namespace agc
