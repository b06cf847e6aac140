#pragma once

// Implementations of the command-line verbs. Each run_* function does the
// work and writes its artifacts; error reporting is by exception so the
// binary can map InfeasibleError and NumericalError to distinct exit codes.
// The output directory comes from --out when given, otherwise from the
// scenario file's output.directory.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "agc/analysis.hpp"
#include "agc/csv_io.hpp"
#include "agc/reduced.hpp"
#include "agc/scenario_io.hpp"
#include "agc/sim.hpp"
#include "agc/steady_state.hpp"

namespace agc {

struct CommonArgs {
  std::string scenario_path;
  std::string out_dir;  // empty: fall back to the scenario's output.directory
  std::optional<AgcVariant> variant;
};

namespace detail {

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir + "'");
}

[[nodiscard]] inline ScenarioFile load_with_variant(const CommonArgs& args) {
  ScenarioFile file = load_scenario(args.scenario_path);
  if (args.variant) file.scenario.variant = *args.variant;
  return file;
}

[[nodiscard]] inline std::string resolve_out_dir(const CommonArgs& args,
                                                 const ScenarioFile& file) {
  if (!args.out_dir.empty()) return args.out_dir;
  if (file.out_directory && !file.out_directory->empty()) return *file.out_directory;
  throw std::invalid_argument("no output directory: pass --out or set output.directory");
}

[[nodiscard]] inline bool has_channel(const TimeSeries& ts, const std::string& name) {
  return std::find(ts.channel_names.begin(), ts.channel_names.end(), name) !=
         ts.channel_names.end();
}

// Restrict a series to the selected channels, keeping only names the series
// actually has. The caller is responsible for rejecting names unknown to
// every written series.
[[nodiscard]] inline TimeSeries apply_selection(const TimeSeries& ts,
                                                const std::vector<std::string>& channels) {
  if (channels.empty()) return ts;
  std::vector<std::string> present;
  for (const std::string& name : channels)
    if (has_channel(ts, name)) present.push_back(name);
  return select_channels(ts, present);
}

[[nodiscard]] inline std::vector<double> event_times(const Scenario& sc) {
  std::vector<double> t;
  for (const Disturbance& d : sc.disturbances) t.push_back(d.time);
  return t;
}

[[nodiscard]] inline double max_step_magnitude(const Scenario& sc) {
  double m = 0.0;
  for (const Disturbance& d : sc.disturbances) m = std::max(m, std::abs(d.step));
  return m;
}

[[nodiscard]] inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

[[nodiscard]] inline nlohmann::json vector_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v[k]);
  return out;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

[[nodiscard]] inline nlohmann::json comparison_json(const ComparisonReport& rep,
                                                    double threshold) {
  nlohmann::json j;
  j["exclusion_s"] = rep.exclusion_s;
  j["worst_rms"] = rep.worst_rms;
  j["worst_max_abs"] = rep.worst_max_abs;
  j["threshold_rms"] = threshold;
  j["pass"] = rep.worst_rms <= threshold;
  j["channels"] = nlohmann::json::array();
  for (const ChannelError& c : rep.channels)
    j["channels"].push_back({{"name", c.name},
                             {"rms", c.rms},
                             {"max_abs", c.max_abs},
                             {"samples", c.samples}});
  return j;
}

[[nodiscard]] inline const char* dominance_name(Dominance d) {
  switch (d) {
    case Dominance::UnitCluster: return "unit_cluster";
    case Dominance::BiasMode: return "bias_mode";
    case Dominance::AllEqual: return "all_equal";
  }
  return "unknown";
}

}  // namespace detail

// ===== simulate =====

inline void run_simulate(const CommonArgs& args) {
  const ScenarioFile file = detail::load_with_variant(args);
  const Scenario& sc = file.scenario;
  const SystemModel model = validate_scenario(sc);
  const std::string out_dir = detail::resolve_out_dir(args, file);

  const TimeSeries ts = integrate_full(model, sc);
  const TimeSeries selected =
      file.channels.empty() ? ts : select_channels(ts, file.channels);
  detail::ensure_dir(out_dir);
  const std::string path = out_dir + "/timeseries_full.csv";
  write_csv(path, selected);
  std::cout << "simulated '" << sc.name << "' (" << to_string(sc.variant) << "): "
            << selected.num_samples() << " samples, " << selected.channel_names.size()
            << " channels -> " << path << "\n";
}

// ===== reduce =====

inline void run_reduce(const CommonArgs& args) {
  const ScenarioFile file = detail::load_with_variant(args);
  const Scenario& sc = file.scenario;
  const SystemModel model = validate_scenario(sc);
  const ReducedModel reduced = ReducedModel::build(model, sc.variant);
  const std::string out_dir = detail::resolve_out_dir(args, file);

  const TimeSeries ts = integrate_reduced(reduced, sc);
  const TimeSeries selected =
      file.channels.empty() ? ts : select_channels(ts, file.channels);
  detail::ensure_dir(out_dir);
  const std::string csv_path = out_dir + "/timeseries_reduced.csv";
  write_csv(csv_path, selected);

  nlohmann::json j;
  j["variant"] = to_string(sc.variant);
  j["b_dyn"] = detail::matrix_json(reduced.b_dyn);
  j["b_ace"] = detail::matrix_json(reduced.b_ace);
  j["tau_s"] = detail::vector_json(reduced.tau);
  j["frequency_bias"] = detail::vector_json(reduced.bias);
  j["frc"] = detail::vector_json(reduced.frc);
  j["droop_sum"] = detail::vector_json(reduced.droop_sum);
  j["overbias"] = detail::vector_json(overbias_of(reduced.bias, reduced.frc));
  const std::string json_path = out_dir + "/reduced_model.json";
  detail::write_json(json_path, j);

  std::cout << "reduced '" << sc.name << "' (" << to_string(sc.variant) << "): "
            << selected.num_samples() << " samples -> " << csv_path << ", " << json_path
            << "\n";
}

// ===== compare =====

inline void run_compare(const CommonArgs& args, double exclusion_s) {
  const ScenarioFile file = detail::load_with_variant(args);
  const Scenario& sc = file.scenario;
  const SystemModel model = validate_scenario(sc);
  const ReducedModel reduced = ReducedModel::build(model, sc.variant);
  const std::string out_dir = detail::resolve_out_dir(args, file);

  const TimeSeries full = integrate_full(model, sc);
  const TimeSeries red = integrate_reduced(reduced, sc);
  for (const std::string& name : file.channels)
    if (!detail::has_channel(full, name) && !detail::has_channel(red, name))
      throw std::invalid_argument("unknown channel '" + name + "' in output.channels");
  detail::ensure_dir(out_dir);
  write_csv(out_dir + "/timeseries_full.csv", detail::apply_selection(full, file.channels));
  write_csv(out_dir + "/timeseries_reduced.csv", detail::apply_selection(red, file.channels));

  const ComparisonReport rep = compare(full, red, detail::event_times(sc), exclusion_s);
  const double threshold = 0.05 * detail::max_step_magnitude(sc);
  nlohmann::json j = detail::comparison_json(rep, threshold);
  j["scenario"] = sc.name;
  j["variant"] = to_string(sc.variant);
  detail::write_json(out_dir + "/compare.json", j);

  std::cout << "compared '" << sc.name << "': worst rms " << rep.worst_rms
            << (rep.worst_rms <= threshold ? " (pass, <= " : " (FAIL, > ") << threshold
            << ") -> " << out_dir << "/compare.json\n";
}

// ===== analyze =====

// sections: any subset of {eig, bode, peak, matrices, steady_state}; empty
// selects all of them.
inline void run_analyze(const CommonArgs& args, std::vector<std::string> sections = {}) {
  static const std::vector<std::string> kAll = {"eig", "bode", "peak", "matrices",
                                                "steady_state"};
  if (sections.empty()) sections = kAll;
  for (const std::string& s : sections)
    if (std::find(kAll.begin(), kAll.end(), s) == kAll.end())
      throw std::invalid_argument("unknown analyze section '" + s +
                                  "' (expected eig, bode, peak, matrices, steady_state)");
  auto wanted = [&](const char* s) {
    return std::find(sections.begin(), sections.end(), s) != sections.end();
  };

  const ScenarioFile file = detail::load_with_variant(args);
  const Scenario& sc = file.scenario;
  const SystemModel model = validate_scenario(sc);
  const ReducedModel reduced = ReducedModel::build(model, sc.variant);
  const std::string out_dir = detail::resolve_out_dir(args, file);
  detail::ensure_dir(out_dir);
  const int n = model.num_areas();

  nlohmann::json j;
  j["scenario"] = sc.name;
  j["variant"] = to_string(sc.variant);

  if (wanted("matrices")) {
    const Eigen::MatrixXd b_txt =
        textbook_coupling_matrix(reduced.bias, reduced.frc, reduced.droop_sum);
    j["matrices"] = {{"b_ace", detail::matrix_json(reduced.b_ace)},
                     {"b_txt", detail::matrix_json(b_txt)},
                     {"b_dyn", detail::matrix_json(reduced.b_dyn)},
                     {"tau_s", detail::vector_json(reduced.tau)},
                     {"frequency_bias", detail::vector_json(reduced.bias)},
                     {"frc", detail::vector_json(reduced.frc)},
                     {"droop_sum", detail::vector_json(reduced.droop_sum)},
                     {"overbias", detail::vector_json(overbias_of(reduced.bias, reduced.frc))}};
  }

  // Spectrum and gain sweeps need one common integrator time constant.
  bool common_tau = true;
  for (int k = 1; k < n; ++k) common_tau = common_tau && reduced.tau[k] == reduced.tau[0];

  if (wanted("eig")) {
    if (common_tau) {
      const LtiReducedModel lti = lti_from_model(model, sc.variant);
      const ReducedSpectrum spec = reduced_spectrum(lti);
      j["eig"] = {{"matrix_eigenvalues",
                   detail::vector_json(rank_one_update_eigenvalues(lti.gamma))},
                  {"cluster_rate_per_s", spec.cluster_rate},
                  {"bias_mode_rate_per_s", spec.bias_mode_rate},
                  {"dominant_rate_per_s", spec.dominant_rate()},
                  {"dominance", detail::dominance_name(spec.dominance)}};
    } else {
      j["eig"] = {{"note", "requires a common agc_time_constant across areas"}};
    }
  }

  if (wanted("bode")) {
    if (common_tau) {
      const LtiReducedModel lti = lti_from_model(model, sc.variant);
      const Eigen::VectorXd grid = default_bode_grid();
      nlohmann::json sup = nlohmann::json::array();
      nlohmann::json hf = nlohmann::json::array();
      std::vector<std::string> files;
      for (int i = 0; i < n; ++i) {
        nlohmann::json sup_row = nlohmann::json::array();
        nlohmann::json hf_row = nlohmann::json::array();
        std::vector<BodeResult> row;
        for (int jj = 0; jj < n; ++jj) {
          row.push_back(bode_S(lti, i, jj, grid));
          sup_row.push_back(row.back().sup_gain);
          hf_row.push_back(row.back().hf_limit);
        }
        sup.push_back(sup_row);
        hf.push_back(hf_row);

        const std::string path = out_dir + "/bode_area" + std::to_string(i + 1) + ".csv";
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
        out << "omega_rad_s";
        for (int jj = 0; jj < n; ++jj) out << ",mag_S_from_load" << jj + 1;
        out << '\n';
        char buf[32];
        for (Eigen::Index g = 0; g < grid.size(); ++g) {
          std::snprintf(buf, sizeof buf, "%.17g", grid[g]);
          out << buf;
          for (int jj = 0; jj < n; ++jj) {
            std::snprintf(buf, sizeof buf, "%.17g",
                          row[static_cast<std::size_t>(jj)].magnitude[g]);
            out << ',' << buf;
          }
          out << '\n';
        }
        files.push_back(path);
      }
      j["bode"] = {{"sup_gain", sup}, {"hf_limit", hf}, {"files", files}};
    } else {
      j["bode"] = {{"note", "requires a common agc_time_constant across areas"}};
    }
  }

  if (wanted("peak")) {
    // Transient-peak table over single-area mistuning, estimate next to the
    // exact extremum of the underlying response.
    const std::string path = out_dir + "/peak.csv";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "overbias,peak_estimate,exact_extremum,exact_time_over_tau\n";
    char buf[32];
    for (int i = -10; i <= 10; ++i) {
      const double o = 0.05 * i;
      const StepExtremum ex = step_response_extremum(o, o);
      std::snprintf(buf, sizeof buf, "%.17g", o);
      out << buf;
      std::snprintf(buf, sizeof buf, "%.17g", peak_eta(o, o));
      out << ',' << buf;
      std::snprintf(buf, sizeof buf, "%.17g", ex.value);
      out << ',' << buf;
      std::snprintf(buf, sizeof buf, "%.17g", ex.time_over_tau);
      out << ',' << buf << '\n';
    }
    j["peak"] = {{"file", path}};
  }

  if (wanted("steady_state")) {
    // Post-disturbance equilibrium at the final cumulative load.
    const Eigen::VectorXd w = load_at(sc, sc.horizon_s);
    const Eigen::VectorXd eta_bar = equilibrium_eta(reduced, w);
    Eigen::VectorXd u_flat(model.total_generators());
    for (int k = 0; k < n; ++k) {
      const std::vector<double> u = allocate(model.area(k), eta_bar[k]);
      for (std::size_t i = 0; i < u.size(); ++i)
        u_flat[model.gen_flat_index(k, static_cast<int>(i))] = u[i];
    }
    const SteadyStateResult ss = solve_steady_state(model, u_flat, w, eta_bar);
    const IdentityReport rep = verify_steady_state_identities(model, ss.state, u_flat, w);
    const Measurements m = measurements(model, ss.state, u_flat);
    j["steady_state"] = {{"load_dev", detail::vector_json(w)},
                         {"eta_bar", detail::vector_json(eta_bar)},
                         {"freq_dev", m.freq_raw[0]},
                         {"ni_dev", detail::vector_json(m.ni_raw)},
                         {"newton_iterations", ss.iterations},
                         {"identities_pass", rep.pass()},
                         {"worst_identity_violation",
                          std::max({rep.synchronism, rep.interchange_sum, rep.swing_balance,
                                    rep.governor_statics, rep.measurement_pin})}};
  }

  detail::write_json(out_dir + "/analysis.json", j);
  std::cout << "analyzed '" << sc.name << "' -> " << out_dir << "/analysis.json\n";
}

// ===== experiment =====

namespace detail {

[[nodiscard]] inline nlohmann::json benchmark_summary_json(const BenchmarkRun& run,
                                                           BiasTuning tuning) {
  nlohmann::json j;
  j["tuning"] = to_string(tuning);
  j["variant"] = to_string(run.scenario.variant);
  j["step_pu"] = run.step_size;
  j["overbias"] = vector_json(run.overbias);
  j["spectrum"] = {{"cluster_rate_per_s", run.spectrum.cluster_rate},
                   {"bias_mode_rate_per_s", run.spectrum.bias_mode_rate},
                   {"dominant_rate_per_s", run.spectrum.dominant_rate()},
                   {"dominance", dominance_name(run.spectrum.dominance)}};
  j["peak_estimate_area1"] = run.formula_peak;
  j["exact_extremum_area1"] = {{"value", run.exact_extremum.value},
                               {"time_over_tau", run.exact_extremum.time_over_tau}};
  j["cross_extremum_full"] = {{"normalized", run.cross_full.extremum_normalized},
                              {"time_s", run.cross_full.time_s}};
  j["cross_extremum_reduced"] = {{"normalized", run.cross_reduced.extremum_normalized},
                                 {"time_s", run.cross_reduced.time_s}};
  j["settle_full_s"] = run.settle_full_s;
  j["settle_reduced_s"] = run.settle_reduced_s;
  const double threshold = 0.05 * max_step_magnitude(run.scenario);
  j["comparison"] = comparison_json(run.comparison, threshold);
  return j;
}

inline void write_benchmark_outputs(const std::string& dir, const BenchmarkRun& run,
                                    BiasTuning tuning) {
  ensure_dir(dir);
  write_csv(dir + "/timeseries_full.csv", run.full);
  write_csv(dir + "/timeseries_reduced.csv", run.reduced);
  write_json(dir + "/summary.json", benchmark_summary_json(run, tuning));
  const double threshold = 0.05 * max_step_magnitude(run.scenario);
  write_json(dir + "/compare.json", comparison_json(run.comparison, threshold));

  // Overlay of the first area's integrator on the full-model grid.
  const std::string overlay = dir + "/eta1_overlay.csv";
  std::ofstream out(overlay);
  if (!out) throw std::runtime_error("cannot open '" + overlay + "' for writing");
  out << "time_s,eta1_full,eta1_reduced\n";
  const Eigen::VectorXd yf = run.full.channel("area1.eta");
  const Eigen::VectorXd yr = run.reduced.channel("area1.eta");
  char buf[32];
  for (Eigen::Index s = 0; s < run.full.num_samples(); ++s) {
    std::snprintf(buf, sizeof buf, "%.17g", run.full.time[s]);
    out << buf;
    std::snprintf(buf, sizeof buf, "%.17g", yf[s]);
    out << ',' << buf;
    std::snprintf(buf, sizeof buf, "%.17g", interp(run.reduced.time, yr, run.full.time[s]));
    out << ',' << buf << '\n';
  }
}

}  // namespace detail

// Runs the two-area benchmark across all three bias tunings, writing one
// directory per tuning plus an aggregate summary. jobs > 1 runs tunings on
// worker threads.
inline void run_experiment(const std::string& out_dir, std::optional<AgcVariant> variant,
                           double exclusion_s, int jobs) {
  if (out_dir.empty())
    throw std::invalid_argument("no output directory: pass --out");
  const AgcVariant v = variant.value_or(AgcVariant::Simplified);
  const BiasTuning tunings[] = {BiasTuning::Overbiased, BiasTuning::Underbiased,
                                BiasTuning::Matched};
  detail::ensure_dir(out_dir);

  std::vector<BenchmarkRun> runs(3);
  std::vector<std::exception_ptr> errors(3);
  const int workers = std::max(1, std::min(jobs, 3));

  auto work = [&](int idx) {
    try {
      runs[static_cast<std::size_t>(idx)] =
          run_benchmark_experiment(tunings[idx], v, exclusion_s);
    } catch (...) {
      errors[static_cast<std::size_t>(idx)] = std::current_exception();
    }
  };

  if (workers == 1) {
    for (int i = 0; i < 3; ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < 3; ++i) pool.emplace_back(work, i);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  nlohmann::json agg;
  agg["variant"] = to_string(v);
  agg["tunings"] = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) {
    const std::string dir = out_dir + "/" + to_string(tunings[i]);
    detail::write_benchmark_outputs(dir, runs[static_cast<std::size_t>(i)], tunings[i]);
    agg["tunings"].push_back(
        detail::benchmark_summary_json(runs[static_cast<std::size_t>(i)], tunings[i]));
    std::cout << to_string(tunings[i]) << ": cross extremum (full) "
              << runs[static_cast<std::size_t>(i)].cross_full.extremum_normalized
              << " per unit step, settle " << runs[static_cast<std::size_t>(i)].settle_full_s
              << " s -> " << dir << "\n";
  }
  detail::write_json(out_dir + "/summary.json", agg);
  std::cout << "experiment summary -> " << out_dir << "/summary.json\n";
}

}  // namespace agc
