#pragma once

// JSON scenario files, organized in four sections:
//   system   - physical plant: areas, generators, ties, power base
//   agc      - controller tuning: variant, bias, time constants, participation
//   scenario - disturbance schedule, horizon, step-size overrides
//   output   - optional default output directory and CSV channel selection
// Areas are referenced 1-based in ties and disturbances, matching the channel
// naming of the CSV output. A generator participates in AGC exactly when its
// participation entry is a number; null means the unit only provides primary
// response. Every diagnostic names the offending field path.

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "agc/sim.hpp"
#include "agc/types.hpp"

namespace agc {

struct ScenarioFile {
  Scenario scenario;
  std::optional<std::string> out_directory;  // output.directory
  std::vector<std::string> channels;         // output.channels; empty = all
};

namespace detail {

using Json = nlohmann::json;

[[nodiscard]] inline double num_at(const Json& j, const std::string& key, double fallback,
                                   const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number())
    throw std::invalid_argument(where + "." + key + " must be a number");
  return j.at(key).get<double>();
}

[[nodiscard]] inline int require_area_ref(const Json& j, const std::string& key,
                                          const std::string& where, int num_areas) {
  if (!j.contains(key) || !j.at(key).is_number_integer())
    throw std::invalid_argument(where + "." + key + " must be a 1-based area index");
  const int ref = j.at(key).get<int>();
  if (ref < 1 || ref > num_areas)
    throw std::invalid_argument(where + "." + key + " references area " + std::to_string(ref) +
                                " but the system has " + std::to_string(num_areas) + " areas");
  return ref - 1;
}

// Per-area numeric field given either as a scalar (broadcast) or an array of
// one value per area.
[[nodiscard]] inline std::vector<double> per_area_numbers(const Json& agc_section,
                                                          const std::string& key, int num_areas,
                                                          const std::string& where) {
  if (!agc_section.contains(key))
    throw std::invalid_argument(where + "." + key + " is required");
  const Json& v = agc_section.at(key);
  if (v.is_number()) return std::vector<double>(static_cast<std::size_t>(num_areas),
                                                v.get<double>());
  if (!v.is_array() || static_cast<int>(v.size()) != num_areas)
    throw std::invalid_argument(where + "." + key + " must be a number or an array with " +
                                std::to_string(num_areas) + " entries (one per area)");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_number())
      throw std::invalid_argument(where + "." + key + "[" + std::to_string(k + 1) +
                                  "] must be a number");
    out.push_back(v[k].get<double>());
  }
  return out;
}

}  // namespace detail

[[nodiscard]] inline ScenarioFile scenario_from_json(const nlohmann::json& j) {
  using detail::num_at;

  ScenarioFile file;
  Scenario& sc = file.scenario;
  if (j.contains("name")) {
    if (!j.at("name").is_string()) throw std::invalid_argument("name must be a string");
    sc.name = j.at("name").get<std::string>();
  }

  // ----- system -----
  if (!j.contains("system") || !j.at("system").is_object())
    throw std::invalid_argument("system section is required");
  const auto& sys = j.at("system");
  sc.base_mva = num_at(sys, "base_mva", kDefaultBaseMva, "system");

  if (!sys.contains("areas") || !sys.at("areas").is_array() || sys.at("areas").empty())
    throw std::invalid_argument("system.areas must be a non-empty array");
  int area_no = 0;
  for (const auto& ja : sys.at("areas")) {
    ++area_no;
    const std::string where = "system.areas[" + std::to_string(area_no) + "]";
    AreaParams a;
    a.name = ja.contains("name") && ja.at("name").is_string()
                 ? ja.at("name").get<std::string>()
                 : "area" + std::to_string(area_no);
    a.load_damping = num_at(ja, "load_damping", 0.0, where);
    a.inertia = num_at(ja, "inertia_s", kDefaultInertiaS, where);
    a.measurement_filter = num_at(ja, "measurement_filter_s", kDefaultMeasurementFilterS, where);

    if (!ja.contains("generators") || !ja.at("generators").is_array() ||
        ja.at("generators").empty())
      throw std::invalid_argument(where + ".generators must be a non-empty array");
    int gen_no = 0;
    for (const auto& jg : ja.at("generators")) {
      ++gen_no;
      const std::string gwhere = where + ".generators[" + std::to_string(gen_no) + "]";
      GeneratorParams g;
      g.droop = num_at(jg, "droop", 0.05, gwhere);
      g.base_setpoint = num_at(jg, "base_setpoint", 0.0, gwhere);
      g.u_min = num_at(jg, "u_min", -0.5, gwhere);
      g.u_max = num_at(jg, "u_max", 0.5, gwhere);
      g.governor_lag = num_at(jg, "governor_lag_s", kDefaultGovernorLagS, gwhere);
      g.turbine_lag = num_at(jg, "turbine_lag_s", kDefaultTurbineLagS, gwhere);
      a.generators.push_back(g);
    }
    sc.areas.push_back(std::move(a));
  }
  const int n = static_cast<int>(sc.areas.size());

  if (sys.contains("ties")) {
    if (!sys.at("ties").is_array())
      throw std::invalid_argument("system.ties must be an array");
    int tie_no = 0;
    for (const auto& jt : sys.at("ties")) {
      ++tie_no;
      const std::string where = "system.ties[" + std::to_string(tie_no) + "]";
      TieLine t;
      t.area_a = detail::require_area_ref(jt, "from_area", where, n);
      t.area_b = detail::require_area_ref(jt, "to_area", where, n);
      t.stiffness = num_at(jt, "stiffness_pu", kDefaultTieStiffnessPu, where);
      sc.ties.push_back(t);
    }
  }

  // ----- agc -----
  if (!j.contains("agc") || !j.at("agc").is_object())
    throw std::invalid_argument("agc section is required");
  const auto& agc_s = j.at("agc");

  if (agc_s.contains("variant")) {
    const auto& v = agc_s.at("variant");
    if (!v.is_string() || (v != "simplified" && v != "textbook"))
      throw std::invalid_argument("agc.variant must be \"simplified\" or \"textbook\"");
    sc.variant = v == "simplified" ? AgcVariant::Simplified : AgcVariant::Textbook;
  }

  const std::vector<double> bias =
      detail::per_area_numbers(agc_s, "frequency_bias", n, "agc");
  std::vector<double> tau(static_cast<std::size_t>(n), 60.0);
  if (agc_s.contains("agc_time_constant_s"))
    tau = detail::per_area_numbers(agc_s, "agc_time_constant_s", n, "agc");
  for (int k = 0; k < n; ++k) {
    sc.areas[static_cast<std::size_t>(k)].frequency_bias = bias[static_cast<std::size_t>(k)];
    sc.areas[static_cast<std::size_t>(k)].agc_time_constant = tau[static_cast<std::size_t>(k)];
  }

  if (!agc_s.contains("participation") || !agc_s.at("participation").is_array() ||
      static_cast<int>(agc_s.at("participation").size()) != n)
    throw std::invalid_argument(
        "agc.participation must be an array with one entry list per area");
  for (int k = 0; k < n; ++k) {
    const auto& row = agc_s.at("participation")[static_cast<std::size_t>(k)];
    AreaParams& a = sc.areas[static_cast<std::size_t>(k)];
    const std::string where = "agc.participation[" + std::to_string(k + 1) + "]";
    if (!row.is_array() || row.size() != a.generators.size())
      throw std::invalid_argument(where + " must list one value per generator (" +
                                  std::to_string(a.generators.size()) + " expected)");
    for (std::size_t i = 0; i < row.size(); ++i) {
      const auto& cell = row[i];
      GeneratorParams& g = a.generators[i];
      if (cell.is_null()) {
        g.agc_participant = false;
        g.participation = 0.0;
      } else if (cell.is_number()) {
        g.agc_participant = true;
        g.participation = cell.get<double>();
      } else {
        throw std::invalid_argument(where + "[" + std::to_string(i + 1) +
                                    "] must be a number or null");
      }
    }
  }

  // ----- scenario -----
  if (j.contains("scenario")) {
    const auto& run = j.at("scenario");
    if (!run.is_object()) throw std::invalid_argument("scenario section must be an object");
    sc.horizon_s = num_at(run, "horizon_s", 500.0, "scenario");
    sc.dt_full = num_at(run, "dt_full_s", 0.01, "scenario");
    sc.dt_reduced = num_at(run, "dt_reduced_s", 0.1, "scenario");
    if (run.contains("disturbances")) {
      if (!run.at("disturbances").is_array())
        throw std::invalid_argument("scenario.disturbances must be an array");
      int d_no = 0;
      for (const auto& jd : run.at("disturbances")) {
        ++d_no;
        const std::string where = "scenario.disturbances[" + std::to_string(d_no) + "]";
        Disturbance d;
        if (!jd.contains("time_s") || !jd.at("time_s").is_number())
          throw std::invalid_argument(where + ".time_s must be a number");
        d.time = jd.at("time_s").get<double>();
        d.area = detail::require_area_ref(jd, "area", where, n);
        if (!jd.contains("step_pu") || !jd.at("step_pu").is_number())
          throw std::invalid_argument(where + ".step_pu must be a number");
        d.step = jd.at("step_pu").get<double>();
        sc.disturbances.push_back(d);
      }
    }
  }

  // ----- output -----
  if (j.contains("output")) {
    const auto& out = j.at("output");
    if (!out.is_object()) throw std::invalid_argument("output section must be an object");
    if (out.contains("directory")) {
      if (!out.at("directory").is_string())
        throw std::invalid_argument("output.directory must be a string");
      file.out_directory = out.at("directory").get<std::string>();
    }
    if (out.contains("channels")) {
      if (!out.at("channels").is_array())
        throw std::invalid_argument("output.channels must be an array of channel names");
      for (const auto& c : out.at("channels")) {
        if (!c.is_string())
          throw std::invalid_argument("output.channels entries must be strings");
        file.channels.push_back(c.get<std::string>());
      }
    }
  }

  return file;
}

[[nodiscard]] inline nlohmann::json scenario_to_json(const ScenarioFile& file) {
  const Scenario& sc = file.scenario;
  nlohmann::json j;
  j["name"] = sc.name;

  nlohmann::json sys;
  sys["base_mva"] = sc.base_mva;
  sys["areas"] = nlohmann::json::array();
  for (const AreaParams& a : sc.areas) {
    nlohmann::json ja;
    ja["name"] = a.name;
    ja["load_damping"] = a.load_damping;
    ja["inertia_s"] = a.inertia;
    ja["measurement_filter_s"] = a.measurement_filter;
    ja["generators"] = nlohmann::json::array();
    for (const GeneratorParams& g : a.generators)
      ja["generators"].push_back({{"droop", g.droop},
                                  {"base_setpoint", g.base_setpoint},
                                  {"u_min", g.u_min},
                                  {"u_max", g.u_max},
                                  {"governor_lag_s", g.governor_lag},
                                  {"turbine_lag_s", g.turbine_lag}});
    sys["areas"].push_back(ja);
  }
  sys["ties"] = nlohmann::json::array();
  for (const TieLine& t : sc.ties)
    sys["ties"].push_back({{"from_area", t.area_a + 1},
                           {"to_area", t.area_b + 1},
                           {"stiffness_pu", t.stiffness}});
  j["system"] = sys;

  nlohmann::json agc_s;
  agc_s["variant"] = sc.variant == AgcVariant::Simplified ? "simplified" : "textbook";
  nlohmann::json bias = nlohmann::json::array();
  nlohmann::json tau = nlohmann::json::array();
  nlohmann::json part = nlohmann::json::array();
  for (const AreaParams& a : sc.areas) {
    bias.push_back(a.frequency_bias);
    tau.push_back(a.agc_time_constant);
    nlohmann::json row = nlohmann::json::array();
    for (const GeneratorParams& g : a.generators) {
      if (g.agc_participant)
        row.push_back(g.participation);
      else
        row.push_back(nullptr);
    }
    part.push_back(row);
  }
  agc_s["frequency_bias"] = bias;
  agc_s["agc_time_constant_s"] = tau;
  agc_s["participation"] = part;
  j["agc"] = agc_s;

  nlohmann::json run;
  run["horizon_s"] = sc.horizon_s;
  run["dt_full_s"] = sc.dt_full;
  run["dt_reduced_s"] = sc.dt_reduced;
  run["disturbances"] = nlohmann::json::array();
  for (const Disturbance& d : sc.disturbances)
    run["disturbances"].push_back(
        {{"time_s", d.time}, {"area", d.area + 1}, {"step_pu", d.step}});
  j["scenario"] = run;

  if (file.out_directory || !file.channels.empty()) {
    nlohmann::json out;
    if (file.out_directory) out["directory"] = *file.out_directory;
    if (!file.channels.empty()) out["channels"] = file.channels;
    j["output"] = out;
  }
  return j;
}

[[nodiscard]] inline ScenarioFile load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("scenario file '" + path + "' is not valid JSON: " + e.what());
  }
  return scenario_from_json(j);
}

inline void save_scenario(const std::string& path, const ScenarioFile& file) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << scenario_to_json(file).dump(2) << '\n';
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace agc
