#include <catch2/catch_amalgamated.hpp>

#include <agc/csv_io.hpp>

#include <json.hpp>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

// End-to-end coverage of the installed binary: every verb, every exit code,
// and the artifact formats scripts depend on.

using Catch::Approx;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kBinary = AGCSIM_BINARY_PATH;
const std::string kScenarioDir = AGCSIM_SCENARIO_DIR;

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path work_root() {
  static const fs::path root = [] {
    const fs::path p = fs::temp_directory_path() / "agcsim_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = work_root() / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string first_line(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  return line;
}

CliResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path out = work_root() / ("stdout." + std::to_string(counter));
  const fs::path err = work_root() / ("stderr." + std::to_string(counter));
  ++counter;
  const std::string cmd =
      '"' + kBinary + "\" " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// Minimal valid two-area system: one default generator per area, one tie,
// matched bias (20 = one 5% unit), 30 s horizon.
json small_scenario() {
  json j;
  j["name"] = "cli_small";
  j["system"]["areas"][0]["generators"][0] = json::object();
  j["system"]["areas"][1]["generators"][0] = json::object();
  j["system"]["ties"][0] = {{"from_area", 1}, {"to_area", 2}};
  j["agc"]["frequency_bias"] = 20.0;
  j["agc"]["participation"] = json::array({json::array({1.0}), json::array({1.0})});
  j["scenario"]["horizon_s"] = 30.0;
  j["scenario"]["disturbances"] =
      json::array({json{{"time_s", 2.0}, {"area", 1}, {"step_pu", 0.1}}});
  return j;
}

fs::path write_scenario(const std::string& name, const json& j) {
  const fs::path p = work_root() / name;
  std::ofstream(p) << j.dump(2) << '\n';
  return p;
}

std::string bundled(const std::string& name) {
  return kScenarioDir + "/" + name + ".json";
}

}  // namespace

TEST_CASE("usage errors exit with code 1", "[cli]") {
  CHECK(run_cli("").code == 1);
  CHECK(run_cli("frobnicate").code == 1);

  const CliResult help = run_cli("--help");
  CHECK(help.code == 0);
  CHECK(help.out.find("simulate") != std::string::npos);
  CHECK(help.out.find("analyze") != std::string::npos);
}

TEST_CASE("simulate writes the full trajectory deterministically", "[cli]") {
  const fs::path dir = fresh_dir("sim_a");
  const CliResult r = run_cli("simulate --scenario " + bundled("kundur_two_area_matched") +
                              " --out " + dir.string());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("simulated 'kundur_two_area_matched'") != std::string::npos);

  const fs::path csv = dir / "timeseries_full.csv";
  REQUIRE(fs::exists(csv));
  CHECK(first_line(csv) ==
        "time_s,area1.freq_dev,area1.ni_dev,area1.ace,area1.ace_filt,area1.eta,"
        "area2.freq_dev,area2.ni_dev,area2.ace,area2.ace_filt,area2.eta,"
        "gen1.1.u,gen1.1.p,gen1.2.u,gen1.2.p,gen2.1.u,gen2.1.p,gen2.2.u,gen2.2.p");

  const agc::TimeSeries ts = agc::read_csv(csv.string());
  CHECK(ts.channel_names.size() == 18);
  CHECK(ts.num_samples() > 1000);
  CHECK(ts.time[0] == 0.0);

  const fs::path dir2 = fresh_dir("sim_b");
  REQUIRE(run_cli("simulate --scenario " + bundled("kundur_two_area_matched") + " --out " +
                  dir2.string())
              .code == 0);
  CHECK(slurp(csv) == slurp(dir2 / "timeseries_full.csv"));
}

TEST_CASE("simulate honors the scenario's channel selection", "[cli]") {
  json j = small_scenario();
  j["output"]["channels"] = json::array({"area2.eta", "area1.ace"});
  const fs::path sc = write_scenario("channels.json", j);
  const fs::path dir = fresh_dir("sim_channels");
  REQUIRE(run_cli("simulate --scenario " + sc.string() + " --out " + dir.string()).code == 0);
  CHECK(first_line(dir / "timeseries_full.csv") == "time_s,area2.eta,area1.ace");

  j["output"]["channels"] = json::array({"area1.bogus"});
  const fs::path bad = write_scenario("channels_bad.json", j);
  const CliResult r = run_cli("simulate --scenario " + bad.string() + " --out " +
                              fresh_dir("sim_channels_bad").string());
  CHECK(r.code == 1);
  CHECK(r.err.find("unknown channel") != std::string::npos);
}

TEST_CASE("a missing output directory is a usage error", "[cli]") {
  const CliResult r = run_cli("simulate --scenario " + bundled("kundur_two_area_matched"));
  CHECK(r.code == 1);
  CHECK(r.err.find("no output directory") != std::string::npos);
}

TEST_CASE("parse and validation failures exit with code 1", "[cli]") {
  const fs::path broken = work_root() / "broken.json";
  std::ofstream(broken) << "{ this is not json\n";
  const CliResult bad_json =
      run_cli("simulate --scenario " + broken.string() + " --out " +
              fresh_dir("never_a").string());
  CHECK(bad_json.code == 1);
  CHECK(bad_json.err.find("not valid JSON") != std::string::npos);

  json zero_bias = small_scenario();
  zero_bias["agc"]["frequency_bias"] = json::array({0.0, 20.0});
  const CliResult bias = run_cli("simulate --scenario " +
                                 write_scenario("zero_bias.json", zero_bias).string() +
                                 " --out " + fresh_dir("never_b").string());
  CHECK(bias.code == 1);
  CHECK(bias.err.find("frequency_bias") != std::string::npos);

  json bad_part = small_scenario();
  bad_part["agc"]["participation"] = json::array({json::array({0.9}), json::array({1.0})});
  const CliResult part = run_cli("simulate --scenario " +
                                 write_scenario("bad_part.json", bad_part).string() +
                                 " --out " + fresh_dir("never_c").string());
  CHECK(part.code == 1);
  CHECK(part.err.find("participation") != std::string::npos);
}

TEST_CASE("infeasible load steps exit with code 2 and write nothing", "[cli]") {
  json j = small_scenario();
  j["scenario"]["disturbances"][0]["step_pu"] = 0.9;  // beyond the 0.5 pu headroom
  const fs::path dir = fresh_dir("infeasible_out");
  const CliResult r = run_cli("simulate --scenario " +
                              write_scenario("infeasible.json", j).string() + " --out " +
                              dir.string());
  CHECK(r.code == 2);
  CHECK(r.err.find("attainable response interval") != std::string::npos);
  CHECK(!fs::exists(dir / "timeseries_full.csv"));
}

TEST_CASE("a diverged integration exits with code 3", "[cli]") {
  json j = small_scenario();
  // dt far beyond the governor mode's stability limit; the horizon leaves
  // enough steps for the exponential growth to actually overflow a double.
  j["scenario"]["horizon_s"] = 400.0;
  j["scenario"]["dt_full_s"] = 2.0;
  j["scenario"]["dt_reduced_s"] = 2.0;
  const CliResult r = run_cli("simulate --scenario " +
                              write_scenario("diverge.json", j).string() + " --out " +
                              fresh_dir("diverge_out").string());
  CHECK(r.code == 3);
  CHECK(r.err.find("non-finite") != std::string::npos);
}

TEST_CASE("reduce writes the trajectory and the model report", "[cli]") {
  const fs::path dir = fresh_dir("reduce_out");
  const fs::path sc = write_scenario("small.json", small_scenario());
  REQUIRE(run_cli("reduce --scenario " + sc.string() + " --out " + dir.string()).code == 0);
  CHECK(fs::exists(dir / "timeseries_reduced.csv"));

  const json rep = json::parse(slurp(dir / "reduced_model.json"));
  // Matched tuning: the coupling matrix is the identity and overbias vanishes.
  CHECK(rep.at("b_ace")[0][0].get<double>() == Approx(1.0));
  CHECK(rep.at("b_ace")[0][1].get<double>() == Approx(0.0));
  CHECK(rep.at("overbias")[0].get<double>() == Approx(0.0));
  CHECK(rep.at("variant") == "simplified");
}

TEST_CASE("compare accepts the benchmark and reports per-channel errors", "[cli]") {
  const fs::path dir = fresh_dir("compare_out");
  const CliResult r = run_cli("compare --scenario " + bundled("kundur_two_area_matched") +
                              " --out " + dir.string());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("compared") != std::string::npos);

  const json rep = json::parse(slurp(dir / "compare.json"));
  CHECK(rep.at("pass").get<bool>());
  CHECK(rep.at("worst_rms").get<double>() <= rep.at("threshold_rms").get<double>());
  CHECK(!rep.at("channels").empty());
  CHECK(fs::exists(dir / "timeseries_full.csv"));
  CHECK(fs::exists(dir / "timeseries_reduced.csv"));
}

TEST_CASE("analyze emits coupling matrices, spectrum, gains, and equilibrium", "[cli]") {
  const fs::path dir = fresh_dir("analyze_out");
  REQUIRE(run_cli("analyze --scenario " + bundled("kundur_two_area_overbiased") + " --out " +
                  dir.string())
              .code == 0);

  const json rep = json::parse(slurp(dir / "analysis.json"));
  const json& b_ace = rep.at("matrices").at("b_ace");
  CHECK(b_ace[0][0].get<double>() == Approx(1.25));
  CHECK(b_ace[0][1].get<double>() == Approx(0.25));
  CHECK(b_ace[1][0].get<double>() == Approx(0.0));
  CHECK(b_ace[1][1].get<double>() == Approx(1.0));
  CHECK(rep.at("matrices").at("overbias")[0].get<double>() == Approx(0.25));

  CHECK(rep.at("eig").at("dominance") == "unit_cluster");
  CHECK(rep.at("steady_state").at("identities_pass").get<bool>());
  CHECK(rep.at("steady_state").at("worst_identity_violation").get<double>() < 1e-8);

  REQUIRE(fs::exists(dir / "bode_area1.csv"));
  CHECK(fs::exists(dir / "bode_area2.csv"));
  CHECK(first_line(dir / "bode_area1.csv") == "omega_rad_s,mag_S_from_load1,mag_S_from_load2");

  // Peak table: first row is the deepest underbias, where the closed-form
  // estimate is -1 and the exact step-response extremum is -0.25.
  REQUIRE(fs::exists(dir / "peak.csv"));
  std::ifstream peak(dir / "peak.csv");
  std::string header, row;
  std::getline(peak, header);
  CHECK(header == "overbias,peak_estimate,exact_extremum,exact_time_over_tau");
  std::getline(peak, row);
  std::replace(row.begin(), row.end(), ',', ' ');
  std::istringstream fields(row);
  double o = 0, est = 0, exact = 0;
  fields >> o >> est >> exact;
  CHECK(o == Approx(-0.5));
  CHECK(est == Approx(-1.0));
  CHECK(exact == Approx(-0.25));
}

TEST_CASE("analyze section selection is honored and typos rejected", "[cli]") {
  const fs::path dir = fresh_dir("analyze_eig");
  REQUIRE(run_cli("analyze --scenario " + bundled("kundur_two_area_matched") +
                  " --sections eig --out " + dir.string())
              .code == 0);
  const json rep = json::parse(slurp(dir / "analysis.json"));
  CHECK(rep.contains("eig"));
  CHECK(!rep.contains("matrices"));
  CHECK(!fs::exists(dir / "bode_area1.csv"));
  CHECK(!fs::exists(dir / "peak.csv"));

  const CliResult bad = run_cli("analyze --scenario " + bundled("kundur_two_area_matched") +
                                " --sections bogus --out " + fresh_dir("never_d").string());
  CHECK(bad.code == 1);
  CHECK(bad.err.find("unknown analyze section") != std::string::npos);
}

TEST_CASE("experiment runs all three tunings and aggregates summaries", "[cli]") {
  const fs::path dir = fresh_dir("experiment_out");
  const CliResult r = run_cli("experiment two-area --jobs 3 --out " + dir.string());
  REQUIRE(r.code == 0);

  for (const std::string tuning : {"overbiased", "underbiased", "matched"}) {
    const fs::path sub = dir / tuning;
    for (const std::string file : {"timeseries_full.csv", "timeseries_reduced.csv",
                                   "summary.json", "compare.json", "eta1_overlay.csv"}) {
      INFO(tuning << "/" << file);
      CHECK(fs::exists(sub / file));
    }
    const json sum = json::parse(slurp(sub / "summary.json"));
    CHECK(sum.at("tuning") == tuning);
    CHECK(sum.at("comparison").at("pass").get<bool>());
  }

  const json agg = json::parse(slurp(dir / "summary.json"));
  REQUIRE(agg.at("tunings").size() == 3);
  CHECK(agg.at("tunings")[0].at("tuning") == "overbiased");
  CHECK(first_line(dir / "matched" / "eta1_overlay.csv") == "time_s,eta1_full,eta1_reduced");

  // The historical alias maps to the same bundle.
  const fs::path dir2 = fresh_dir("experiment_alias");
  CHECK(run_cli("experiment paper --out " + dir2.string()).code == 0);
  CHECK(fs::exists(dir2 / "summary.json"));
}
