#include <catch2/catch_amalgamated.hpp>

#include <agc/controller.hpp>
#include <agc/system_model.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace agc;
using Catch::Approx;

namespace {

GeneratorParams make_gen(bool on_agc, double alpha = 0.0) {
  GeneratorParams g;
  g.droop = 0.05;
  g.agc_participant = on_agc;
  g.participation = alpha;
  return g;
}

// Two identical areas, two 5%-droop units each, first unit of each area on
// AGC. Bias 60/40 puts area 1 above its response characteristic of 40.
std::vector<AreaParams> two_area_params() {
  AreaParams a;
  a.name = "area1";
  a.frequency_bias = 60.0;
  a.generators = {make_gen(true, 1.0), make_gen(false)};
  AreaParams b = a;
  b.name = "area2";
  b.frequency_bias = 40.0;
  return {a, b};
}

std::vector<TieLine> single_tie() { return {TieLine{0, 1, 2.0}}; }

}  // namespace

TEST_CASE("model construction rejects invalid parameters by field", "[system_model]") {
  auto areas = two_area_params();
  auto ties = single_tie();

  SECTION("bias must be positive") {
    areas[0].frequency_bias = 0.0;
    CHECK_THROWS_WITH(SystemModel::build(areas, ties),
                      Catch::Matchers::ContainsSubstring("frequency_bias must be positive") &&
                          Catch::Matchers::ContainsSubstring("area 1"));
  }
  SECTION("participation factors must sum to one") {
    areas[1].generators[0].participation = 0.9;
    CHECK_THROWS_WITH(
        SystemModel::build(areas, ties),
        Catch::Matchers::ContainsSubstring("participation factors of agc participants") &&
            Catch::Matchers::ContainsSubstring("area 2") &&
            Catch::Matchers::ContainsSubstring("0.9"));
  }
  SECTION("every area needs a participating unit") {
    areas[0].generators[0].agc_participant = false;
    areas[0].generators[0].participation = 0.0;
    CHECK_THROWS_WITH(SystemModel::build(areas, ties),
                      Catch::Matchers::ContainsSubstring("agc participant is required"));
  }
  SECTION("bystanders cannot carry participation") {
    areas[0].generators[1].participation = 0.3;
    CHECK_THROWS_WITH(SystemModel::build(areas, ties),
                      Catch::Matchers::ContainsSubstring("participation must be 0"));
  }
  SECTION("schedule must respect the dispatch limits") {
    areas[0].generators[0].base_setpoint = 0.7;  // u_max is 0.5
    CHECK_THROWS_WITH(SystemModel::build(areas, ties),
                      Catch::Matchers::ContainsSubstring("base_setpoint must lie within"));
  }
  SECTION("integrator time constant range") {
    areas[0].agc_time_constant = 0.5;
    CHECK_THROWS_WITH(SystemModel::build(areas, ties),
                      Catch::Matchers::ContainsSubstring("agc_time_constant"));
  }
  SECTION("droop, lags, inertia") {
    auto bad = areas;
    bad[0].generators[1].droop = 0.0;
    CHECK_THROWS_AS(SystemModel::build(bad, ties), std::invalid_argument);
    bad = areas;
    bad[1].generators[0].governor_lag = -0.1;
    CHECK_THROWS_AS(SystemModel::build(bad, ties), std::invalid_argument);
    bad = areas;
    bad[0].inertia = 0.0;
    CHECK_THROWS_AS(SystemModel::build(bad, ties), std::invalid_argument);
  }
  SECTION("tie endpoints and connectivity") {
    CHECK_THROWS_WITH(SystemModel::build(areas, {TieLine{0, 2, 2.0}}),
                      Catch::Matchers::ContainsSubstring("unknown area index"));
    CHECK_THROWS_WITH(SystemModel::build(areas, {TieLine{1, 1, 2.0}}),
                      Catch::Matchers::ContainsSubstring("distinct areas"));
    CHECK_THROWS_WITH(SystemModel::build(areas, {TieLine{0, 1, 0.0}}),
                      Catch::Matchers::ContainsSubstring("stiffness must be positive"));
    CHECK_THROWS_WITH(SystemModel::build(areas, {}),
                      Catch::Matchers::ContainsSubstring("connect all areas"));
  }
}

TEST_CASE("response characteristic sums droop contributions and damping", "[system_model]") {
  auto areas = two_area_params();
  areas[0].load_damping = 1.5;
  const SystemModel m = SystemModel::build(areas, single_tie());

  // Two 5% units contribute 1/0.05 each.
  CHECK(m.droop_sum(0) == Approx(40.0));
  CHECK(m.frc(0) == Approx(41.5));
  CHECK(m.frc(1) == Approx(40.0));
  CHECK(m.total_frc() == Approx(81.5));
  CHECK(m.frc_vector()[0] == m.frc(0));
  CHECK(m.bias_vector()[0] == 60.0);
  CHECK(m.tau_vector()[1] == 60.0);
}

TEST_CASE("state layout is dense and non-overlapping", "[system_model]") {
  const SystemModel m = SystemModel::build(two_area_params(), single_tie());
  // Per area: angle, frequency, two filter states, two states per generator;
  // the integrator block sits at the tail.
  CHECK(m.state_size() == 2 * (4 + 2 * 2) + 2);

  std::set<int> seen;
  for (int k = 0; k < m.num_areas(); ++k) {
    seen.insert(m.idx_angle(k));
    seen.insert(m.idx_freq(k));
    seen.insert(m.idx_filt_freq(k));
    seen.insert(m.idx_filt_ni(k));
    seen.insert(m.idx_eta(k));
    for (int i = 0; i < m.num_generators(k); ++i) {
      seen.insert(m.idx_gov(k, i));
      seen.insert(m.idx_mech(k, i));
    }
  }
  CHECK(seen.size() == static_cast<std::size_t>(m.state_size()));
  CHECK(*seen.rbegin() == m.state_size() - 1);
  CHECK(m.gen_flat_index(1, 0) == 2);
  CHECK(m.total_generators() == 4);
}

TEST_CASE("the scheduled operating point is a fixed point of every loop mode",
          "[system_model]") {
  const SystemModel m = SystemModel::build(two_area_params(), single_tie());
  const State x = scheduled_state(m);
  const Eigen::VectorXd no_load = Eigen::VectorXd::Zero(2);

  for (LoopMode mode : {LoopMode::PrimaryOnly, LoopMode::Simplified, LoopMode::Textbook}) {
    const State dx = full_derivatives(m, x, no_load, mode);
    CHECK(dx.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("a load step first appears in the swing equation alone", "[system_model]") {
  const SystemModel m = SystemModel::build(two_area_params(), single_tie());
  const State x = scheduled_state(m);
  Eigen::VectorXd w(2);
  w << 50.0 / 900.0, 0.0;

  const State dx = full_derivatives(m, x, w, LoopMode::Simplified);
  CHECK(dx[m.idx_freq(0)] == Approx(-(50.0 / 900.0) / (2.0 * 6.5)));
  CHECK(dx[m.idx_freq(1)] == 0.0);
  // Measurements still read zero, so filters, governors and integrators rest.
  for (int k = 0; k < 2; ++k) {
    CHECK(dx[m.idx_eta(k)] == 0.0);
    CHECK(dx[m.idx_filt_freq(k)] == 0.0);
    for (int i = 0; i < m.num_generators(k); ++i) CHECK(dx[m.idx_gov(k, i)] == 0.0);
  }
}

TEST_CASE("tie flows are antisymmetric and sum to zero", "[system_model]") {
  auto areas = two_area_params();
  areas.push_back(areas[1]);
  areas[2].name = "area3";
  std::vector<TieLine> ties = {TieLine{0, 1, 2.0}, TieLine{1, 2, 1.5}, TieLine{0, 2, 0.7}};
  const SystemModel m = SystemModel::build(areas, ties);

  std::mt19937 gen(123);
  std::uniform_real_distribution<double> angle(-0.5, 0.5);
  State x = scheduled_state(m);
  for (int trial = 0; trial < 25; ++trial) {
    for (int k = 0; k < 3; ++k) x[m.idx_angle(k)] = angle(gen);
    const Eigen::VectorXd flow = tie_outflow(m, x);
    // Each line adds and subtracts the same double, but an area touched by
    // two lines rounds the accumulation, so the total only vanishes to
    // machine precision.
    CHECK(std::abs(flow.sum()) < 1e-15);
  }

  // Two-area closed form.
  const SystemModel m2 = SystemModel::build(two_area_params(), single_tie());
  State x2 = scheduled_state(m2);
  x2[m2.idx_angle(0)] = 0.3;
  x2[m2.idx_angle(1)] = 0.1;
  const Eigen::VectorXd f2 = tie_outflow(m2, x2);
  CHECK(f2[0] == Approx(2.0 * std::sin(0.2)));
  CHECK(f2[1] == Approx(-2.0 * std::sin(0.2)));
}

TEST_CASE("measurements honor the filter channel selection", "[system_model]") {
  auto areas = two_area_params();
  areas[1].measurement_filter = 0.0;  // area 2 reads raw signals
  const SystemModel m = SystemModel::build(areas, single_tie());

  State x = scheduled_state(m);
  x[m.idx_freq(0)] = 2e-3;
  x[m.idx_filt_freq(0)] = 1e-3;
  x[m.idx_filt_ni(0)] = 5e-3;
  x[m.idx_freq(1)] = -1e-3;
  x[m.idx_filt_freq(1)] = 99.0;  // stale storage, must be ignored when unfiltered
  x[m.idx_eta(0)] = 0.2;

  const Measurements meas = measurements(m, x);
  CHECK(meas.freq_raw[0] == 2e-3);
  CHECK(meas.freq_filt[0] == 1e-3);
  CHECK(meas.ni_filt[0] == 5e-3);
  CHECK(meas.freq_filt[1] == meas.freq_raw[1]);
  CHECK(meas.ni_filt[1] == meas.ni_raw[1]);

  // Commanded references come from the integrator block; electrical power
  // follows the governor statics on the raw frequency.
  CHECK(meas.gen_u[0] == Approx(0.2));
  CHECK(meas.gen_u[1] == 0.0);
  CHECK(meas.gen_p[0] == Approx(0.2 - 2e-3 / 0.05));
  CHECK(meas.gen_p_filt[0] == Approx(0.2 - 1e-3 / 0.05));

  // An explicit command vector overrides the integrator block.
  Eigen::VectorXd u_flat(4);
  u_flat << 0.1, 0.0, -0.05, 0.0;
  const Measurements pinned = measurements(m, x, u_flat);
  CHECK(pinned.gen_u[0] == 0.1);
  CHECK(pinned.gen_p[2] == Approx(-0.05 + 1e-3 / 0.05));
}

TEST_CASE("the integrator rows match the controller law on measured signals",
          "[system_model]") {
  const SystemModel m = SystemModel::build(two_area_params(), single_tie());
  State x = scheduled_state(m);
  x[m.idx_angle(0)] = 0.05;
  x[m.idx_freq(0)] = 2e-3;
  x[m.idx_freq(1)] = -1e-3;
  x[m.idx_filt_freq(0)] = 1.5e-3;
  x[m.idx_filt_ni(0)] = 8e-3;
  x[m.idx_filt_freq(1)] = -0.5e-3;
  x[m.idx_filt_ni(1)] = -8e-3;
  x[m.idx_gov(0, 0)] = 0.15;
  x[m.idx_mech(0, 0)] = 0.12;
  x[m.idx_eta(0)] = 0.08;
  const Eigen::VectorXd w = Eigen::VectorXd::Zero(2);

  for (LoopMode mode : {LoopMode::Simplified, LoopMode::Textbook}) {
    const State dx = full_derivatives(m, x, w, mode);
    for (int k = 0; k < 2; ++k) {
      const AreaParams& a = m.area(k);
      const double ace = x[m.idx_filt_ni(k)] + a.frequency_bias * x[m.idx_filt_freq(k)];
      std::vector<double> u, p_meas;
      for (int i = 0; i < m.num_generators(k); ++i) {
        const double ui = allocate_one(a.generators[static_cast<std::size_t>(i)],
                                       x[m.idx_eta(k)]);
        u.push_back(ui);
        p_meas.push_back(ui - x[m.idx_filt_freq(k)] /
                                  a.generators[static_cast<std::size_t>(i)].droop);
      }
      const AgcVariant v =
          mode == LoopMode::Simplified ? AgcVariant::Simplified : AgcVariant::Textbook;
      CHECK(dx[m.idx_eta(k)] ==
            Approx(controller_rhs(v, ace, a.agc_time_constant, u, p_meas)).margin(1e-15));
    }
  }
}

TEST_CASE("derivative evaluation rejects malformed states", "[system_model]") {
  const SystemModel m = SystemModel::build(two_area_params(), single_tie());
  const Eigen::VectorXd w = Eigen::VectorXd::Zero(2);

  State short_x = State::Zero(m.state_size() - 1);
  CHECK_THROWS_AS(full_derivatives(m, short_x, w, LoopMode::Simplified),
                  std::invalid_argument);

  State bad = scheduled_state(m);
  bad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH(full_derivatives(m, bad, w, LoopMode::Simplified),
                    Catch::Matchers::ContainsSubstring("non-finite"));

  Eigen::VectorXd wrong_w = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(full_derivatives(m, scheduled_state(m), wrong_w, LoopMode::Simplified),
                  std::invalid_argument);
}
