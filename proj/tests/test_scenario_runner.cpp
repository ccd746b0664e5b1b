#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "freqclear/scenario_runner.hpp"

using namespace freqclear;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::vector<std::string> out;
  std::ifstream in(p);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("freqclear_test_" + name);
  fs::remove_all(d);
  return d;
}

SweepSpec efr_spec() {
  SweepSpec s;
  s.preset = "efr15";
  s.wind_grid = parse_wind_range("0,20,28");
  s.pricing = PricingSelection::both;
  return s;
}

}  // namespace

TEST_CASE("wind range parsing") {
  CHECK(parse_wind_range("20") == std::vector<double>{20000});
  CHECK(parse_wind_range("5,10,20") == std::vector<double>{5000, 10000, 20000});
  CHECK(parse_wind_range("0:3") == std::vector<double>{0, 1000, 2000, 3000});
  CHECK(parse_wind_range("0:30:10") == std::vector<double>{0, 10000, 20000, 30000});
  CHECK(parse_wind_range("0:1:0.25").size() == 5);
  CHECK(parse_wind_range("0:1:0.1").size() == 11);
  CHECK(parse_wind_range("").empty());
  CHECK_THROWS_AS(parse_wind_range("abc"), std::invalid_argument);
  CHECK_THROWS_AS(parse_wind_range("1:2:0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_wind_range("1:2:3:4"), std::invalid_argument);
  CHECK_THROWS_AS(parse_wind_range("5x"), std::invalid_argument);
}

TEST_CASE("presets and pricing selection") {
  CHECK(find_preset("gfm30").gfm_fraction == 0.3);
  CHECK(find_preset("gfm30-h3").h_gfm == 3);
  CHECK_THROWS_AS(find_preset("nonsense"), std::invalid_argument);
  CHECK(modes_of(parse_pricing("both")).size() == 2);
  CHECK_THROWS_AS(parse_pricing("cheap"), std::invalid_argument);
}

TEST_CASE("spec validation") {
  SweepSpec s;
  s.wind_grid = {31000};
  CHECK_THROWS_AS(validate_spec(s), std::invalid_argument);
  s.wind_grid = {1000};
  s.forecast_alpha = 1.5;
  CHECK_THROWS_AS(validate_spec(s), std::invalid_argument);
  s.forecast_alpha.reset();
  s.k_rec = -0.1;
  CHECK_THROWS_AS(validate_spec(s), std::invalid_argument);
  s.k_rec.reset();
  s.jobs = 0;
  CHECK_THROWS_AS(validate_spec(s), std::invalid_argument);
  s.jobs = 1;
  s.hi_optimize = true;
  s.h_lo = 4;
  s.h_hi = 2;
  CHECK_THROWS_AS(validate_spec(s), std::invalid_argument);
}

TEST_CASE("empty grid gives an empty result") {
  SweepSpec s;
  const auto r = run_sweep(s);
  CHECK(r.points.empty());
  CHECK(r.failures() == 0);
  const auto dir = scratch("empty");
  emit_outputs(r, dir.string());
  CHECK(lines(dir / "prices.csv").size() == 1);
  fs::remove_all(dir);
}

TEST_CASE("every point is secure and priced") {
  const auto r = run_sweep(efr_spec());
  REQUIRE(r.points.size() == 3);
  for (const auto& p : r.points) {
    CHECK_FALSE(p.failed);
    CHECK(p.secure());
    for (const auto& s : p.security) {
      CHECK(s.rocof_margin >= -1e-6);
      CHECK(s.nadir_margin >= -1e-6);
      CHECK(s.qss_margin >= -1e-6);
    }
    REQUIRE(p.modes.size() == 2);
    CHECK(p.modes[0].prices.has_value());
    CHECK(p.modes[1].prices.has_value());
  }
  CHECK(r.points[0].wind_mw == 0);
  CHECK(r.points[2].wind_mw == 28000);
}

TEST_CASE("output schema") {
  const auto r = run_sweep(efr_spec());
  const auto dir = scratch("schema");
  emit_outputs(r, dir.string());
  const auto prices = lines(dir / "prices.csv");
  CHECK(prices.size() == 1 + 3 * 2);
  CHECK(prices[0] ==
        "wind_mw,mode,period,energy,sync_inertia,synt_inertia,efr,pfr,rocof_binding,"
        "nadir_binding,qss_binding,status");
  CHECK(lines(dir / "settlements.csv")[0] ==
        "wind_mw,mode,period,level,unit,group,committed,energy_mwh,response_mw,inertia_mws,"
        "energy_revenue,response_revenue,inertia_revenue,commitment_price,commitment_revenue,"
        "operating_cost,make_whole");
  CHECK(lines(dir / "schedule.csv")[0] ==
        "wind_mw,period,unit,committed,power_mw,reserve_mw,curtailed_mw,h_s");
  CHECK(lines(dir / "security.csv")[0] ==
        "wind_mw,period,rocof_ok,nadir_ok,qss_ok,rocof_margin_mws,nadir_margin_hz,"
        "qss_margin_mw,simulated_depth_hz,t_nadir_s,note");
  // 54 units per point in schedule.csv
  CHECK(lines(dir / "schedule.csv").size() == 1 + 3 * 54);
  CHECK(lines(dir / "security.csv").size() == 1 + 3);
  const auto plot = lines(dir / "plot_dispatchable_efr.dat");
  CHECK(plot.size() == 1 + 3);
  CHECK(plot[0] == "# wind_gw efr");
  CHECK(plot[2].rfind("20.000 ", 0) == 0);
  CHECK(fs::exists(dir / "plot_restricted_commitment.dat"));
  const auto summary = slurp(dir / "summary.json");
  CHECK(summary.find("\"schema_version\": 1") != std::string::npos);
  CHECK(summary.find("runtime") == std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("reruns are byte identical, serial or parallel") {
  auto spec = efr_spec();
  const auto a = scratch("det_a"), b = scratch("det_b");
  emit_outputs(run_sweep(spec), a.string());
  spec.jobs = 3;
  emit_outputs(run_sweep(spec), b.string());
  int files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
    ++files;
  }
  CHECK(files == 16);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("failed points are marked and the sweep continues") {
  SweepSpec s = efr_spec();
  s.wind_grid = {20000};
  s.bnb.node_cap = 0;
  const auto r = run_sweep(s);
  REQUIRE(r.points.size() == 1);
  CHECK(r.points[0].failed);
  CHECK_FALSE(r.points[0].error.empty());
  const auto dir = scratch("failed");
  emit_outputs(r, dir.string());
  const auto prices = lines(dir / "prices.csv");
  for (size_t k = 1; k < prices.size(); ++k)
    CHECK((prices[k].find(",failed") != std::string::npos || prices[k].find(",ok") != std::string::npos));
  fs::remove_all(dir);
}

TEST_CASE("unwritable output directory names the path") {
  const auto r = run_sweep(SweepSpec{});
  try {
    emit_outputs(r, "/proc/freqclear_cannot_write");
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("/proc/freqclear_cannot_write") != std::string::npos);
  }
}

TEST_CASE("k_rec override reaches the fleet") {
  SweepSpec s;
  s.preset = "gfm30";
  s.k_rec = 0.025;
  CHECK(fleet_for(s, 20000).params.k_rec == 0.025);
  s.k_rec.reset();
  CHECK(fleet_for(s, 20000).params.k_rec == 0.05);
}

TEST_CASE("scenario file replaces the preset") {
  auto f = build_gb_reference_fleet(20000, 0.15, 0, 5, 0.05);
  const auto path = fs::temp_directory_path() / "freqclear_runner_scenario.toml";
  save_scenario(f, path.string());
  SweepSpec s;
  s.scenario_file = path.string();
  const auto r = run_sweep(s);
  REQUIRE(r.points.size() == 1);
  CHECK_FALSE(r.points[0].failed);
  CHECK(r.points[0].committed[0] == 24);
  fs::remove(path);
}

TEST_CASE("zero demand and no contingency commits nothing") {
  FleetSpec f;
  for (int k = 0; k < 4; ++k) {
    GeneratorSpec g;
    g.id = "GAS0" + std::to_string(k + 1);
    g.p_max = 500;
    g.p_msg = 200;
    g.c_nl = 1000;
    g.c_m = 50;
    g.c_st = 1000;
    g.h = 5;
    g.r_max = 100;
    g.response_kind = ResponseKind::pfr;
    f.generators.push_back(g);
  }
  f.params.p_loss = 0;
  f.params.demand.assign(24, 0.0);
  const auto path = fs::temp_directory_path() / "freqclear_zero_demand.toml";
  save_scenario(f, path.string());
  SweepSpec s;
  s.scenario_file = path.string();
  s.pricing = PricingSelection::both;
  const auto r = run_sweep(s);
  REQUIRE(r.points.size() == 1);
  const auto& p = r.points[0];
  CHECK_FALSE(p.failed);
  CHECK(std::abs(p.objective) <= 1e-6);
  CHECK(p.committed == std::vector<int>(24, 0));
  fs::remove(path);
}
