#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "doctest.h"

#include "freqclear/system_model.hpp"

using namespace freqclear;

namespace {

bool has_code(const std::vector<Diagnostic>& d, const std::string& code) {
  return std::any_of(d.begin(), d.end(), [&](const Diagnostic& x) {
    return x.code == code && x.severity == Severity::error;
  });
}

}  // namespace

TEST_CASE("reference fleet composition") {
  const auto f = build_gb_reference_fleet(20000, 0.15, 0.0, 5, 0.05);
  REQUIRE(f.generators.size() == 51);
  CHECK(f.generators[0].must_run);
  CHECK(f.generators[0].p_max == 1800);
  int gas = 0;
  for (const auto& g : f.generators) gas += g.id.rfind("GAS", 0) == 0 ? 1 : 0;
  CHECK(gas == 50);
  double avail = 0;
  for (const auto& r : f.inverter_resources) avail += r.p_avail;
  CHECK(avail == doctest::Approx(20000));
  CHECK_FALSE(has_errors(validate(f)));
}

TEST_CASE("wind split follows the fractions") {
  const auto f = build_gb_reference_fleet(10000, 0.15, 0.3, 5, 0.05);
  double efr = 0, gfm = 0;
  for (const auto& r : f.inverter_resources) {
    if (r.control == InverterControl::gfl) efr += r.p_avail;
    if (r.control == InverterControl::gfm) gfm += r.p_avail;
  }
  CHECK(efr == doctest::Approx(1500));
  CHECK(gfm == doctest::Approx(3000));
}

TEST_CASE("bad reference arguments throw") {
  CHECK_THROWS_AS(build_gb_reference_fleet(-1, 0, 0, 5, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(build_gb_reference_fleet(31000, 0, 0, 5, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(build_gb_reference_fleet(1000, 0.7, 0.4, 5, 0.05), std::invalid_argument);
}

TEST_CASE("EFR delivery time at the threshold is rejected") {
  // 2 * 0.8 Hz / 1 Hz/s = 1.6 s
  auto f = build_gb_reference_fleet(0, 0, 0, 5, 0.05);
  f.params.t_efr = 1.6;
  CHECK(has_code(validate(f), "nadir_regime"));
  f.params.t_efr = 1.7;
  CHECK(has_code(validate(f), "nadir_regime"));
  f.params.t_efr = 1.59;
  CHECK_FALSE(has_code(validate(f), "nadir_regime"));

  f.params.t_efr = 1.6;
  const auto path = std::filesystem::temp_directory_path() / "freqclear_slow_efr.toml";
  save_scenario(f, path.string());
  CHECK_THROWS_AS(load_scenario(path.string()), NadirRegimeError);
  std::filesystem::remove(path);
}

TEST_CASE("invariant violations are reported") {
  auto f = build_gb_reference_fleet(0, 0, 0, 5, 0.05);
  f.generators[3].p_msg = f.generators[3].p_max + 1;
  CHECK(has_errors(validate(f)));

  f = build_gb_reference_fleet(0, 0, 0, 5, 0.05);
  f.generators[3].id = f.generators[4].id;
  CHECK(has_errors(validate(f)));

  f = build_gb_reference_fleet(0, 0, 0, 5, 0.05);
  f.params.k_rec = -0.01;
  CHECK(has_errors(validate(f)));

  f = build_gb_reference_fleet(0, 0, 0, 5, 0.05);
  f.params.demand = {100000};
  CHECK(has_code(validate(f), "capacity"));
}

TEST_CASE("scenario text round trip") {
  const auto f = build_gb_reference_fleet(12345, 0.15, 0.3, 5, 0.025);
  const std::string text = serialize_scenario(f);
  CHECK(parse_scenario(text) == f);
  CHECK(serialize_scenario(parse_scenario(text)) == text);
}

TEST_CASE("scenario file round trip on disk") {
  const auto f = build_gb_multi_period_fleet(default_demand_profile(), 0.5, 0.15, 0, 5, 0.05, 1000);
  const auto path = std::filesystem::temp_directory_path() / "freqclear_roundtrip.toml";
  save_scenario(f, path.string());
  CHECK(load_scenario(path.string()) == f);
  std::filesystem::remove(path);
}

TEST_CASE("malformed scenario text names the line") {
  const std::string text = "format = 1\n\n[system]\nf0 = fifty\n";
  try {
    parse_scenario(text);
    FAIL("expected a ScenarioError");
  } catch (const ScenarioError& e) {
    CHECK(e.line() == 4);
    CHECK(e.field() == "f0");
  }
  CHECK_THROWS_AS(parse_scenario("[system]\nf0 = 50\n"), ScenarioError);
  CHECK_THROWS_AS(parse_scenario("format = 1\n[nonsense]\n"), ScenarioError);
  CHECK_THROWS_AS(load_scenario("/nonexistent/freqclear.toml"), ScenarioError);
}

TEST_CASE("default demand profile totals and peak") {
  const auto d = default_demand_profile();
  REQUIRE(d.size() == 24);
  CHECK(std::accumulate(d.begin(), d.end(), 0.0) == doctest::Approx(507000).epsilon(1e-3));
  const auto peak = std::max_element(d.begin(), d.end());
  CHECK(*peak == doctest::Approx(25000));
  CHECK(peak - d.begin() == 20);
}

TEST_CASE("multi-period fleet carries start-up data") {
  const auto f = build_gb_multi_period_fleet(default_demand_profile(), 0.6, 0, 0.3, 5, 0.05, 1000);
  CHECK(f.params.periods() == 24);
  for (const auto& g : f.generators)
    if (!g.must_run) CHECK(g.c_st == 1000);
  CHECK_THROWS_AS(build_gb_multi_period_fleet({1, 2, 3}, 0.6, 0, 0, 5, 0.05, 1000),
                  std::invalid_argument);
}

TEST_CASE("inertia capability sums H times rating") {
  const auto f = build_gb_reference_fleet(0, 0, 0, 5, 0.05);
  double h = 0;
  for (const auto& g : f.generators)
    if (g.provides_inertia) h += g.h * g.p_max;
  CHECK(total_inertia_capability(f) == doctest::Approx(h));
}
