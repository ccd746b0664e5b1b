#include <cmath>

#include "doctest.h"

#include "fixtures.hpp"
#include "freqclear/pricing_engine.hpp"

using namespace freqclear;

namespace {

double relaxed_cost(FleetSpec f) {
  BuildOptions o;
  o.relax_binaries = true;
  const auto s = solve_socp(build_single_period(f, o));
  REQUIRE(s.optimal());
  return s.objective;
}

FleetSpec must_run_fleet() {
  FleetSpec f;
  auto a = fixtures::gas("A", 1000, 0, 0, 30, 15, 400);
  auto b = fixtures::gas("B", 800, 0, 0, 55, 12, 300);
  a.must_run = b.must_run = true;
  a.initially_online = b.initially_online = true;
  f.generators = {a, b};
  f.inverter_resources.push_back(fixtures::wind("WIND", 200));
  f.params.p_loss = 300;
  f.params.demand = {1200};
  return f;
}

}  // namespace

TEST_CASE("zero duals give zero prices") {
  const auto p = build_single_period(build_gb_reference_fleet(20000, 0.15, 0.3, 5, 0.05));
  Solution s;
  s.status = SolveStatus::optimal;
  s.primal.assign(p.vars.size(), 0.0);
  s.row_duals.assign(p.rows.size(), 0.0);
  s.lo_duals.assign(p.vars.size(), 0.0);
  s.hi_duals.assign(p.vars.size(), 0.0);
  s.soc_duals.assign(p.socs.size(), SocDual{});
  const auto pr = prices_from_duals(p, s, 0);
  CHECK(pr.energy == 0);
  CHECK(pr.sync_inertia == 0);
  CHECK(pr.synt_inertia == 0);
  CHECK(pr.efr == 0);
  CHECK(pr.pfr == 0);
  CHECK_FALSE(pr.binding.rocof);
  CHECK_FALSE(pr.binding.nadir);
  CHECK_FALSE(pr.binding.qss);
}

TEST_CASE("price formulas from raw duals") {
  BuildOptions o;
  o.relax_binaries = true;
  const auto p = build_single_period(build_gb_reference_fleet(20000, 0.15, 0.3, 5, 0.05), o);
  const auto s = solve_socp(p);
  REQUIRE(s.optimal());
  const auto pr = prices_from_duals(p, s, 0);
  const auto z = s.soc_dual(p, "nadir[0]");
  const double lr = s.dual(p, "rocof[0]"), lq = s.dual(p, "qss[0]");
  const auto& sp = p.params;
  const double sync = (z.mu - z.lambda1) / sp.f0 + 2 * lr;
  CHECK(pr.energy == doctest::Approx(s.dual(p, "load_balance[0]")));
  CHECK(pr.sync_inertia == doctest::Approx(sync));
  CHECK(pr.synt_inertia == doctest::Approx(sync - lq * sp.k_rec));
  CHECK(pr.efr == doctest::Approx((z.lambda1 - z.mu) * sp.t_efr / (4 * sp.delta_f_max) +
                                  z.lambda2 / std::sqrt(sp.delta_f_max) + lq));
  CHECK(pr.pfr == doctest::Approx((z.mu + z.lambda1) / sp.t_pfr + lq));
}

TEST_CASE("energy price brackets the demand sensitivity") {
  // The optimal cost is convex in demand, so its dual sits between one-sided differences.
  for (double w : {0.0, 10000.0, 20000.0}) {
    auto f = build_gb_reference_fleet(w, 0.15, 0, 5, 0.05);
    PricingOptions po;
    const auto out = dispatchable_prices(f, po);
    REQUIRE(out.ok());
    const double lambda = out.prices->periods[0].energy;
    const double d = f.params.demand[0], h = 1.0;
    const double mid = relaxed_cost(f);
    f.params.demand = {d + h};
    const double up = (relaxed_cost(f) - mid) / h;
    f.params.demand = {d - h};
    const double down = (mid - relaxed_cost(f)) / h;
    CHECK(lambda >= down - 1e-4 * std::max(1.0, std::abs(down)));
    CHECK(lambda <= up + 1e-4 * std::max(1.0, std::abs(up)));
  }
}

TEST_CASE("restricted equals dispatchable without commitment decisions") {
  const auto f = must_run_fleet();
  const auto d = dispatchable_prices(f);
  const auto r = restricted_prices(f);
  REQUIRE(d.ok());
  REQUIRE(r.ok());
  const auto& a = d.prices->periods[0];
  const auto& b = r.prices->periods[0];
  CHECK(a.energy == doctest::Approx(b.energy).epsilon(1e-6));
  CHECK(a.sync_inertia == doctest::Approx(b.sync_inertia).epsilon(1e-6));
  CHECK(a.pfr == doctest::Approx(b.pfr).epsilon(1e-6));
  CHECK(b.commitment.empty());
}

TEST_CASE("restricted mode moves frequency value into commitment prices") {
  const auto f = build_gb_reference_fleet(20000, 0, 0.3, 5, 0.05);
  const auto r = restricted_prices(f);
  REQUIRE(r.ok());
  const auto& pr = r.prices->periods[0];
  CHECK(std::abs(pr.rocof_dual) <= 1e-6);
  CHECK(std::abs(pr.qss_dual) <= 1e-6);
  CHECK(std::abs(pr.nadir.mu) <= 1e-6);
  CHECK(pr.commitment.size() == 50);
  const auto st = settle(r.schedule_program, r.schedule, *r.prices, f);
  const auto gfm = st.group_total("WIND_GFM");
  CHECK(std::abs(gfm.inertia_revenue + gfm.response_revenue) <= 1e-3);
}

TEST_CASE("settlement identities") {
  const auto f = build_gb_reference_fleet(20000, 0.15, 0, 5, 0.05);
  const auto out = dispatchable_prices(f);
  REQUIRE(out.ok());
  const auto st = settle(out.schedule_program, out.schedule, *out.prices, f);
  const auto& pr = out.prices->periods[0];
  for (const auto& u : st.units) {
    CHECK(u.energy_revenue == doctest::Approx(pr.energy * u.energy).epsilon(1e-9));
    if (u.group == "GAS") CHECK(u.response_revenue == doctest::Approx(pr.pfr * u.response).epsilon(1e-9));
    if (u.group == "WIND_EFR") CHECK(u.response_revenue == doctest::Approx(pr.efr * u.response).epsilon(1e-9));
    CHECK(u.make_whole >= 0);
    if (u.committed && u.group == "GAS") CHECK(u.profit() >= -1e-6);
  }
  double energy = 0;
  for (const auto& u : st.units) energy += u.energy;
  CHECK(energy == doctest::Approx(f.params.demand[0]).epsilon(1e-6));
  REQUIRE(st.by_period.size() == 1);
  CHECK(st.by_period[0].size() == st.units.size());
  CHECK(st.groups() == std::vector<std::string>{"NUC", "GAS", "WIND", "WIND_EFR", "WIND_GFM"});
  CHECK_THROWS_AS(st.unit("NOPE"), std::out_of_range);
}

TEST_CASE("settlement rejects a fleet that does not match the program") {
  const auto f = build_gb_reference_fleet(20000, 0.15, 0, 5, 0.05);
  const auto out = dispatchable_prices(f);
  REQUIRE(out.ok());
  auto other = f;
  other.generators[5].id = "STRANGER";
  CHECK_THROWS_AS(settle(out.schedule_program, out.schedule, *out.prices, other),
                  std::invalid_argument);
}

TEST_CASE("minimal-response dispatch keeps the cost") {
  const auto p = build_single_period(build_gb_reference_fleet(0, 0, 0, 5, 0.05));
  const auto s = solve_misocp(p);
  REQUIRE(s.optimal());
  const auto m = minimal_response_dispatch(p, s);
  REQUIRE(m.optimal());
  CHECK(m.objective <= s.objective * (1 + 1e-6));
  auto total_r = [&](const Solution& x) {
    double r = 0;
    for (const auto& v : p.vars)
      if (v.name.role == Role::r_g) r += x.primal[v.index];
    return r;
  };
  CHECK(total_r(m) <= total_r(s) + 1e-6);
  // The nadir alone needs R_G >= P_L^2 T_PFR f0 / (4 df H) with H = 50 * 5 * 550.
  CHECK(total_r(m) == doctest::Approx(1800.0 * 1800 * 10 * 50 / (4 * 0.8 * 137500)).epsilon(1e-6));
  CHECK(check_security(dispatch_point(p, m.primal)).all_ok());
}

TEST_CASE("convex hull check on a small affine fleet") {
  const auto rep = chp_equivalence_check(fixtures::hetero_fleet(900));
  CHECK_FALSE(rep.refused);
  CHECK(rep.equivalent);
  CHECK(rep.units_checked == 3);
  CHECK(rep.fractional_vertices.empty());
  REQUIRE(rep.dual_value.has_value());
  REQUIRE(rep.relaxed_optimum.has_value());
  CHECK(*rep.dual_value == doctest::Approx(*rep.relaxed_optimum).epsilon(1e-6));
}

TEST_CASE("convex hull check refuses quadratic costs") {
  auto f = fixtures::hetero_fleet(900);
  f.generators[1].c_q = 0.01;
  const auto rep = chp_equivalence_check(f);
  CHECK(rep.refused);
  CHECK_FALSE(rep.equivalent);
  CHECK(rep.message.find("MID") != std::string::npos);
}

TEST_CASE("Lagrangian dual value bounds the integer optimum") {
  const auto f = fixtures::identical_fleet(7);
  BuildOptions o;
  o.relax_binaries = true;
  const auto relaxed = build_single_period(f, o);
  const auto s = solve_socp(relaxed);
  REQUIRE(s.optimal());
  const auto mip = solve_misocp(build_single_period(f));
  REQUIRE(mip.optimal());
  const double L = lagrangian_dual_value(relaxed, s);
  CHECK(L <= mip.objective + 1e-6 * mip.objective);
  CHECK(L == doctest::Approx(s.objective).epsilon(1e-6));
}

TEST_CASE("mode names") {
  CHECK(std::string(to_string(PricingMode::dispatchable)) == "dispatchable");
  CHECK(std::string(to_string(PricingMode::restricted)) == "restricted");
}
