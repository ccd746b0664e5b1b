#include <cmath>

#include "doctest.h"

#include "fixtures.hpp"
#include "freqclear/conic_solver.hpp"

using namespace freqclear;

namespace {

ConicProgram small_lp() {
  // min -x - 2y  s.t.  x + y <= 4, x - y >= -2, 0 <= x, y <= 5
  ConicProgram p;
  const int x = p.add_var(VarKind::continuous, 0, kInf, {"x", 0, Role::p_g}, -1);
  const int y = p.add_var(VarKind::continuous, 0, 5, {"y", 0, Role::p_g}, -2);
  p.add_row({{x, 1}, {y, 1}}, Sense::le, 4, "cap");
  p.add_row({{x, 1}, {y, -1}}, Sense::ge, -2, "gap");
  return p;
}

}  // namespace

TEST_CASE("LP optimum and duals") {
  const auto p = small_lp();
  const auto s = solve_socp(p);
  REQUIRE(s.optimal());
  // Vertex x = 1, y = 3: the gap row is active along with cap.
  CHECK(s.primal[0] == doctest::Approx(1).epsilon(1e-7));
  CHECK(s.primal[1] == doctest::Approx(3).epsilon(1e-7));
  CHECK(s.objective == doctest::Approx(-7).epsilon(1e-8));
  // Stationarity by hand: x: -1 + l_cap - l_gap = 0, y: -2 + l_cap + l_gap = 0.
  CHECK(s.dual(p, "cap") == doctest::Approx(1.5).epsilon(1e-6));
  CHECK(s.dual(p, "gap") == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(verify_kkt(p, s).ok(1e-7));
}

TEST_CASE("second-order cone with known optimum") {
  // min t  s.t.  ||(u - 3, v - 4)|| <= t,  u + v = 0
  ConicProgram p;
  const int t = p.add_var(VarKind::continuous, -kInf, kInf, {"t", 0, Role::p_g}, 1);
  const int u = p.add_var(VarKind::continuous, -kInf, kInf, {"u", 0, Role::p_g});
  const int v = p.add_var(VarKind::continuous, -kInf, kInf, {"v", 0, Role::p_g});
  p.add_row({{u, 1}, {v, 1}}, Sense::eq, 0, "line");
  SocBlock b;
  b.a[0] = {{u, 1}};
  b.a0[0] = -3;
  b.a[1] = {{v, 1}};
  b.a0[1] = -4;
  b.c = {{t, 1}};
  b.handle = "cone";
  p.add_soc(b);
  const auto s = solve_socp(p);
  REQUIRE(s.optimal());
  // Distance from (3, 4) to the line u + v = 0 is 7 / sqrt(2).
  CHECK(s.objective == doctest::Approx(7 / std::sqrt(2.0)).epsilon(1e-8));
  const auto z = s.soc_dual(p, "cone");
  CHECK(z.mu == doctest::Approx(1).epsilon(1e-7));
  CHECK(std::hypot(z.lambda1, z.lambda2) <= z.mu + 1e-8);
  CHECK(verify_kkt(p, s).ok(1e-7));
}

TEST_CASE("infeasible and unbounded programs") {
  ConicProgram p;
  const int x = p.add_var(VarKind::continuous, 0, 1, {"x", 0, Role::p_g}, 1);
  p.add_row({{x, 1}}, Sense::ge, 2, "too_much");
  CHECK(solve_socp(p).status == SolveStatus::infeasible);

  ConicProgram q;
  q.add_var(VarKind::continuous, 0, kInf, {"x", 0, Role::p_g}, -1);
  CHECK(solve_socp(q).status == SolveStatus::unbounded);
}

TEST_CASE("KKT check flags perturbed duals") {
  const auto p = small_lp();
  auto s = solve_socp(p);
  REQUIRE(verify_kkt(p, s).ok(1e-7));
  s.row_duals[0] += 0.1;
  CHECK_FALSE(verify_kkt(p, s).ok(1e-3));
  s = solve_socp(p);
  s.row_duals[1] = -1;  // wrong sign on a >= row
  CHECK(verify_kkt(p, s).dual_feas >= 1 - 1e-9);
}

TEST_CASE("nadir cone duals are cone feasible on the reference system") {
  for (double w : {0.0, 10000.0, 20000.0, 28000.0}) {
    BuildOptions o;
    o.relax_binaries = true;
    const auto p = build_single_period(build_gb_reference_fleet(w, 0.15, 0.3, 5, 0.05), o);
    const auto s = solve_socp(p);
    REQUIRE(s.optimal());
    const auto z = s.soc_dual(p, "nadir[0]");
    CHECK(std::hypot(z.lambda1, z.lambda2) <= z.mu + 1e-7 * std::max(1.0, z.mu));
    const auto k = verify_kkt(p, s);
    CHECK(k.ok(1e-6));
    CHECK(k.dual_objective == doctest::Approx(s.objective).epsilon(1e-7));
  }
}

TEST_CASE("branch and bound equals enumeration on identical units") {
  for (int n : {6, 7, 8}) {
    const auto p = build_single_period(fixtures::identical_fleet(n));
    const auto brute = fixtures::enumerate_commitments(p);
    REQUIRE(brute.feasible > 0);
    for (bool symmetry : {true, false}) {
      BnbLimits lim;
      lim.symmetry = symmetry;
      const auto s = solve_misocp(p, lim);
      REQUIRE(s.optimal());
      CHECK(s.objective == doctest::Approx(brute.objective).epsilon(1e-6));
    }
  }
}

TEST_CASE("branch and bound equals enumeration on heterogeneous units") {
  for (double demand : {500.0, 900.0, 1300.0}) {
    const auto p = build_single_period(fixtures::hetero_fleet(demand));
    const auto brute = fixtures::enumerate_commitments(p);
    const auto s = solve_misocp(p);
    if (brute.feasible == 0) {
      CHECK(s.status == SolveStatus::infeasible);
      continue;
    }
    REQUIRE(s.optimal());
    CHECK(s.objective == doctest::Approx(brute.objective).epsilon(1e-6));
  }
}

TEST_CASE("integer solution is integral and secure") {
  const auto p = build_single_period(fixtures::identical_fleet(8));
  const auto s = solve_misocp(p);
  REQUIRE(s.optimal());
  REQUIRE(s.bnb.has_value());
  CHECK(s.bnb->gap <= 1e-6);
  for (const auto& v : p.vars)
    if (v.is_integer()) CHECK(std::abs(s.primal[v.index] - std::round(s.primal[v.index])) <= 1e-6);
  CHECK(check_security(dispatch_point(p, s.primal)).all_ok());
}

TEST_CASE("node cap is reported") {
  BnbLimits lim;
  lim.node_cap = 1;
  lim.symmetry = false;
  const auto s = solve_misocp(build_single_period(fixtures::hetero_fleet(900)), lim);
  CHECK((s.status == SolveStatus::node_limit || s.optimal()));
}

TEST_CASE("fixed output beyond demand is certified infeasible") {
  FleetSpec f;
  auto a = fixtures::gas("A", 1000, 1000, 0, 30, 15, 400);
  auto b = fixtures::gas("B", 800, 800, 0, 55, 12, 300);
  a.must_run = b.must_run = true;
  a.initially_online = b.initially_online = true;
  f.generators = {a, b};
  f.inverter_resources.push_back(fixtures::wind("WIND", 200));
  f.params.p_loss = 300;
  f.params.demand = {1200};
  CHECK(solve_socp(build_single_period(f)).status == SolveStatus::infeasible);
}
