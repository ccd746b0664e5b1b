#include <cmath>
#include <random>

#include "doctest.h"

#include "freqclear/frequency_dynamics.hpp"

using namespace freqclear;

namespace {

DispatchPoint point(double h, double r_efr, double r_pfr, double h_synt = 0) {
  DispatchPoint p;
  p.h_sync = h;
  p.h_synt = h_synt;
  p.r_efr = r_efr;
  p.r_pfr = r_pfr;
  p.p_loss = 1800;
  return p;
}

// Swing equation integrated with small explicit steps.
double euler_depth(const DispatchPoint& p, double horizon, double dt) {
  const double H = p.inertia();
  double df = 0, worst = 0;
  for (double t = 0; t < horizon; t += dt) {
    const double tm = t + 0.5 * dt;
    const double fr = response_profile(tm, p) - recovery_profile(tm, p, p.params.t_rec);
    df += dt * p.params.f0 / (2 * H) * (fr - p.p_loss);
    worst = std::min(worst, df);
  }
  return -worst;
}

}  // namespace

TEST_CASE("zero response gives a linear decline") {
  const auto p = point(90000, 0, 0);
  const auto tr = simulate_post_fault(p, 2.0, 0.1);
  REQUIRE(tr.times.size() == tr.delta_f.size());
  for (size_t k = 0; k < tr.times.size(); ++k)
    CHECK(tr.delta_f[k] == doctest::Approx(-50.0 * 1800 * tr.times[k] / (2 * 90000)).epsilon(1e-12));
  CHECK(tr.delta_f.back() == doctest::Approx(-1.0));
}

TEST_CASE("response profiles ramp linearly and saturate") {
  const auto p = point(100000, 500, 2000);
  CHECK(response_profile(0, p) == doctest::Approx(0));
  CHECK(response_profile(0.5, p) == doctest::Approx(250 + 100));
  CHECK(response_profile(1.0, p) == doctest::Approx(500 + 200));
  CHECK(response_profile(5.0, p) == doctest::Approx(500 + 1000));
  CHECK(response_profile(20.0, p) == doctest::Approx(2500));
}

TEST_CASE("recovery starts strictly after t_rec") {
  const auto p = point(100000, 0, 2000, 20000);
  CHECK(recovery_profile(10.5, p, 10.5) == 0);
  CHECK(recovery_profile(10.5000001, p, 10.5) == doctest::Approx(0.05 * 20000));
  CHECK(recovery_profile(3, p, 10.5) == 0);
}

TEST_CASE("PFR-only nadir matches the closed form") {
  // df = f0/(2H) (P_L t - R_G t^2 / (2 T_P)); minimum at t = P_L T_P / R_G.
  const double H = 120000, RG = 3000, PL = 1800, f0 = 50, TP = 10;
  const auto p = point(H, 0, RG);
  const auto n = analytic_nadir(p);
  CHECK(n.t_nadir == doctest::Approx(PL * TP / RG));
  CHECK(n.depth == doctest::Approx(f0 * PL * PL * TP / (4 * H * RG)));
  CHECK(euler_depth(p, 12, 1e-4) == doctest::Approx(n.depth).epsilon(1e-6));
}

TEST_CASE("nadir with EFR matches the closed form") {
  // After the EFR ramp: df(t) = f0/(2H) (-(P_L - R_I) t - R_I T_E / 2 + R_G t^2/(2 T_P)).
  const double H = 100000, RI = 600, RG = 2500, PL = 1800, f0 = 50, TE = 1, TP = 10;
  const auto p = point(H, RI, RG);
  const double tn = (PL - RI) * TP / RG;
  const double depth = f0 / (2 * H) * ((PL - RI) * tn + RI * TE / 2 - RG * tn * tn / (2 * TP));
  const auto n = analytic_nadir(p);
  CHECK_FALSE(n.before_efr);
  CHECK(n.t_nadir == doctest::Approx(tn));
  CHECK(n.depth == doctest::Approx(depth));
}

TEST_CASE("analytic and simulated nadir agree on random secure points") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uh(45000, 400000), ue(0, 1800), ug(1000, 8000), us(0, 20000);
  int checked = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto p = point(uh(rng), ue(rng), ug(rng), us(rng));
    if (!check_security(p).all_ok()) continue;
    const auto n = analytic_nadir(p);
    const auto tr = simulate_post_fault(p, 30, 0.01);
    CHECK(std::abs(tr.nadir_depth - n.depth) <= 1e-6);
    CHECK(std::abs(tr.nadir_time - n.t_nadir) <= 1e-6);
    ++checked;
  }
  CHECK(checked > 200);
}

TEST_CASE("nadir inside the EFR ramp") {
  // Large EFR and fast PFR: the loss is covered before T_EFR.
  const auto p = point(100000, 1800, 18000);
  const auto n = analytic_nadir(p);
  CHECK(n.before_efr);
  const auto tr = simulate_post_fault(p, 5, 0.001);
  CHECK(tr.nadir_depth == doctest::Approx(n.depth).epsilon(1e-9));
}

TEST_CASE("nadir needs inertia and response") {
  CHECK_THROWS_AS(analytic_nadir(point(0, 0, 1000)), NadirError);
  CHECK_THROWS_AS(analytic_nadir(point(100000, 0, 0)), NadirError);
  CHECK_THROWS_AS(simulate_post_fault(point(0, 0, 1000), 10, 0.1), NadirError);
  CHECK_THROWS_AS(simulate_post_fault(point(100000, 0, 1000), 10, 0), std::invalid_argument);
}

TEST_CASE("security check on the RoCoF boundary") {
  // 2H = P_L f0 / RoCoF_max gives H = 45 000 MW s.
  auto p = point(45000, 1800, 20000);
  auto s = check_security(p);
  CHECK(s.rocof_ok);
  CHECK(s.rocof_margin == doctest::Approx(0).epsilon(1e-9));
  p.h_sync = 44000;
  CHECK_FALSE(check_security(p).rocof_ok);
}

TEST_CASE("security check margins") {
  const auto p = point(200000, 0, 4000, 10000);
  const auto s = check_security(p);
  CHECK(s.rocof_margin == doctest::Approx(2 * 210000 - 1800 * 50));
  CHECK(s.qss_margin == doctest::Approx(4000 - 1800 - 0.05 * 10000));
  CHECK(s.nadir_margin == doctest::Approx(0.8 - s.simulated_depth));
  CHECK(s.all_ok() == (s.rocof_ok && s.nadir_ok && s.qss_ok));

  const auto weak = check_security(point(200000, 0, 1900, 10000));
  CHECK_FALSE(weak.qss_ok);
}

TEST_CASE("second dip from the recovery step is recorded") {
  // Small PFR surplus over the loss, large synthetic inertia.
  const auto p = point(60000, 0, 2400, 100000);
  const auto tr = simulate_post_fault(p, 40, 0.01);
  REQUIRE(tr.second_nadir_depth.has_value());
  CHECK(*tr.second_nadir_depth >= 0);
}
