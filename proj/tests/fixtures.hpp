#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include "freqclear/conic_solver.hpp"

namespace fixtures {

using namespace freqclear;

inline GeneratorSpec gas(const char* id, double p_max, double p_msg, double c_nl, double c_m,
                         double h, double r_max) {
  GeneratorSpec g;
  g.id = id;
  g.p_max = p_max;
  g.p_msg = p_msg;
  g.c_nl = c_nl;
  g.c_m = c_m;
  g.h = h;
  g.r_max = r_max;
  g.response_kind = ResponseKind::pfr;
  return g;
}

inline InverterResourceSpec wind(const char* id, double avail, InverterControl c = InverterControl::energy_only) {
  InverterResourceSpec w;
  w.id = id;
  w.p_max = std::max(avail, 1.0);
  w.p_avail = avail;
  w.control = c;
  return w;
}

// n identical units; six are needed for the nadir, four for energy.
inline FleetSpec identical_fleet(int n, double demand = 1500, double wind_mw = 800) {
  FleetSpec f;
  for (int k = 0; k < n; ++k) {
    char id[16];
    std::snprintf(id, sizeof id, "GAS%02d", k + 1);
    f.generators.push_back(gas(id, 400, 150, 900, 45, 6, 200));
  }
  f.inverter_resources.push_back(wind("WIND", wind_mw));
  f.params.p_loss = 300;
  f.params.demand = {demand};
  return f;
}

inline FleetSpec hetero_fleet(double demand = 900, double wind_mw = 300) {
  FleetSpec f;
  f.generators.push_back(gas("BIG", 800, 300, 3000, 40, 6, 300));
  f.generators.push_back(gas("MID", 500, 100, 1000, 60, 4, 250));
  f.generators.push_back(gas("PEAK", 300, 50, 500, 80, 8, 150));
  f.inverter_resources.push_back(wind("WIND", wind_mw));
  f.params.p_loss = 200;
  f.params.demand = {demand};
  return f;
}

struct Enumerated {
  double objective = std::numeric_limits<double>::infinity();
  int feasible = 0;
  int combinations = 0;
};

// Every commitment vector fixed in turn and the continuous rest solved.
inline Enumerated enumerate_commitments(const ConicProgram& p) {
  std::vector<int> ints;
  for (const auto& v : p.vars)
    if (v.is_integer()) ints.push_back(v.index);
  std::vector<double> lo(p.vars.size()), hi(p.vars.size());
  for (const auto& v : p.vars) {
    lo[v.index] = v.lo;
    hi[v.index] = v.hi;
  }
  Enumerated e;
  const long n = 1L << ints.size();
  for (long mask = 0; mask < n; ++mask) {
    for (size_t k = 0; k < ints.size(); ++k) lo[ints[k]] = hi[ints[k]] = (mask >> k) & 1;
    const auto s = solve_socp(p, lo, hi);
    ++e.combinations;
    if (!s.optimal()) continue;
    ++e.feasible;
    e.objective = std::min(e.objective, s.objective);
  }
  return e;
}

}  // namespace fixtures
