#include "freqclear/system_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace freqclear {

namespace {

void add(std::vector<Diagnostic>& out, Severity sev, std::string field, std::string msg,
         std::string code = "invariant") {
  out.push_back({sev, std::move(field), std::move(msg), std::move(code)});
}

std::string gen_field(const GeneratorSpec& g, const char* name) {
  return "generator[" + g.id + "]." + name;
}

std::string inv_field(const InverterResourceSpec& r, const char* name) {
  return "inverter_resource[" + r.id + "]." + name;
}

}  // namespace

const char* to_string(InverterControl c) {
  switch (c) {
    case InverterControl::gfl: return "GFL";
    case InverterControl::gfm: return "GFM";
    case InverterControl::energy_only: return "energy_only";
  }
  return "?";
}

const char* to_string(ResponseKind r) { return r == ResponseKind::pfr ? "PFR" : "none"; }

std::vector<Diagnostic> validate(const FleetSpec& fleet) {
  std::vector<Diagnostic> d;
  const auto E = Severity::error;
  const SystemParams& p = fleet.params;

  std::set<std::string> ids;
  for (const auto& g : fleet.generators) {
    if (g.id.empty()) add(d, E, "generator.id", "empty id");
    if (!ids.insert(g.id).second) add(d, E, gen_field(g, "id"), "duplicate id");
    if (g.p_msg < 0) add(d, E, gen_field(g, "p_msg"), "p_msg must be non-negative");
    if (g.p_msg > g.p_max) add(d, E, gen_field(g, "p_msg"), "p_msg exceeds p_max");
    if (g.r_max < 0) add(d, E, gen_field(g, "r_max"), "r_max must be non-negative");
    if (g.h < 0) add(d, E, gen_field(g, "h"), "h must be non-negative");
    if (g.c_nl < 0 || g.c_m < 0 || g.c_st < 0 || g.c_q < 0)
      add(d, E, gen_field(g, "c_m"), "costs must be non-negative");
    if (g.t_st < 0 || g.t_mut < 0 || g.t_mdt < 0)
      add(d, E, gen_field(g, "t_st"), "lead and minimum times must be non-negative");
    if (g.initial_periods < 0)
      add(d, E, gen_field(g, "initial_periods"), "initial_periods must be non-negative");
    if (g.response_kind == ResponseKind::none && g.r_max > 0)
      add(d, Severity::warning, gen_field(g, "r_max"),
          "r_max ignored for a unit without a response service");
    if (g.c_q != 0)
      add(d, Severity::warning, gen_field(g, "c_q"),
          "quadratic cost cannot be scheduled by the conic builder");
  }

  for (const auto& r : fleet.inverter_resources) {
    if (r.id.empty()) add(d, E, "inverter_resource.id", "empty id");
    if (!ids.insert(r.id).second) add(d, E, inv_field(r, "id"), "duplicate id");
    if (r.p_avail < 0 || r.p_avail > r.p_max)
      add(d, E, inv_field(r, "p_avail"), "p_avail must lie in [0, p_max]");
    if (r.r_max < 0) add(d, E, inv_field(r, "r_max"), "r_max must be non-negative");
    if (r.alpha < 0 || r.alpha > 1) add(d, E, inv_field(r, "alpha"), "alpha must lie in [0, 1]");
    if (r.h < 0) add(d, E, inv_field(r, "h"), "h must be non-negative");
    switch (r.control) {
      case InverterControl::energy_only:
        if (r.h != 0) add(d, E, inv_field(r, "h"), "energy-only resource cannot carry inertia");
        if (r.r_max != 0) add(d, E, inv_field(r, "r_max"), "energy-only resource cannot hold EFR");
        break;
      case InverterControl::gfl:
        if (r.h != 0) add(d, E, inv_field(r, "h"), "GFL cannot carry synthetic inertia constant");
        break;
      case InverterControl::gfm:
        if (r.r_max != 0) add(d, E, inv_field(r, "r_max"), "EFR is restricted to GFL resources");
        break;
    }
    if (r.h_optimizable) {
      if (r.control != InverterControl::gfm)
        add(d, E, inv_field(r, "h_optimizable"), "only GFM resources have an optimizable H");
      if (r.h_lo < 0 || r.h_lo > r.h_hi)
        add(d, E, inv_field(r, "h_lo"), "need 0 <= h_lo <= h_hi");
    }
    if (!r.p_avail_profile.empty()) {
      if (static_cast<int>(r.p_avail_profile.size()) != p.periods())
        add(d, E, inv_field(r, "p_avail_profile"), "profile length differs from demand length");
      for (double v : r.p_avail_profile)
        if (v < 0 || v > r.p_max) {
          add(d, E, inv_field(r, "p_avail_profile"), "profile entry outside [0, p_max]");
          break;
        }
    }
  }

  auto positive = [&](double v, const char* name) {
    if (!(v > 0)) add(d, E, std::string("system.") + name, std::string(name) + " must be positive");
  };
  positive(p.f0, "f0");
  positive(p.delta_f_max, "delta_f_max");
  positive(p.rocof_max, "rocof_max");
  positive(p.t_efr, "t_efr");
  positive(p.t_pfr, "t_pfr");
  // Zero means no credible infeed loss is studied.
  if (!(p.p_loss >= 0)) add(d, E, "system.p_loss", "p_loss must be non-negative");
  if (p.k_rec < 0) add(d, E, "system.k_rec", "k_rec must be non-negative");
  if (!(p.t_efr < p.t_pfr)) add(d, E, "system.t_efr", "t_efr must be below t_pfr");
  if (!(p.t_rec > p.t_pfr)) add(d, E, "system.t_rec", "t_rec must exceed t_pfr");
  if (p.delta_f_max > 0 && p.rocof_max > 0 && !(p.t_efr < 2 * p.delta_f_max / p.rocof_max)) {
    std::ostringstream m;
    m << "t_efr = " << p.t_efr << " s is not below 2*delta_f_max/rocof_max = "
      << 2 * p.delta_f_max / p.rocof_max << " s; the nadir could fall inside the EFR ramp";
    add(d, E, "system.t_efr", m.str(), "nadir_regime");
  }
  if (p.demand.size() != 1 && p.demand.size() != 24)
    add(d, E, "system.demand", "demand must be a scalar or a 24-entry profile");
  for (double v : p.demand)
    if (v < 0) {
      add(d, E, "system.demand", "demand must be non-negative");
      break;
    }

  double cap = 0;
  for (const auto& g : fleet.generators) cap += g.p_max;
  for (int t = 0; t < p.periods(); ++t) {
    double wind = 0;
    for (const auto& r : fleet.inverter_resources)
      if (r.p_avail_profile.empty() || static_cast<int>(r.p_avail_profile.size()) == p.periods())
        wind += r.available(t);
    if (cap + wind + 1e-9 < p.demand[t]) {
      std::ostringstream m;
      m << "period " << t << ": demand " << p.demand[t] << " MW exceeds available capacity "
        << cap + wind << " MW";
      add(d, E, "system.demand", m.str(), "capacity");
      break;
    }
  }
  return d;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(),
                     [](const Diagnostic& x) { return x.severity == Severity::error; });
}

namespace {

GeneratorSpec nuclear_unit() {
  GeneratorSpec n;
  n.id = "NUC";
  n.p_max = 1800;
  n.p_msg = 1800;
  n.c_m = 10;
  n.h = 0;
  n.provides_inertia = false;  // its own outage is the largest loss
  n.must_run = true;
  n.initially_online = true;
  return n;
}

GeneratorSpec gas_unit(int k, const GbOptions& o) {
  GeneratorSpec g;
  char buf[16];
  std::snprintf(buf, sizeof buf, "GAS%02d", k);
  g.id = buf;
  g.p_max = 550;
  g.p_msg = 250;
  g.c_nl = 500;
  g.c_m = 50;
  g.c_st = o.gas_c_st;
  g.h = 5;
  g.r_max = 0.2 * g.p_max;
  g.t_st = o.gas_t_st;
  g.t_mut = o.gas_t_mut;
  g.t_mdt = o.gas_t_mdt;
  g.provides_inertia = true;
  g.response_kind = ResponseKind::pfr;
  return g;
}

void add_wind(FleetSpec& f, double capacity, double available, double efr_frac, double gfm_frac,
              double h_gfm) {
  const double plain = 1.0 - efr_frac - gfm_frac;
  InverterResourceSpec w;
  w.id = "WIND";
  w.control = InverterControl::energy_only;
  w.p_max = plain * capacity;
  w.p_avail = plain * available;
  f.inverter_resources.push_back(w);

  InverterResourceSpec e;
  e.id = "WIND_EFR";
  e.control = InverterControl::gfl;
  e.p_max = efr_frac * capacity;
  e.p_avail = efr_frac * available;
  e.r_max = 0.3 * e.p_avail;
  f.inverter_resources.push_back(e);

  InverterResourceSpec m;
  m.id = "WIND_GFM";
  m.control = InverterControl::gfm;
  m.p_max = gfm_frac * capacity;
  m.p_avail = gfm_frac * available;
  m.h = h_gfm;
  f.inverter_resources.push_back(m);
}

void check_fractions(double efr, double gfm) {
  if (efr < 0 || efr > 1 || gfm < 0 || gfm > 1 || efr + gfm > 1 + 1e-12)
    throw std::invalid_argument("wind fractions must lie in [0,1] and sum to at most 1");
}

}  // namespace

FleetSpec build_gb_reference_fleet(double wind_available, double wind_efr_fraction,
                                   double wind_gfm_fraction, double h_gfm, double k_rec,
                                   const GbOptions& opts) {
  check_fractions(wind_efr_fraction, wind_gfm_fraction);
  if (wind_available < 0 || wind_available > opts.wind_capacity)
    throw std::invalid_argument("wind_available must lie in [0, installed capacity]");
  FleetSpec f;
  f.generators.push_back(nuclear_unit());
  for (int k = 1; k <= 50; ++k) f.generators.push_back(gas_unit(k, opts));
  add_wind(f, opts.wind_capacity, wind_available, wind_efr_fraction, wind_gfm_fraction, h_gfm);
  f.params.k_rec = k_rec;
  f.params.demand = {25000.0};
  return f;
}

FleetSpec build_gb_multi_period_fleet(const std::vector<double>& demand, double wind_fraction,
                                      double wind_efr_fraction, double wind_gfm_fraction,
                                      double h_gfm, double k_rec, double c_st) {
  if (demand.size() != 24) throw std::invalid_argument("multi-period demand needs 24 entries");
  if (wind_fraction < 0 || wind_fraction > 1)
    throw std::invalid_argument("wind_fraction must lie in [0,1]");
  GbOptions o;
  o.gas_c_st = c_st;
  o.gas_t_st = 4;
  o.gas_t_mut = 4;
  o.gas_t_mdt = 1;
  FleetSpec f = build_gb_reference_fleet(wind_fraction * o.wind_capacity, wind_efr_fraction,
                                         wind_gfm_fraction, h_gfm, k_rec, o);
  for (auto& g : f.generators) {
    if (g.must_run) continue;
    g.initially_online = true;
    g.initial_periods = 1000;
  }
  f.params.demand = demand;
  return f;
}

std::vector<double> load_demand_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open demand profile " + path);
  std::vector<double> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto comma = line.find(',');
    std::string value = comma == std::string::npos ? line : line.substr(comma + 1);
    try {
      size_t used = 0;
      double v = std::stod(value, &used);
      out.push_back(v);
    } catch (const std::exception&) {
      if (out.empty()) continue;  // header
      throw ScenarioError("bad demand value '" + value + "'", lineno, "demand_mw");
    }
  }
  return out;
}

std::vector<double> default_demand_profile() {
  return load_demand_profile(std::string(FREQCLEAR_DATA_DIR) + "/demand_profile_gb.csv");
}

double total_inertia_capability(const FleetSpec& fleet) {
  double h = 0;
  for (const auto& g : fleet.generators)
    if (g.provides_inertia) h += g.h * g.p_max;
  return h;
}

}  // namespace freqclear
