#include "freqclear/scenario_runner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace freqclear {

namespace {

constexpr double kWindCapacity = 30000.0;  // MW installed in the GB reference system

}  // namespace

const std::vector<Preset>& presets() {
  static const std::vector<Preset> list = {
      {"no-services", 0.0, 0.0, 5, 0.05, false, "wind provides energy only"},
      {"efr15", 0.15, 0.0, 5, 0.05, false, "15% of wind with EFR capability"},
      {"gfm30", 0.0, 0.3, 5, 0.05, false, "30% of wind with GFM inverters, H_i = 5 s"},
      {"gfm30-h3", 0.0, 0.3, 3, 0.05, false, "30% of wind with GFM inverters, H_i = 3 s"},
      {"efr60-gfm30", 0.6, 0.3, 5, 0.05, false, "60% EFR and 30% GFM wind"},
      {"efr46-gfm40", 0.46, 0.4, 5, 0.05, false, "46% EFR and 40% GFM wind"},
      {"multi-gfm30", 0.0, 0.3, 5, 0.05, true, "24 hours, 30% GFM wind"},
      {"multi-efr15", 0.15, 0.0, 5, 0.05, true, "24 hours, 15% EFR wind"},
  };
  return list;
}

const Preset& find_preset(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return p;
  std::string known;
  for (const auto& p : presets()) known += (known.empty() ? "" : ", ") + p.name;
  throw std::invalid_argument("unknown preset '" + name + "' (known: " + known + ")");
}

PricingSelection parse_pricing(const std::string& s) {
  if (s == "dispatchable") return PricingSelection::dispatchable;
  if (s == "restricted") return PricingSelection::restricted;
  if (s == "both") return PricingSelection::both;
  throw std::invalid_argument("pricing mode must be dispatchable, restricted or both");
}

std::vector<PricingMode> modes_of(PricingSelection s) {
  switch (s) {
    case PricingSelection::dispatchable: return {PricingMode::dispatchable};
    case PricingSelection::restricted: return {PricingMode::restricted};
    case PricingSelection::both: return {PricingMode::dispatchable, PricingMode::restricted};
  }
  return {};
}

std::vector<double> parse_wind_range(const std::string& text) {
  auto num = [&](const std::string& tok) {
    size_t used = 0;
    double v = 0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != tok.size()) throw std::invalid_argument("bad wind value '" + tok + "'");
    return v;
  };
  std::vector<double> out;
  if (text.empty()) return out;
  if (text.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ':')) parts.push_back(num(tok));
    if (parts.size() < 2 || parts.size() > 3) throw std::invalid_argument("range is LO:HI[:STEP]");
    const double step = parts.size() == 3 ? parts[2] : 1.0;
    if (!(step > 0)) throw std::invalid_argument("range step must be positive");
    const int n = static_cast<int>(std::floor((parts[1] - parts[0]) / step + 1e-9));
    for (int k = 0; k <= n; ++k) out.push_back(std::round((parts[0] + k * step) * 1000.0 * 1e6) / 1e6);
    return out;
  }
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(num(tok) * 1000.0);
  return out;
}

void validate_spec(const SweepSpec& s) {
  if (!s.scenario_file) find_preset(s.preset);
  for (double w : s.wind_grid)
    if (!(w >= 0 && w <= kWindCapacity))
      throw std::invalid_argument("wind value " + std::to_string(w) + " MW outside [0, 30000]");
  if (s.forecast_alpha && !(*s.forecast_alpha >= 0 && *s.forecast_alpha <= 1))
    throw std::invalid_argument("alpha must lie in [0,1]");
  if (s.hi_optimize && !(s.h_lo >= 0 && s.h_lo <= s.h_hi))
    throw std::invalid_argument("H_i bounds must satisfy 0 <= lo <= hi");
  if (s.k_rec && *s.k_rec < 0) throw std::invalid_argument("k_rec must be non-negative");
  if (s.jobs < 1) throw std::invalid_argument("jobs must be at least 1");
  if (!(s.wind_fraction >= 0 && s.wind_fraction <= 1))
    throw std::invalid_argument("wind fraction must lie in [0,1]");
  if (s.c_st < 0) throw std::invalid_argument("start-up cost must be non-negative");
}

bool PointResult::secure() const {
  if (security.empty()) return false;
  for (const auto& r : security)
    if (!r.all_ok()) return false;
  return true;
}

int SweepResult::failures() const {
  int n = 0;
  for (const auto& p : points) n += p.failed ? 1 : 0;
  return n;
}

FleetSpec fleet_for(const SweepSpec& spec, double wind_mw) {
  FleetSpec f;
  if (spec.scenario_file) {
    f = load_scenario(*spec.scenario_file);
  } else {
    const Preset& p = find_preset(spec.preset);
    const double h = spec.h_gfm.value_or(p.h_gfm);
    const double k = spec.k_rec.value_or(p.k_rec);
    if (spec.multi_period || p.multi_period) {
      auto demand = spec.demand_profile ? load_demand_profile(*spec.demand_profile)
                                        : default_demand_profile();
      f = build_gb_multi_period_fleet(demand, spec.wind_fraction, p.efr_fraction, p.gfm_fraction,
                                      h, k, spec.c_st);
    } else {
      f = build_gb_reference_fleet(wind_mw, p.efr_fraction, p.gfm_fraction, h, k);
    }
  }
  if (spec.k_rec) f.params.k_rec = *spec.k_rec;
  return f;
}

namespace {

void record_schedule(PointResult& r, const ConicProgram& p, const Solution& s, const FleetSpec& f) {
  auto val = [&](const std::string& id, int t, Role role) {
    const int j = p.find_var(id, t, role);
    return j < 0 ? 0.0 : s.primal[j];
  };
  r.committed.assign(p.periods, 0);
  r.curtailment.assign(p.periods, 0.0);
  for (int t = 0; t < p.periods; ++t) {
    for (const auto& g : f.generators) {
      ScheduleRow row;
      row.unit = g.id;
      row.period = t;
      row.committed = g.must_run ? 1.0 : std::round(val(g.id, t, Role::y_g));
      row.power = val(g.id, t, Role::p_g);
      row.reserve = val(g.id, t, Role::r_g);
      if (!g.must_run && row.committed > 0.5) ++r.committed[t];
      r.schedule.push_back(row);
    }
    for (const auto& I : f.inverter_resources) {
      ScheduleRow row;
      row.unit = I.id;
      row.period = t;
      row.curtailed = val(I.id, t, Role::p_curt);
      row.power = I.available(t) - row.curtailed;
      row.reserve = val(I.id, t, Role::r_i);
      if (I.control == InverterControl::gfm)
        row.h = p.find_var(I.id, t, Role::h_i) >= 0 ? val(I.id, t, Role::h_i) : I.h;
      r.curtailment[t] += row.curtailed;
      r.schedule.push_back(row);
    }
    r.security.push_back(check_security(dispatch_point(p, s.primal, t)));
  }
}

}  // namespace

PointResult run_point(const SweepSpec& spec, double wind_mw) {
  PointResult r;
  r.wind_mw = wind_mw;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const FleetSpec fleet = fleet_for(spec, wind_mw);
    PricingOptions po;
    po.build.forecast_alpha = spec.forecast_alpha;
    if (spec.hi_optimize) {
      po.build.hi_optimize = true;
      po.build.gfm_curtailment = false;
      po.build.h_lo = spec.h_lo;
      po.build.h_hi = spec.h_hi;
    }
    po.multi_period = fleet.params.periods() > 1;
    po.bnb = spec.bnb;

    std::vector<PricingOutcome> outcomes;
    for (PricingMode m : modes_of(spec.pricing)) {
      if (m == PricingMode::dispatchable) {
        outcomes.push_back(dispatchable_prices(fleet, po));
      } else if (!outcomes.empty()) {
        outcomes.push_back(restricted_prices(fleet, po, outcomes.front().schedule_program,
                                             outcomes.front().schedule));
      } else {
        outcomes.push_back(restricted_prices(fleet, po));
      }
    }
    const PricingOutcome& first = outcomes.front();
    const Solution& sched = first.schedule;
    r.status = sched.status;
    r.objective = sched.objective;
    if (sched.bnb) r.bnb = *sched.bnb;
    if (sched.primal.empty()) {
      r.failed = true;
      r.error = std::string("no schedule: ") + to_string(sched.status) + " " + sched.message;
    } else {
      record_schedule(r, first.schedule_program, sched, fleet);
      if (!sched.optimal()) {
        r.failed = true;
        r.error = std::string("schedule not proven optimal: ") + sched.message;
      }
      for (size_t t = 0; t < r.security.size(); ++t)
        if (!r.security[t].all_ok()) {
          r.failed = true;
          r.error = "security check failed in period " + std::to_string(t) + ": " + r.security[t].note;
          break;
        }
    }
    for (const auto& o : outcomes) {
      ModeResult m;
      m.mode = o.mode;
      m.diagnostic = o.diagnostic;
      m.prices = o.prices;
      if (o.prices && !sched.primal.empty())
        m.settlement = settle(o.schedule_program, sched, *o.prices, fleet);
      if (!o.prices) {
        r.failed = true;
        if (r.error.empty()) r.error = std::string(to_string(o.mode)) + " prices: " + o.diagnostic;
      }
      r.modes.push_back(std::move(m));
    }
  } catch (const std::exception& e) {
    r.failed = true;
    r.error = e.what();
  }
  r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (spec.verbose)
    std::fprintf(stderr, "point %.0f MW: %s%s%s (%.2f s)\n", wind_mw, to_string(r.status),
                 r.failed ? " FAILED " : "", r.error.c_str(), r.runtime_s);
  return r;
}

SweepResult run_sweep(const SweepSpec& spec) {
  validate_spec(spec);
  SweepResult res;
  res.spec = spec;
  std::vector<double> grid = spec.wind_grid;
  if (spec.scenario_file && grid.empty()) grid.push_back(0.0);
  res.points.resize(grid.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t k = next++; k < grid.size(); k = next++) res.points[k] = run_point(spec, grid[k]);
  };
  const int n = std::min<int>(spec.jobs, static_cast<int>(grid.size()));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return res;
}

SweepResult run_multi_period(const SweepSpec& spec) {
  SweepSpec s = spec;
  s.multi_period = true;
  validate_spec(s);
  SweepResult res;
  res.spec = s;
  res.points.push_back(run_point(s, s.wind_fraction * kWindCapacity));
  return res;
}

}  // namespace freqclear
