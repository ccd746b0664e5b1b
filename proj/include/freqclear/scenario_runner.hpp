#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "freqclear/frequency_dynamics.hpp"
#include "freqclear/pricing_engine.hpp"

namespace freqclear {

struct Preset {
  std::string name;
  double efr_fraction = 0;
  double gfm_fraction = 0;
  double h_gfm = 5;
  double k_rec = 0.05;
  bool multi_period = false;
  std::string description;
};

const std::vector<Preset>& presets();
const Preset& find_preset(const std::string& name);  // std::invalid_argument if unknown

enum class PricingSelection { dispatchable, restricted, both };

PricingSelection parse_pricing(const std::string& s);
std::vector<PricingMode> modes_of(PricingSelection s);

// "20", "0:30" (step 1), "0:30:2" or "5,10,20", in GW; returns MW.
std::vector<double> parse_wind_range(const std::string& text);

struct SweepSpec {
  std::string preset = "no-services";
  std::optional<std::string> scenario_file;  // replaces the preset fleet; one point
  std::vector<double> wind_grid;             // MW available
  PricingSelection pricing = PricingSelection::dispatchable;
  std::optional<double> forecast_alpha;
  bool hi_optimize = false;
  double h_lo = 0, h_hi = 6;
  std::optional<double> k_rec;
  std::optional<double> h_gfm;
  bool multi_period = false;
  double c_st = 10000;
  double wind_fraction = 0.6;  // multi-period wind as a fraction of capacity
  std::optional<std::string> demand_profile;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool verbose = false;
  BnbLimits bnb;
};

// Throws std::invalid_argument on inconsistent flags or grid values.
void validate_spec(const SweepSpec& spec);

struct ScheduleRow {
  std::string unit;
  int period = 0;
  double committed = 0;  // y, 1 for must-run units, empty for inverters
  double power = 0;      // MW delivered
  double reserve = 0;    // MW of PFR or EFR
  double curtailed = 0;  // MW
  double h = 0;          // s, synthetic inertia constant of GFM units
};

struct ModeResult {
  PricingMode mode = PricingMode::dispatchable;
  std::optional<PriceReport> prices;
  std::optional<Settlement> settlement;
  std::string diagnostic;
};

struct PointResult {
  double wind_mw = 0;
  bool failed = false;
  std::string error;
  SolveStatus status = SolveStatus::numerical;
  double objective = 0;
  BnbStats bnb;
  double runtime_s = 0;
  std::vector<int> committed;          // per period, non-must-run units online
  std::vector<double> curtailment;     // per period, MW
  std::vector<SecurityReport> security;
  std::vector<ScheduleRow> schedule;
  std::vector<ModeResult> modes;

  bool secure() const;
};

struct SweepResult {
  SweepSpec spec;
  std::vector<PointResult> points;

  int failures() const;
};

FleetSpec fleet_for(const SweepSpec& spec, double wind_mw);

PointResult run_point(const SweepSpec& spec, double wind_mw);

// Points run on up to spec.jobs threads; results ordered by grid position.
SweepResult run_sweep(const SweepSpec& spec);

// One 24-period solve; the single point carries the wind fraction as wind_mw.
SweepResult run_multi_period(const SweepSpec& spec);

// prices.csv, settlements.csv, schedule.csv, security.csv, summary.json and
// plot_*.dat under out_dir. Throws std::runtime_error naming the path on I/O failure.
void emit_outputs(const SweepResult& result, const std::string& out_dir);

}  // namespace freqclear
