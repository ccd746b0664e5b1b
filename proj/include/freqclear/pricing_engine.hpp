#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "freqclear/conic_solver.hpp"

namespace freqclear {

enum class PricingMode { dispatchable, restricted };

const char* to_string(PricingMode m);

struct BindingFlags {
  bool rocof = false;
  bool nadir = false;
  bool qss = false;
};

struct PeriodPrices {
  double energy = 0;        // £/MWh
  double sync_inertia = 0;  // £/MW·s
  double synt_inertia = 0;  // £/MW·s
  double efr = 0;           // £/MW
  double pfr = 0;           // £/MW
  std::map<std::string, double> commitment;  // £/h, restricted mode only
  BindingFlags binding;
  // Raw duals the prices are built from.
  double rocof_dual = 0;
  double qss_dual = 0;
  SocDual nadir;
};

struct PriceReport {
  PricingMode mode = PricingMode::dispatchable;
  std::vector<PeriodPrices> periods;
  double cone_violation = 0;  // max(0, ||(lambda1, lambda2)|| - mu) over periods
  KktReport kkt;
};

// Prices of one period read from the duals of a solved continuous program.
PeriodPrices prices_from_duals(const ConicProgram& program, const Solution& solution, int period,
                               double binding_tol = 1e-6);

struct PricingOptions {
  BuildOptions build;  // relax_binaries and fixed_commitment are set internally
  BnbLimits bnb;
  bool multi_period = false;
  double binding_tol = 1e-6;
  bool minimal_response = true;  // tie-break the reported dispatch, see below
};

// Same commitment and cost (within 1e-7 relative), least total R_g + R_i,
// largest H_i where it is free.
// Returns the input unchanged when the second solve fails.
Solution minimal_response_dispatch(const ConicProgram& program, const Solution& schedule,
                                   const SolverOptions& options = {});

struct PricingOutcome {
  PricingMode mode = PricingMode::dispatchable;
  ConicProgram schedule_program;  // integer program
  Solution schedule;
  ConicProgram pricing_program;   // relaxed or commitment-fixed program
  Solution pricing;
  std::optional<PriceReport> prices;
  std::string diagnostic;  // set when prices are missing or the schedule is not proven optimal

  bool ok() const { return prices.has_value(); }
};

PricingOutcome dispatchable_prices(const FleetSpec& fleet, const PricingOptions& options = {});

PricingOutcome restricted_prices(const FleetSpec& fleet, const PricingOptions& options = {});

// Reuses an already solved schedule.
PricingOutcome restricted_prices(const FleetSpec& fleet, const PricingOptions& options,
                                 const ConicProgram& schedule_program, const Solution& schedule);

struct UnitSettlement {
  std::string unit;
  std::string group;  // id without trailing digits, e.g. "GAS"
  bool committed = false;
  double energy = 0;     // MWh
  double response = 0;   // MW, summed over periods
  double inertia = 0;    // MW·s, summed over periods
  double energy_revenue = 0;
  double response_revenue = 0;
  double inertia_revenue = 0;
  double commitment_revenue = 0;
  double operating_cost = 0;
  double make_whole = 0;

  double revenue() const {
    return energy_revenue + response_revenue + inertia_revenue + commitment_revenue;
  }
  double profit() const { return revenue() + make_whole - operating_cost; }
};

struct Settlement {
  std::vector<UnitSettlement> units;  // horizon totals, generators then inverters
  std::vector<std::vector<UnitSettlement>> by_period;  // same unit order, no make-whole

  std::vector<std::string> groups() const;
  UnitSettlement group_total(const std::string& group) const;
  const UnitSettlement& unit(const std::string& id) const;
};

// Throws std::invalid_argument when fleet ids do not match the program.
Settlement settle(const ConicProgram& schedule_program, const Solution& schedule,
                  const PriceReport& prices, const FleetSpec& fleet);

struct ChpReport {
  bool refused = false;
  bool equivalent = false;
  std::string message;
  int units_checked = 0;
  std::vector<std::string> fractional_vertices;  // units whose relaxed set has a fractional vertex
  std::optional<double> dual_value;
  std::optional<double> relaxed_optimum;
};

// Convex-hull equivalence of the dispatchable relaxation, single period.
ChpReport chp_equivalence_check(const FleetSpec& fleet, const BuildOptions& options = {});

// Lagrangian dual function with all multi-unit rows and cones priced at the
// given duals; each unit keeps its own rows and integrality.
double lagrangian_dual_value(const ConicProgram& program, const Solution& duals);

}  // namespace freqclear
