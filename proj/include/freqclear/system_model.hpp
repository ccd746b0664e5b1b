#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace freqclear {

enum class ResponseKind { pfr, none };
enum class InverterControl { gfl, gfm, energy_only };

struct GeneratorSpec {
  std::string id;
  double p_max = 0.0;   // MW
  double p_msg = 0.0;   // MW, minimum stable generation
  double c_nl = 0.0;    // £/h
  double c_m = 0.0;     // £/MWh
  double c_q = 0.0;     // £/MW^2h; only affine costs (c_q = 0) can be scheduled
  double c_st = 0.0;    // £ per start
  double h = 0.0;       // s
  double r_max = 0.0;   // MW
  int t_st = 0;         // periods
  int t_mut = 0;
  int t_mdt = 0;
  bool provides_inertia = true;
  ResponseKind response_kind = ResponseKind::none;
  bool must_run = false;  // online in every period, no commitment decision

  // Commitment history before the first period.
  bool initially_online = false;
  int initial_periods = 1000;  // periods spent in the initial state

  bool operator==(const GeneratorSpec&) const = default;
};

struct InverterResourceSpec {
  std::string id;
  double p_max = 0.0;    // MW rated
  double p_avail = 0.0;  // MW available this period
  InverterControl control = InverterControl::energy_only;
  double h = 0.0;        // s, GFM only
  bool h_optimizable = false;
  double h_lo = 0.0;
  double h_hi = 0.0;
  double r_max = 0.0;    // MW of EFR capacity, GFL only
  double alpha = 0.0;    // forecast-error fraction of p_max
  std::vector<double> p_avail_profile;  // optional hourly override, multi-period

  double available(int period) const {
    return p_avail_profile.empty() ? p_avail : p_avail_profile.at(period);
  }

  bool operator==(const InverterResourceSpec&) const = default;
};

struct SystemParams {
  double f0 = 50.0;           // Hz
  double delta_f_max = 0.8;   // Hz
  double rocof_max = 1.0;     // Hz/s
  double t_efr = 1.0;         // s
  double t_pfr = 10.0;        // s
  double k_rec = 0.05;        // 1/s
  double p_loss = 1800.0;     // MW
  double t_rec = 10.5;        // s, recovery step (strictly after)
  std::vector<double> demand{25000.0};  // MW, 1 or 24 entries

  int periods() const { return static_cast<int>(demand.size()); }

  bool operator==(const SystemParams&) const = default;
};

struct FleetSpec {
  std::vector<GeneratorSpec> generators;
  std::vector<InverterResourceSpec> inverter_resources;
  SystemParams params;

  bool operator==(const FleetSpec&) const = default;
};

enum class Severity { error, warning };

struct Diagnostic {
  Severity severity;
  std::string field;
  std::string message;
  std::string code = "invariant";  // invariant | capacity | nadir_regime
};

std::vector<Diagnostic> validate(const FleetSpec& fleet);
bool has_errors(const std::vector<Diagnostic>& diags);

// Raised for malformed scenario text or invariant violations.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& msg, int line = 0, std::string field = {})
      : std::runtime_error(msg), line_(line), field_(std::move(field)) {}
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

// EFR delivery time too slow for the after-EFR nadir regime to be exhaustive.
class NadirRegimeError : public ScenarioError {
 public:
  using ScenarioError::ScenarioError;
};

FleetSpec load_scenario(const std::string& path);
FleetSpec parse_scenario(const std::string& text);
std::string serialize_scenario(const FleetSpec& fleet);
void save_scenario(const FleetSpec& fleet, const std::string& path);

struct GbOptions {
  double wind_capacity = 30000.0;  // MW installed
  double gas_c_st = 0.0;
  int gas_t_st = 0;
  int gas_t_mut = 0;
  int gas_t_mdt = 0;
};

// Reference system: one nuclear unit, 50 gas units, three wind sub-fleets.
FleetSpec build_gb_reference_fleet(double wind_available, double wind_efr_fraction,
                                   double wind_gfm_fraction, double h_gfm,
                                   double k_rec, const GbOptions& opts = {});

// 24-hour variant with start-up dynamics and an hourly demand profile.
FleetSpec build_gb_multi_period_fleet(const std::vector<double>& demand,
                                      double wind_fraction, double wind_efr_fraction,
                                      double wind_gfm_fraction, double h_gfm,
                                      double k_rec, double c_st);

std::vector<double> load_demand_profile(const std::string& path);
std::vector<double> default_demand_profile();

double total_inertia_capability(const FleetSpec& fleet);

const char* to_string(InverterControl c);
const char* to_string(ResponseKind r);

}  // namespace freqclear
