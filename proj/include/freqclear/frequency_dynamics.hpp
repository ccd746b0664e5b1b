#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "freqclear/system_model.hpp"

namespace freqclear {

struct DispatchPoint {
  double h_sync = 0;  // MW*s
  double h_synt = 0;  // MW*s
  double r_efr = 0;   // MW
  double r_pfr = 0;   // MW
  double p_loss = 0;  // MW
  SystemParams params;

  double inertia() const { return h_sync + h_synt; }
};

struct FrequencyTrace {
  std::vector<double> times;    // s
  std::vector<double> delta_f;  // Hz, negative below nominal
  double nadir_time = 0;
  double nadir_depth = 0;       // Hz, >= 0
  std::optional<double> second_nadir_depth;
};

struct NadirResult {
  double t_nadir = 0;  // s
  double depth = 0;    // Hz
  bool before_efr = false;  // nadir inside the EFR ramp
};

class NadirError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// EFR(t) + PFR(t) with linear ramps.
double response_profile(double t, const DispatchPoint& p);

// k_rec * H_synt strictly after t_rec, zero before.
double recovery_profile(double t, const DispatchPoint& p, double t_rec);

// Exact piecewise-quadratic solution of the swing equation; dt only sets sampling.
FrequencyTrace simulate_post_fault(const DispatchPoint& p, double horizon, double dt);

NadirResult analytic_nadir(const DispatchPoint& p);

struct SecurityReport {
  bool rocof_ok = false;
  bool nadir_ok = false;
  bool qss_ok = false;
  double rocof_margin = 0;  // MW*s, 2H - P_L f0 / RoCoF_max
  double nadir_margin = 0;  // Hz, delta_f_max - depth
  double qss_margin = 0;    // MW, R_I + R_G - P_L - k_rec H_synt
  double simulated_depth = 0;
  double t_nadir = 0;
  bool nadir_after_pfr = false;  // flagged: outside the modelled regime
  std::string note;

  bool all_ok() const { return rocof_ok && nadir_ok && qss_ok; }
};

SecurityReport check_security(const DispatchPoint& p, double tol = 1e-6);

void write_trace_csv(const FrequencyTrace& tr, const std::string& path);

}  // namespace freqclear
