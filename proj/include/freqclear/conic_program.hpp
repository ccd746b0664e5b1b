#pragma once

#include <array>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "freqclear/frequency_dynamics.hpp"
#include "freqclear/system_model.hpp"

namespace freqclear {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarKind { continuous, binary, binary_relaxed };

enum class Role {
  p_g, r_g, y_g, y_sg, y_sd, y_st,
  p_curt, r_i, h_i,
  h_sync, h_synt, r_efr, r_pfr
};

const char* to_string(Role r);

struct VarName {
  std::string unit;  // generator/resource id, or "system"
  int period = 0;
  Role role = Role::p_g;
};

struct VarRef {
  int index = 0;
  VarKind kind = VarKind::continuous;
  double lo = -kInf;
  double hi = kInf;
  VarName name;

  bool is_integer() const { return kind == VarKind::binary; }
};

enum class Sense { le, eq, ge };

using Terms = std::vector<std::pair<int, double>>;

struct LinearRow {
  Terms coeffs;
  Sense sense = Sense::eq;
  double rhs = 0;
  std::string handle;
};

// || (a[0] x + a0[0], a[1] x + a0[1]) || <= c x + c0
struct SocBlock {
  std::array<Terms, 2> a;
  std::array<double, 2> a0{0, 0};
  Terms c;
  double c0 = 0;
  std::string handle;
};

struct HandleRef {
  bool soc = false;
  int index = 0;
};

// Interchangeable units: members[k][j] is the j-th variable of unit k; the
// j-th variables of all members share role and period.
struct SymmetryClass {
  std::vector<std::string> units;
  std::vector<std::vector<int>> members;
  // Shared timing data, used to split aggregate counts back onto units.
  int t_st = 0, t_mut = 0, t_mdt = 0;
  bool initially_online = false;
  int initial_periods = 0;
};

struct PeriodIndex {
  int h_sync = -1, h_synt = -1, r_efr = -1, r_pfr = -1;
  std::vector<int> r_i;  // individual EFR variables, summed for the q-s-s row
  double p_loss = 0;
};

struct ConicProgram {
  std::vector<VarRef> vars;
  std::vector<double> objective;
  double objective_constant = 0;
  std::vector<LinearRow> rows;
  std::vector<SocBlock> socs;
  std::map<std::string, HandleRef> handles;
  std::vector<SymmetryClass> classes;
  std::vector<PeriodIndex> period_index;
  SystemParams params;
  int periods = 1;
  // GFM resource id -> forecast-derated margin per period (MW, clamped at zero).
  std::map<std::string, std::vector<double>> gfm_margin;

  int add_var(VarKind kind, double lo, double hi, VarName name, double cost = 0);
  int add_row(Terms coeffs, Sense sense, double rhs, std::string handle);
  int add_soc(SocBlock block);

  int find_var(const std::string& unit, int period, Role role) const;  // -1 if absent
  const LinearRow& row(const std::string& handle) const;
  bool has_integers() const;
  double evaluate_objective(const std::vector<double>& x) const;
};

struct BuildOptions {
  bool relax_binaries = false;
  std::optional<double> forecast_alpha;  // overrides per-resource alpha
  bool hi_optimize = false;
  double h_lo = 0, h_hi = 0;
  bool gfm_curtailment = true;
  // Credit at most the EFR volume that keeps the nadir after the EFR ramp.
  bool nadir_efr_cap = true;
  // R_g <= P_max - P_g as printed, instead of R_g <= y_g P_max - P_g.
  bool literal_headroom = false;
  bool tag_symmetry = true;
  // unit id -> commitment per period; fixed through equality rows "commit[id][t]".
  std::map<std::string, std::vector<double>> fixed_commitment;
};

class ProgramBuilder {
 public:
  explicit ProgramBuilder(FleetSpec fleet, BuildOptions options = {});

  ProgramBuilder& apply_forecast_error(double alpha);
  ProgramBuilder& enable_hi_optimization(double h_lo, double h_hi);

  ConicProgram build_single_period() const;
  ConicProgram build_multi_period() const;

  const BuildOptions& options() const { return opts_; }

 private:
  ConicProgram build(int periods) const;
  FleetSpec fleet_;
  BuildOptions opts_;
};

ConicProgram build_single_period(const FleetSpec& fleet, const BuildOptions& options = {});
ConicProgram build_multi_period(const FleetSpec& fleet, const BuildOptions& options = {});

// Each SOC block, expanded, equals the rotated-cone nadir inequality.
bool soc_standard_form_check(const ConicProgram& program, double tol = 1e-10);

struct ProgramStats {
  int binaries = 0;
  int continuous = 0;
  int linear_rows = 0;
  int soc_blocks = 0;
  int bound_sides = 0;  // finite variable bounds
  int total_constraints() const { return linear_rows + soc_blocks + bound_sides; }
};

ProgramStats program_stats(const ConicProgram& program);

void dump_program(const ConicProgram& program, std::ostream& out);

// Frequency-relevant aggregates of a primal point for period t.
DispatchPoint dispatch_point(const ConicProgram& program, const std::vector<double>& x,
                             int period = 0);

}  // namespace freqclear
