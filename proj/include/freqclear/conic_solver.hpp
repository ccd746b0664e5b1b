#pragma once

#include <optional>
#include <string>
#include <vector>

#include "freqclear/conic_program.hpp"

namespace freqclear {

enum class SolveStatus { optimal, infeasible, unbounded, node_limit, numerical };

const char* to_string(SolveStatus s);

struct SolverOptions {
  double feastol = 1e-9;
  double abstol = 1e-9;
  double reltol = 1e-9;
  int max_iter = 150;
  bool equilibrate = true;
  bool verbose = false;  // iteration table on stderr
};

struct SocDual {
  double mu = 0;
  double lambda1 = 0;
  double lambda2 = 0;
};

struct KktResiduals {
  double primal_feas = 0;
  double dual_feas = 0;
  double complementarity = 0;
};

struct BnbStats {
  int nodes = 0;
  int incumbent_updates = 0;
  double bound = 0;
  double gap = 0;
  int disaggregation_failures = 0;
};

// Dual signs: inequality rows and bounds carry values >= 0, equality rows are
// free, SOC blocks carry (mu, lambda1, lambda2) with ||(lambda1, lambda2)|| <= mu.
// The Lagrangian is
//   c'x - sum_ge l (a x - b) + sum_le l (a x - b) - sum_eq nu (a x - b)
//   - lo_dual (x - lo) + hi_dual (x - hi) - mu t + lambda1 u1 + lambda2 u2,
// where (t, u1, u2) are the affine SOC expressions.
struct Solution {
  SolveStatus status = SolveStatus::numerical;
  double objective = 0;
  std::vector<double> primal;
  std::vector<double> row_duals;
  std::vector<double> lo_duals;
  std::vector<double> hi_duals;
  std::vector<SocDual> soc_duals;
  KktResiduals kkt;
  int iterations = 0;
  std::optional<BnbStats> bnb;
  std::string message;

  bool optimal() const { return status == SolveStatus::optimal; }
  double dual(const ConicProgram& p, const std::string& handle) const;
  SocDual soc_dual(const ConicProgram& p, const std::string& handle) const;
  double value(const ConicProgram& p, const std::string& unit, int period, Role role) const;
};

Solution solve_socp(const ConicProgram& program, const SolverOptions& options = {});

// Same program with bounds replaced; lo == hi fixes a variable.
Solution solve_socp(const ConicProgram& program, const std::vector<double>& lo,
                    const std::vector<double>& hi, const SolverOptions& options = {});

struct BnbLimits {
  int node_cap = 100000;
  double gap_tol = 1e-6;
  double int_tol = 1e-6;
  bool symmetry = true;
  SolverOptions socp;
};

Solution solve_misocp(const ConicProgram& program, const BnbLimits& limits = {});

struct KktReport {
  double stationarity = 0;     // max |grad L|, scaled by max(1, |c_j|)
  double primal_feas = 0;      // max violation, scaled by max(1, |rhs|)
  double dual_feas = 0;        // max sign/cone violation of duals
  double complementarity = 0;  // max |dual * slack| / max(1, |objective|)
  double dual_objective = 0;

  double max() const;
  bool ok(double tol = 1e-6) const { return max() <= tol; }
};

// Recomputed from the program data, independent of the solver internals.
KktReport verify_kkt(const ConicProgram& program, const Solution& solution);
KktReport verify_kkt(const ConicProgram& program, const std::vector<double>& lo,
                     const std::vector<double>& hi, const Solution& solution);

}  // namespace freqclear
