#include "freqclear/pricing_engine.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <stdexcept>

#include <Eigen/Dense>

namespace freqclear {

const char* to_string(PricingMode m) {
  return m == PricingMode::dispatchable ? "dispatchable" : "restricted";
}

namespace {

constexpr double kRestrictedTol = 1e-12;

std::string idx(const std::string& base, int t) { return base + "[" + std::to_string(t) + "]"; }

std::string unit_idx(const std::string& base, const std::string& id, int t) {
  return base + "[" + id + "][" + std::to_string(t) + "]";
}

std::string group_of(const std::string& id) {
  std::string g = id;
  while (!g.empty() && std::isdigit(static_cast<unsigned char>(g.back()))) g.pop_back();
  return g.empty() ? id : g;
}

PriceReport report_from(const ConicProgram& p, const Solution& s, PricingMode mode, double tol) {
  PriceReport rep;
  rep.mode = mode;
  for (int t = 0; t < p.periods; ++t) {
    rep.periods.push_back(prices_from_duals(p, s, t, tol));
    const auto& z = rep.periods.back().nadir;
    rep.cone_violation = std::max(rep.cone_violation, std::hypot(z.lambda1, z.lambda2) - z.mu);
  }
  rep.cone_violation = std::max(0.0, rep.cone_violation);
  rep.kkt = verify_kkt(p, s);
  return rep;
}

ConicProgram build(const FleetSpec& fleet, BuildOptions o, bool multi) {
  ProgramBuilder b(fleet, std::move(o));
  return multi ? b.build_multi_period() : b.build_single_period();
}

}  // namespace

PeriodPrices prices_from_duals(const ConicProgram& p, const Solution& s, int t, double tol) {
  const auto& sp = p.params;
  PeriodPrices pp;
  pp.energy = s.dual(p, idx("load_balance", t));
  pp.rocof_dual = s.dual(p, idx("rocof", t));
  pp.qss_dual = s.dual(p, idx("qss", t));
  pp.nadir = s.soc_dual(p, idx("nadir", t));
  const auto& z = pp.nadir;
  const double sq = std::sqrt(sp.delta_f_max);
  pp.sync_inertia = (z.mu - z.lambda1) / sp.f0 + 2.0 * pp.rocof_dual;
  pp.synt_inertia = pp.sync_inertia - pp.qss_dual * sp.k_rec;
  pp.efr = (z.lambda1 - z.mu) * sp.t_efr / (4.0 * sp.delta_f_max) + z.lambda2 / sq + pp.qss_dual;
  pp.pfr = (z.mu + z.lambda1) / sp.t_pfr + pp.qss_dual;
  pp.binding.rocof = pp.rocof_dual > tol;
  pp.binding.qss = pp.qss_dual > tol;
  pp.binding.nadir = z.mu > tol;
  return pp;
}

Solution minimal_response_dispatch(const ConicProgram& program, const Solution& schedule,
                                   const SolverOptions& options) {
  if (schedule.primal.size() != program.vars.size()) return schedule;
  ConicProgram q = program;
  std::vector<double> lo, hi;
  Terms cost;
  for (size_t j = 0; j < q.vars.size(); ++j) {
    const auto& v = q.vars[j];
    lo.push_back(v.lo);
    hi.push_back(v.hi);
    if (v.kind != VarKind::continuous) lo[j] = hi[j] = std::round(schedule.primal[j]);
    if (q.objective[j] != 0) cost.push_back({static_cast<int>(j), q.objective[j]});
    const bool reserve = v.name.role == Role::r_g || v.name.role == Role::r_i;
    // Inertia constants with no effect on cost settle at their upper bound.
    q.objective[j] = reserve ? 1.0 : v.name.role == Role::h_i ? -1.0 : 0.0;
  }
  const double base = program.evaluate_objective(schedule.primal) - program.objective_constant;
  q.objective_constant = 0;
  q.add_row(std::move(cost), Sense::le, base + 1e-7 * std::max(1.0, std::abs(base)), "cost_cap");
  Solution s = solve_socp(q, lo, hi, options);
  if (!s.optimal()) return schedule;
  Solution out = schedule;
  out.primal = s.primal;
  out.objective = program.evaluate_objective(out.primal);
  return out;
}

PricingOutcome dispatchable_prices(const FleetSpec& fleet, const PricingOptions& options) {
  PricingOutcome out;
  out.mode = PricingMode::dispatchable;
  BuildOptions bo = options.build;
  bo.fixed_commitment.clear();
  bo.relax_binaries = false;
  out.schedule_program = build(fleet, bo, options.multi_period);
  out.schedule = solve_misocp(out.schedule_program, options.bnb);
  if (options.minimal_response)
    out.schedule = minimal_response_dispatch(out.schedule_program, out.schedule, options.bnb.socp);
  if (!out.schedule.optimal())
    out.diagnostic = std::string("schedule: ") + to_string(out.schedule.status) + " " +
                     out.schedule.message;

  bo.relax_binaries = true;
  out.pricing_program = build(fleet, bo, options.multi_period);
  out.pricing = solve_socp(out.pricing_program, options.bnb.socp);
  if (!out.pricing.optimal()) {
    if (!out.diagnostic.empty()) out.diagnostic += "; ";
    out.diagnostic += std::string("relaxed solve: ") + to_string(out.pricing.status) + " " +
                      out.pricing.message;
    return out;
  }
  out.prices = report_from(out.pricing_program, out.pricing, out.mode, options.binding_tol);
  return out;
}

PricingOutcome restricted_prices(const FleetSpec& fleet, const PricingOptions& options) {
  BuildOptions bo = options.build;
  bo.fixed_commitment.clear();
  bo.relax_binaries = false;
  ConicProgram prog = build(fleet, bo, options.multi_period);
  Solution sched = solve_misocp(prog, options.bnb);
  if (options.minimal_response)
    sched = minimal_response_dispatch(prog, sched, options.bnb.socp);
  return restricted_prices(fleet, options, prog, sched);
}

PricingOutcome restricted_prices(const FleetSpec& fleet, const PricingOptions& options,
                                 const ConicProgram& schedule_program, const Solution& schedule) {
  PricingOutcome out;
  out.mode = PricingMode::restricted;
  out.schedule_program = schedule_program;
  out.schedule = schedule;
  if (!schedule.optimal())
    out.diagnostic = std::string("schedule: ") + to_string(schedule.status) + " " + schedule.message;
  if (schedule.primal.empty()) return out;

  BuildOptions bo = options.build;
  bo.relax_binaries = true;
  bo.fixed_commitment.clear();
  const int T = schedule_program.periods;
  for (const auto& g : fleet.generators) {
    if (g.must_run) continue;
    std::vector<double> y(T);
    for (int t = 0; t < T; ++t) y[t] = std::round(schedule.value(schedule_program, g.id, t, Role::y_g));
    bo.fixed_commitment[g.id] = std::move(y);
  }
  out.pricing_program = build(fleet, bo, options.multi_period);
  // Inactive frequency rows carry duals of order gap / slack; a tighter gap
  // brings them below the binding tolerance.
  SolverOptions so = options.bnb.socp;
  so.feastol = std::min(so.feastol, kRestrictedTol);
  so.abstol = std::min(so.abstol, kRestrictedTol);
  so.reltol = std::min(so.reltol, kRestrictedTol);
  out.pricing = solve_socp(out.pricing_program, so);
  // A valid integer schedule always leaves the fixed program feasible.
  if (!out.pricing.optimal()) {
    if (!out.diagnostic.empty()) out.diagnostic += "; ";
    out.diagnostic += std::string("fixed-commitment solve: ") + to_string(out.pricing.status) +
                      " " + out.pricing.message;
    return out;
  }
  PriceReport rep = report_from(out.pricing_program, out.pricing, out.mode, options.binding_tol);
  for (int t = 0; t < T; ++t)
    for (const auto& [id, y] : bo.fixed_commitment)
      rep.periods[t].commitment[id] = out.pricing.dual(out.pricing_program, unit_idx("commit", id, t));
  out.prices = std::move(rep);
  return out;
}

std::vector<std::string> Settlement::groups() const {
  std::vector<std::string> g;
  for (const auto& u : units)
    if (std::find(g.begin(), g.end(), u.group) == g.end()) g.push_back(u.group);
  return g;
}

UnitSettlement Settlement::group_total(const std::string& group) const {
  UnitSettlement s;
  s.unit = s.group = group;
  for (const auto& u : units) {
    if (u.group != group) continue;
    s.committed = s.committed || u.committed;
    s.energy += u.energy;
    s.response += u.response;
    s.inertia += u.inertia;
    s.energy_revenue += u.energy_revenue;
    s.response_revenue += u.response_revenue;
    s.inertia_revenue += u.inertia_revenue;
    s.commitment_revenue += u.commitment_revenue;
    s.operating_cost += u.operating_cost;
    s.make_whole += u.make_whole;
  }
  return s;
}

const UnitSettlement& Settlement::unit(const std::string& id) const {
  for (const auto& u : units)
    if (u.unit == id) return u;
  throw std::out_of_range("no settlement for " + id);
}

namespace {

void add_into(UnitSettlement& total, const UnitSettlement& part) {
  total.committed = total.committed || part.committed;
  total.energy += part.energy;
  total.response += part.response;
  total.inertia += part.inertia;
  total.energy_revenue += part.energy_revenue;
  total.response_revenue += part.response_revenue;
  total.inertia_revenue += part.inertia_revenue;
  total.commitment_revenue += part.commitment_revenue;
  total.operating_cost += part.operating_cost;
}

}  // namespace

Settlement settle(const ConicProgram& p, const Solution& x, const PriceReport& prices,
                  const FleetSpec& fleet) {
  const int T = p.periods;
  if (static_cast<int>(prices.periods.size()) != T)
    throw std::invalid_argument("price report covers " + std::to_string(prices.periods.size()) +
                                " periods, schedule has " + std::to_string(T));
  if (x.primal.size() != p.vars.size()) throw std::invalid_argument("schedule has no primal point");
  auto val = [&](const std::string& id, int t, Role r) {
    const int j = p.find_var(id, t, r);
    return j < 0 ? 0.0 : x.primal[j];
  };
  Settlement st;
  st.by_period.resize(T);
  auto start = [&](const std::string& id) {
    UnitSettlement u;
    u.unit = id;
    u.group = group_of(id);
    return u;
  };

  for (const auto& g : fleet.generators) {
    if (p.find_var(g.id, 0, Role::p_g) < 0)
      throw std::invalid_argument("unit " + g.id + " is not in the schedule");
    UnitSettlement total = start(g.id);
    for (int t = 0; t < T; ++t) {
      const auto& pr = prices.periods[t];
      UnitSettlement u = start(g.id);
      const double y = g.must_run ? 1.0 : val(g.id, t, Role::y_g);
      const double P = val(g.id, t, Role::p_g);
      const double R = val(g.id, t, Role::r_g);
      u.committed = y > 0.5;
      u.energy = P;
      u.energy_revenue = pr.energy * P;
      u.response = R;
      u.response_revenue = pr.pfr * R;
      if (g.provides_inertia && g.h > 0) {
        u.inertia = g.h * g.p_max * y;
        u.inertia_revenue = pr.sync_inertia * u.inertia;
      }
      auto c = pr.commitment.find(g.id);
      if (c != pr.commitment.end()) u.commitment_revenue = c->second * y;
      u.operating_cost = g.c_nl * y + g.c_m * P + g.c_st * val(g.id, t, Role::y_sg);
      add_into(total, u);
      st.by_period[t].push_back(std::move(u));
    }
    // Must-run units carry no make-whole entitlement.
    if (total.committed && !g.must_run)
      total.make_whole = std::max(0.0, total.operating_cost - total.revenue());
    st.units.push_back(std::move(total));
  }

  for (const auto& I : fleet.inverter_resources) {
    if (p.find_var(I.id, 0, Role::r_i) < 0)
      throw std::invalid_argument("resource " + I.id + " is not in the schedule");
    UnitSettlement total = start(I.id);
    const auto m = p.gfm_margin.find(I.id);
    for (int t = 0; t < T; ++t) {
      const auto& pr = prices.periods[t];
      UnitSettlement u = start(I.id);
      const double curt = val(I.id, t, Role::p_curt);
      u.energy = I.available(t) - curt;
      u.energy_revenue = pr.energy * u.energy;
      u.response = val(I.id, t, Role::r_i);
      u.response_revenue = pr.efr * u.response;
      if (I.control == InverterControl::gfm) {
        // Contribution as entered in the synthetic-inertia definition row.
        const double margin = m == p.gfm_margin.end() ? 0.0 : m->second.at(t);
        if (p.find_var(I.id, t, Role::h_i) >= 0) u.inertia = margin * val(I.id, t, Role::h_i);
        else if (margin > 0) u.inertia = I.h * (margin - curt);
        u.inertia_revenue = pr.synt_inertia * u.inertia;
      }
      add_into(total, u);
      st.by_period[t].push_back(std::move(u));
    }
    st.units.push_back(std::move(total));
  }
  return st;
}

namespace {

struct Half {
  std::vector<double> a;
  double b = 0;
  Sense sense = Sense::le;
};

// Vertices of {x : rows, lo <= x <= hi} for a handful of variables.
std::vector<Eigen::VectorXd> vertices(const std::vector<Half>& cons, int k) {
  std::vector<Eigen::VectorXd> out;
  const int m = static_cast<int>(cons.size());
  if (k == 0 || m < k) return out;
  std::vector<bool> mask(m, false);
  std::fill(mask.begin(), mask.begin() + k, true);
  do {
    bool has_all_eq = true;
    for (int i = 0; i < m; ++i)
      if (cons[i].sense == Sense::eq && !mask[i]) has_all_eq = false;
    if (!has_all_eq) continue;
    Eigen::MatrixXd A(k, k);
    Eigen::VectorXd b(k);
    int r = 0;
    for (int i = 0; i < m; ++i) {
      if (!mask[i]) continue;
      for (int c = 0; c < k; ++c) A(r, c) = cons[i].a[c];
      b(r++) = cons[i].b;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.rank() < k) continue;
    Eigen::VectorXd x = lu.solve(b);
    bool feasible = true;
    for (const auto& h : cons) {
      double ax = 0, mag = 0;
      for (int c = 0; c < k; ++c) {
        ax += h.a[c] * x(c);
        mag += std::abs(h.a[c] * x(c));
      }
      const double tol = 1e-9 * std::max({1.0, std::abs(h.b), mag});
      if ((h.sense == Sense::le && ax > h.b + tol) || (h.sense == Sense::ge && ax < h.b - tol) ||
          (h.sense == Sense::eq && std::abs(ax - h.b) > tol))
        feasible = false;
    }
    if (feasible) out.push_back(x);
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return out;
}

struct Block {
  std::vector<int> vars;
  std::vector<int> rows;
};

// Variables grouped by (unit, period); rows private to one group stay with it.
std::vector<Block> blocks_of(const ConicProgram& p, std::vector<int>& block_of_var) {
  std::map<std::pair<std::string, int>, int> id;
  std::vector<Block> blocks;
  block_of_var.assign(p.vars.size(), -1);
  for (size_t j = 0; j < p.vars.size(); ++j) {
    const auto& n = p.vars[j].name;
    std::pair<std::string, int> key{n.unit == "system" ? n.unit + to_string(n.role) : n.unit,
                                    n.period};
    auto [it, fresh] = id.try_emplace(key, static_cast<int>(blocks.size()));
    if (fresh) blocks.emplace_back();
    blocks[it->second].vars.push_back(static_cast<int>(j));
    block_of_var[j] = it->second;
  }
  return blocks;
}

std::vector<Half> block_constraints(const ConicProgram& p, const Block& b,
                                    const std::vector<double>& lo, const std::vector<double>& hi) {
  const int k = static_cast<int>(b.vars.size());
  std::vector<Half> cons;
  for (int r : b.rows) {
    Half h;
    h.a.assign(k, 0.0);
    for (auto [j, a] : p.rows[r].coeffs)
      h.a[std::find(b.vars.begin(), b.vars.end(), j) - b.vars.begin()] += a;
    h.b = p.rows[r].rhs;
    h.sense = p.rows[r].sense;
    cons.push_back(std::move(h));
  }
  for (int c = 0; c < k; ++c) {
    const int j = b.vars[c];
    if (std::isfinite(lo[j]) && lo[j] == hi[j]) {
      Half h{std::vector<double>(k, 0.0), lo[j], Sense::eq};
      h.a[c] = 1;
      cons.push_back(std::move(h));
      continue;
    }
    if (std::isfinite(lo[j])) {
      Half h{std::vector<double>(k, 0.0), lo[j], Sense::ge};
      h.a[c] = 1;
      cons.push_back(std::move(h));
    }
    if (std::isfinite(hi[j])) {
      Half h{std::vector<double>(k, 0.0), hi[j], Sense::le};
      h.a[c] = 1;
      cons.push_back(std::move(h));
    }
  }
  return cons;
}

void assign_rows(const ConicProgram& p, std::vector<Block>& blocks, const std::vector<int>& bov,
                 std::vector<bool>& coupling) {
  coupling.assign(p.rows.size(), false);
  for (size_t r = 0; r < p.rows.size(); ++r) {
    std::set<int> owners;
    for (auto [j, a] : p.rows[r].coeffs) owners.insert(bov[j]);
    if (owners.size() == 1) blocks[*owners.begin()].rows.push_back(static_cast<int>(r));
    else coupling[r] = true;
  }
}

bool integer_kind(VarKind k) { return k != VarKind::continuous; }

}  // namespace

double lagrangian_dual_value(const ConicProgram& p, const Solution& s) {
  std::vector<int> bov;
  std::vector<Block> blocks = blocks_of(p, bov);
  std::vector<bool> coupling;
  assign_rows(p, blocks, bov, coupling);

  std::vector<double> rc = p.objective;
  double value = p.objective_constant;
  for (size_t r = 0; r < p.rows.size(); ++r) {
    if (!coupling[r]) continue;
    const auto& row = p.rows[r];
    const double d = s.row_duals[r];
    const double sign = row.sense == Sense::le ? 1.0 : -1.0;  // ge and eq enter with a minus
    for (auto [j, a] : row.coeffs) rc[j] += sign * d * a;
    value -= sign * d * row.rhs;
  }
  for (size_t k = 0; k < p.socs.size(); ++k) {
    const auto& b = p.socs[k];
    const auto& z = s.soc_duals[k];
    for (auto [j, a] : b.c) rc[j] -= z.mu * a;
    for (auto [j, a] : b.a[0]) rc[j] += z.lambda1 * a;
    for (auto [j, a] : b.a[1]) rc[j] += z.lambda2 * a;
    value += -z.mu * b.c0 + z.lambda1 * b.a0[0] + z.lambda2 * b.a0[1];
  }

  std::vector<double> lo, hi;
  for (const auto& v : p.vars) {
    lo.push_back(v.lo);
    hi.push_back(v.hi);
  }
  for (const auto& b : blocks) {
    const int k = static_cast<int>(b.vars.size());
    if (b.rows.empty()) {
      // Bounds only: each variable sits at the cheaper bound.
      for (int j : b.vars) {
        const double scale = std::max(1.0, std::abs(p.objective[j]));
        if (std::abs(rc[j]) <= 1e-7 * scale) continue;
        const double bound = rc[j] > 0 ? lo[j] : hi[j];
        if (!std::isfinite(bound)) return -kInf;
        value += rc[j] * bound;
      }
      continue;
    }
    // Enumerate integer assignments, then vertices of the remaining polytope.
    std::vector<int> ints;
    for (int c = 0; c < k; ++c)
      if (integer_kind(p.vars[b.vars[c]].kind)) ints.push_back(c);
    double best = kInf;
    for (unsigned mask = 0; mask < (1u << ints.size()); ++mask) {
      std::vector<double> l2 = lo, h2 = hi;
      bool ok = true;
      for (size_t q = 0; q < ints.size(); ++q) {
        const int j = b.vars[ints[q]];
        const double v = (mask >> q) & 1u ? 1.0 : 0.0;
        if (v < lo[j] - 1e-12 || v > hi[j] + 1e-12) ok = false;
        l2[j] = h2[j] = v;
      }
      if (!ok) continue;
      for (const auto& x : vertices(block_constraints(p, b, l2, h2), k)) {
        double f = 0;
        for (int c = 0; c < k; ++c) f += rc[b.vars[c]] * x(c);
        best = std::min(best, f);
      }
    }
    if (!std::isfinite(best)) return -kInf;
    value += best;
  }
  return value;
}

ChpReport chp_equivalence_check(const FleetSpec& fleet, const BuildOptions& options) {
  ChpReport rep;
  for (const auto& g : fleet.generators)
    if (g.c_q != 0) {
      rep.refused = true;
      rep.message = "unit " + g.id + " has a non-affine cost; only affine costs are checked";
      return rep;
    }
  BuildOptions bo = options;
  bo.relax_binaries = true;
  bo.fixed_commitment.clear();
  ConicProgram p = build_single_period(fleet, bo);

  std::vector<int> bov;
  std::vector<Block> blocks = blocks_of(p, bov);
  std::vector<bool> coupling;
  assign_rows(p, blocks, bov, coupling);
  std::vector<double> lo, hi;
  for (const auto& v : p.vars) {
    lo.push_back(v.lo);
    hi.push_back(v.hi);
  }
  for (const auto& b : blocks) {
    bool has_int = false;
    for (int j : b.vars) {
      if (!integer_kind(p.vars[j].kind)) continue;
      has_int = true;
      if (lo[j] != 0 || hi[j] != 1) rep.fractional_vertices.push_back(p.vars[j].name.unit);
    }
    if (!has_int) continue;
    ++rep.units_checked;
    for (const auto& x : vertices(block_constraints(p, b, lo, hi), static_cast<int>(b.vars.size())))
      for (size_t c = 0; c < b.vars.size(); ++c) {
        if (!integer_kind(p.vars[b.vars[c]].kind)) continue;
        if (std::abs(x(c) - std::round(x(c))) > 1e-9) {
          rep.fractional_vertices.push_back(p.vars[b.vars[c]].name.unit);
          break;
        }
      }
  }
  rep.equivalent = rep.fractional_vertices.empty();

  int units = static_cast<int>(fleet.generators.size() + fleet.inverter_resources.size());
  if (units <= 6) {
    Solution s = solve_socp(p);
    if (!s.optimal()) {
      rep.equivalent = false;
      rep.message = std::string("relaxed solve: ") + to_string(s.status);
      return rep;
    }
    rep.relaxed_optimum = s.objective;
    rep.dual_value = lagrangian_dual_value(p, s);
    const double gap = std::abs(*rep.dual_value - s.objective) / std::max(1.0, std::abs(s.objective));
    if (gap > 1e-6) {
      rep.equivalent = false;
      rep.message = "Lagrangian dual differs from the relaxed optimum by " + std::to_string(gap);
    }
  }
  if (rep.message.empty())
    rep.message = rep.equivalent ? "relaxation equals the convex hull of every unit"
                                 : "fractional vertex in a unit's relaxed set";
  return rep;
}

}  // namespace freqclear
