// Branch-and-bound over the conic relaxation, with identical units merged
// into one integer count per class.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <queue>

#include "freqclear/conic_solver.hpp"

namespace freqclear {

namespace {

struct Aggregation {
  ConicProgram program;
  std::vector<bool> integer;  // integer variables of the aggregated program
  std::vector<int> map;       // full variable -> aggregated variable
  std::vector<int> member_of; // full variable -> class member ordinal, -1 if none
  std::vector<int> class_of;  // full variable -> class index, -1 if none
  bool merged = false;
};

Aggregation aggregate(const ConicProgram& full, bool symmetry) {
  Aggregation g;
  const int n = static_cast<int>(full.vars.size());
  g.map.assign(n, -1);
  g.member_of.assign(n, -1);
  g.class_of.assign(n, -1);
  g.merged = symmetry && !full.classes.empty();
  if (g.merged)
    for (size_t c = 0; c < full.classes.size(); ++c)
      for (size_t k = 0; k < full.classes[c].members.size(); ++k)
        for (int j : full.classes[c].members[k]) {
          g.member_of[j] = static_cast<int>(k);
          g.class_of[j] = static_cast<int>(c);
        }

  auto& P = g.program;
  P.params = full.params;
  P.periods = full.periods;
  P.objective_constant = full.objective_constant;
  for (int j = 0; j < n; ++j) {
    const auto& v = full.vars[j];
    if (g.member_of[j] > 0) continue;
    double size = 1;
    if (g.member_of[j] == 0) size = static_cast<double>(full.classes[g.class_of[j]].members.size());
    VarRef a = v;
    a.lo = v.lo * size;
    a.hi = v.hi * size;
    if (std::isnan(a.lo)) a.lo = v.lo;
    if (std::isnan(a.hi)) a.hi = v.hi;
    g.map[j] = P.add_var(v.kind == VarKind::binary ? VarKind::continuous : v.kind, a.lo, a.hi,
                         v.name, full.objective[j]);
    g.integer.push_back(v.kind == VarKind::binary);
  }
  for (int j = 0; j < n; ++j)
    if (g.member_of[j] > 0) {
      const auto& cls = full.classes[g.class_of[j]];
      const auto& mem = cls.members[g.member_of[j]];
      const int pos = static_cast<int>(std::find(mem.begin(), mem.end(), j) - mem.begin());
      g.map[j] = g.map[cls.members[0][pos]];
    }

  auto map_shared = [&](const Terms& terms) {
    std::map<int, double> acc;
    for (auto [j, a] : terms) {
      const int k = g.map[j];
      if (g.member_of[j] >= 0) acc[k] = a;  // same coefficient for every member
      else acc[k] += a;
    }
    return Terms(acc.begin(), acc.end());
  };

  for (const auto& r : full.rows) {
    int owner_class = -1, owner_member = -1;
    bool shared = false;
    for (auto [j, a] : r.coeffs) {
      if (g.member_of[j] < 0) continue;
      if (owner_member < 0) {
        owner_class = g.class_of[j];
        owner_member = g.member_of[j];
      } else if (owner_class != g.class_of[j] || owner_member != g.member_of[j]) {
        shared = true;
      }
    }
    if (owner_member < 0 || shared) {
      P.add_row(map_shared(r.coeffs), r.sense, r.rhs, r.handle);
      continue;
    }
    if (owner_member > 0) continue;  // replicated by member 0
    const double size = static_cast<double>(full.classes[owner_class].members.size());
    Terms t;
    for (auto [j, a] : r.coeffs) t.push_back({g.map[j], g.member_of[j] == 0 ? a : a * size});
    P.add_row(std::move(t), r.sense, r.rhs * size, r.handle);
  }
  for (const auto& b : full.socs) {
    SocBlock s = b;
    s.c = map_shared(b.c);
    s.a[0] = map_shared(b.a[0]);
    s.a[1] = map_shared(b.a[1]);
    P.add_soc(std::move(s));
  }
  P.period_index = full.period_index;
  for (auto& pi : P.period_index) {
    pi.h_sync = g.map[pi.h_sync];
    pi.h_synt = g.map[pi.h_synt];
    pi.r_efr = g.map[pi.r_efr];
    pi.r_pfr = g.map[pi.r_pfr];
    for (int& r : pi.r_i) r = g.map[r];
  }
  return g;
}

// Largest scaled violation of rows, bounds and cones.
double max_violation(const ConicProgram& P, const std::vector<double>& x,
                     const std::vector<double>& lo, const std::vector<double>& hi) {
  double worst = 0;
  for (const auto& r : P.rows) {
    double ax = 0, mag = 0;
    for (auto [j, a] : r.coeffs) {
      ax += a * x[j];
      mag += std::abs(a * x[j]);
    }
    const double scale = std::max({1.0, std::abs(r.rhs), mag});
    double v = 0;
    if (r.sense == Sense::eq) v = std::abs(ax - r.rhs);
    else if (r.sense == Sense::le) v = ax - r.rhs;
    else v = r.rhs - ax;
    worst = std::max(worst, v / scale);
  }
  for (size_t j = 0; j < x.size(); ++j) {
    if (std::isfinite(lo[j])) worst = std::max(worst, (lo[j] - x[j]) / std::max(1.0, std::abs(lo[j])));
    if (std::isfinite(hi[j])) worst = std::max(worst, (x[j] - hi[j]) / std::max(1.0, std::abs(hi[j])));
  }
  for (const auto& b : P.socs) {
    auto ev = [&](const Terms& t, double c0) {
      double s = c0;
      for (auto [j, a] : t) s += a * x[j];
      return s;
    };
    const double t = ev(b.c, b.c0);
    worst = std::max(worst, (std::hypot(ev(b.a[0], b.a0[0]), ev(b.a[1], b.a0[1])) - t) /
                                std::max(1.0, std::abs(t)));
  }
  return worst;
}

struct Node {
  double bound;
  int depth;
  long id;
  std::vector<double> lo, hi;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.id > b.id;
  }
};

// Most fractional integer variable, lowest index on ties; -1 if integral.
// Commitment counts go first: start-up and shut-down counts follow from them.
int branch_var(const std::vector<double>& x, const std::vector<bool>& integer, double tol,
               const std::vector<bool>& primary) {
  int best = -1;
  double best_score = -1;
  bool best_primary = false;
  for (size_t j = 0; j < x.size(); ++j) {
    if (!integer[j]) continue;
    const double f = x[j] - std::floor(x[j]);
    if (f <= tol || f >= 1 - tol) continue;
    const double score = std::min(f, 1 - f);
    const bool prim = !primary.empty() && primary[j];
    if (best_primary && !prim) continue;
    if ((prim && !best_primary) || score > best_score + 1e-12) {
      best_score = score;
      best = static_cast<int>(j);
      best_primary = prim;
    }
  }
  return best;
}

constexpr double kNearFeasible = 1e-4;

double rel_gap(double inc, double bound) { return (inc - bound) / std::max(1.0, std::abs(inc)); }

class Search {
 public:
  Search(const ConicProgram& p, const std::vector<bool>& integer, const BnbLimits& lim)
      : p_(p), integer_(integer), lim_(lim) {
    for (const auto& v : p.vars) primary_.push_back(v.name.role == Role::y_g);
  }

  Solution run();

 private:
  Solution solve(const std::vector<double>& lo, const std::vector<double>& hi) {
    ++stats_.nodes;
    return solve_socp(p_, lo, hi, lim_.socp);
  }
  void try_incumbent(const Solution& relax, std::vector<double> lo, std::vector<double> hi);
  void dive(const Solution& root, const std::vector<double>& lo, const std::vector<double>& hi);
  void round_up(const Solution& relax, std::vector<double> lo, std::vector<double> hi);

  const ConicProgram& p_;
  const std::vector<bool>& integer_;
  std::vector<bool> primary_;
  const BnbLimits& lim_;
  BnbStats stats_;
  std::optional<Solution> incumbent_;
};

// Fixes integers at their rounded values and re-solves the continuous part.
void Search::try_incumbent(const Solution& relax, std::vector<double> lo, std::vector<double> hi) {
  for (size_t j = 0; j < integer_.size(); ++j)
    if (integer_[j]) lo[j] = hi[j] = std::round(relax.primal[j]);
  Solution s = solve(lo, hi);
  if (!s.optimal()) {
    // Boundary-only cones can stall short of full accuracy; keep near-feasible points.
    if (s.primal.empty() || max_violation(p_, s.primal, lo, hi) > kNearFeasible) return;
    s.status = SolveStatus::optimal;
    s.message = "incumbent at reduced accuracy";
  }
  if (!incumbent_ || s.objective < incumbent_->objective - 1e-9 * std::max(1.0, std::abs(s.objective))) {
    incumbent_ = std::move(s);
    ++stats_.incumbent_updates;
    if (lim_.socp.verbose)
      std::fprintf(stderr, "bnb: incumbent %.6f after %d nodes\n", incumbent_->objective, stats_.nodes);
  }
}

// Commits every fractional unit count upwards and lets the start-up
// variables follow; cheap incumbents for multi-period programs.
void Search::round_up(const Solution& relax, std::vector<double> lo, std::vector<double> hi) {
  bool changed = false;
  for (size_t j = 0; j < integer_.size(); ++j) {
    if (!integer_[j] || p_.vars[j].name.role != Role::y_g) continue;
    const double v = std::min(hi[j], std::ceil(relax.primal[j] - lim_.int_tol));
    changed = changed || std::abs(v - relax.primal[j]) > lim_.int_tol;
    lo[j] = hi[j] = v;
  }
  if (!changed) return;
  Solution s = solve(lo, hi);
  if (!s.optimal() || branch_var(s.primal, integer_, lim_.int_tol, primary_) >= 0) return;
  try_incumbent(s, lo, hi);
}

void Search::dive(const Solution& root, const std::vector<double>& lo0, const std::vector<double>& hi0) {
  Solution cur = root;
  std::vector<double> lo = lo0, hi = hi0;
  for (int depth = 0; depth < 4 * static_cast<int>(integer_.size()) + 4; ++depth) {
    int j = branch_var(cur.primal, integer_, lim_.int_tol, primary_);
    if (j < 0) {
      try_incumbent(cur, lo, hi);
      return;
    }
    std::vector<double> ulo = lo;
    ulo[j] = std::ceil(cur.primal[j]);
    Solution up = solve(ulo, hi);
    if (up.optimal()) {
      lo = std::move(ulo);
      cur = std::move(up);
      continue;
    }
    std::vector<double> dhi = hi;
    dhi[j] = std::floor(cur.primal[j]);
    Solution down = solve(lo, dhi);
    if (!down.optimal()) return;
    hi = std::move(dhi);
    cur = std::move(down);
  }
}

Solution Search::run() {
  std::vector<double> lo, hi;
  for (const auto& v : p_.vars) {
    lo.push_back(v.lo);
    hi.push_back(v.hi);
  }
  Solution root = solve(lo, hi);
  if (!root.optimal()) {
    root.bnb = stats_;
    return root;
  }
  round_up(root, lo, hi);
  dive(root, lo, hi);

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  long next_id = 0;
  open.push({root.objective, 0, next_id++, lo, hi});
  double bound = root.objective;
  bool capped = false;
  bool first = true;
  int processed = 0;

  while (!open.empty()) {
    Node node = open.top();
    bound = node.bound;
    if (incumbent_ && rel_gap(incumbent_->objective, bound) <= lim_.gap_tol) break;
    if (stats_.nodes >= lim_.node_cap) {
      capped = true;
      break;
    }
    open.pop();
    Solution s = first ? root : solve(node.lo, node.hi);
    first = false;
    if (!s.optimal()) continue;
    if (incumbent_ && rel_gap(incumbent_->objective, s.objective) <= lim_.gap_tol) continue;
    int j = branch_var(s.primal, integer_, lim_.int_tol, primary_);
    if (j < 0) {
      try_incumbent(s, node.lo, node.hi);
      continue;
    }
    if (++processed % 20 == 0) round_up(s, node.lo, node.hi);
    Node down{s.objective, node.depth + 1, next_id++, node.lo, node.hi};
    down.hi[j] = std::floor(s.primal[j]);
    Node up{s.objective, node.depth + 1, next_id++, node.lo, std::move(node.hi)};
    up.lo[j] = std::ceil(s.primal[j]);
    open.push(std::move(down));
    open.push(std::move(up));
  }
  if (open.empty() && incumbent_) bound = incumbent_->objective;

  if (!incumbent_) {
    Solution out;
    out.status = capped ? SolveStatus::node_limit : SolveStatus::infeasible;
    out.message = capped ? "node cap without incumbent" : "no integer-feasible point";
    stats_.bound = bound;
    out.bnb = stats_;
    return out;
  }
  Solution out = std::move(*incumbent_);
  stats_.bound = std::min(bound, out.objective);
  stats_.gap = std::max(0.0, rel_gap(out.objective, stats_.bound));
  if (capped && stats_.gap > lim_.gap_tol) {
    out.status = SolveStatus::node_limit;
    out.message = "node cap reached";
  }
  out.bnb = stats_;
  return out;
}

// Splits aggregate counts onto class members; continuous values split equally.
std::vector<double> disaggregate(const ConicProgram& full, const Aggregation& g,
                                 const std::vector<double>& xa) {
  const int n = static_cast<int>(full.vars.size());
  std::vector<double> x(n, 0.0);
  for (int j = 0; j < n; ++j)
    if (g.member_of[j] < 0) x[j] = xa[g.map[j]];
  if (!g.merged) return x;

  for (size_t c = 0; c < full.classes.size(); ++c) {
    const auto& cls = full.classes[c];
    const int units = static_cast<int>(cls.members.size());
    // Per-period variable positions of member 0.
    std::vector<std::map<Role, int>> slot(full.periods);
    for (size_t pos = 0; pos < cls.members[0].size(); ++pos) {
      const auto& v = full.vars[cls.members[0][pos]];
      slot[v.name.period][v.name.role] = static_cast<int>(pos);
    }
    auto count = [&](int t, Role r) {
      auto it = slot[t].find(r);
      return it == slot[t].end() ? 0 : static_cast<int>(std::lround(xa[g.map[cls.members[0][it->second]]]));
    };
    auto set = [&](int k, int t, Role r, double v) {
      auto it = slot[t].find(r);
      if (it != slot[t].end()) x[cls.members[k][it->second]] = v;
    };

    // Unit state: online flag, periods since the last change, start history.
    std::vector<int> online(units, cls.initially_online ? 1 : 0);
    std::vector<int> since(units, cls.initial_periods);
    std::vector<std::vector<int>> st(units, std::vector<int>(full.periods, 0));
    std::vector<std::vector<int>> sg(units, std::vector<int>(full.periods, 0));
    std::vector<std::vector<int>> sd(units, std::vector<int>(full.periods, 0));
    std::vector<int> order(units);
    for (int t = 0; t < full.periods; ++t) {
      std::iota(order.begin(), order.end(), 0);
      auto pending = [&](int k) {
        for (int j = std::max(0, t - cls.t_st); j < t; ++j)
          if (st[k][j]) return true;
        return false;
      };
      auto recent = [&](const std::vector<std::vector<int>>& ev, int k, int window) {
        for (int j = std::max(0, t - window); j < t; ++j)
          if (ev[k][j]) return true;
        return false;
      };
      // Longest in current state first, then by member order.
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return since[a] > since[b]; });

      int need_st = count(t, Role::y_st);
      for (int k : order) {
        if (need_st == 0) break;
        if (online[k] || pending(k) || recent(sd, k, cls.t_mdt)) continue;
        st[k][t] = 1;
        --need_st;
      }
      for (int k = 0; k < units; ++k) {
        if (cls.t_st == 0) sg[k][t] = st[k][t];
        else if (t - cls.t_st >= 0) sg[k][t] = st[k][t - cls.t_st];
      }
      int need_sd = count(t, Role::y_sd);
      for (int k : order) {
        if (need_sd == 0) break;
        if (!online[k] || recent(sg, k, cls.t_mut)) continue;
        sd[k][t] = 1;
        --need_sd;
      }
      if (slot[t].find(Role::y_st) == slot[t].end()) {
        const int committed = count(t, Role::y_g);
        for (int k = 0; k < units; ++k) online[k] = k < committed ? 1 : 0;
      } else {
        for (int k = 0; k < units; ++k) {
          const int now = online[k] + sg[k][t] - sd[k][t];
          since[k] = now != online[k] ? 1 : since[k] + 1;
          online[k] = now;
        }
      }
      int on = 0;
      for (int k = 0; k < units; ++k) on += online[k];
      for (int k = 0; k < units; ++k) {
        set(k, t, Role::y_g, online[k]);
        set(k, t, Role::y_st, st[k][t]);
        set(k, t, Role::y_sg, sg[k][t]);
        set(k, t, Role::y_sd, sd[k][t]);
        for (Role r : {Role::p_g, Role::r_g}) {
          auto it = slot[t].find(r);
          if (it == slot[t].end()) continue;
          const double total = xa[g.map[cls.members[0][it->second]]];
          set(k, t, r, on > 0 && online[k] ? total / on : 0.0);
        }
      }
    }
  }
  return x;
}

}  // namespace

Solution solve_misocp(const ConicProgram& program, const BnbLimits& limits) {
  if (!program.has_integers()) return solve_socp(program, limits.socp);

  const bool merge = limits.symmetry && !program.classes.empty();
  Aggregation g = aggregate(program, merge);
  Search search(g.program, g.integer, limits);
  Solution agg = search.run();
  if (agg.status != SolveStatus::optimal && agg.status != SolveStatus::node_limit) return agg;

  Solution out;
  out.status = agg.status;
  out.message = agg.message;
  out.bnb = agg.bnb;
  out.iterations = agg.iterations;
  out.primal = disaggregate(program, g, agg.primal);
  out.objective = program.evaluate_objective(out.primal);
  std::vector<double> lo, hi;
  for (const auto& v : program.vars) {
    lo.push_back(v.lo);
    hi.push_back(v.hi);
  }
  const double viol = max_violation(program, out.primal, lo, hi);
  std::vector<double> alo, ahi;
  for (const auto& v : g.program.vars) {
    alo.push_back(v.lo);
    ahi.push_back(v.hi);
  }
  const double agg_viol = max_violation(g.program, agg.primal, alo, ahi);
  if (viol > std::max(1e-6, 10 * agg_viol)) {
    out.bnb->disaggregation_failures += 1;
    out.message += (out.message.empty() ? "" : "; ") + std::string("disaggregation violates rows");
    if (viol > 1e-4) out.status = SolveStatus::numerical;
  }
  out.kkt.primal_feas = viol;
  return out;
}

}  // namespace freqclear
