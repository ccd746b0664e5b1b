#include "freqclear/conic_program.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace freqclear {

const char* to_string(Role r) {
  switch (r) {
    case Role::p_g: return "P_g";
    case Role::r_g: return "R_g";
    case Role::y_g: return "y_g";
    case Role::y_sg: return "y_sg";
    case Role::y_sd: return "y_sd";
    case Role::y_st: return "y_st";
    case Role::p_curt: return "P_curt";
    case Role::r_i: return "R_i";
    case Role::h_i: return "H_i";
    case Role::h_sync: return "H_sync";
    case Role::h_synt: return "H_synt";
    case Role::r_efr: return "R_EFR";
    case Role::r_pfr: return "R_PFR";
  }
  return "?";
}

int ConicProgram::add_var(VarKind kind, double lo, double hi, VarName name, double cost) {
  if (lo > hi) throw std::invalid_argument("variable bounds crossed for " + name.unit);
  VarRef v;
  v.index = static_cast<int>(vars.size());
  v.kind = kind;
  v.lo = lo;
  v.hi = hi;
  v.name = std::move(name);
  vars.push_back(v);
  objective.push_back(cost);
  return v.index;
}

int ConicProgram::add_row(Terms coeffs, Sense sense, double rhs, std::string handle) {
  int idx = static_cast<int>(rows.size());
  if (!handle.empty()) {
    if (handles.count(handle)) throw std::logic_error("duplicate handle " + handle);
    handles[handle] = {false, idx};
  }
  rows.push_back({std::move(coeffs), sense, rhs, std::move(handle)});
  return idx;
}

int ConicProgram::add_soc(SocBlock block) {
  int idx = static_cast<int>(socs.size());
  if (handles.count(block.handle)) throw std::logic_error("duplicate handle " + block.handle);
  handles[block.handle] = {true, idx};
  socs.push_back(std::move(block));
  return idx;
}

int ConicProgram::find_var(const std::string& unit, int period, Role role) const {
  for (const auto& v : vars)
    if (v.name.period == period && v.name.role == role && v.name.unit == unit) return v.index;
  return -1;
}

const LinearRow& ConicProgram::row(const std::string& handle) const {
  auto it = handles.find(handle);
  if (it == handles.end() || it->second.soc) throw std::out_of_range("no row " + handle);
  return rows[it->second.index];
}

bool ConicProgram::has_integers() const {
  return std::any_of(vars.begin(), vars.end(), [](const VarRef& v) { return v.is_integer(); });
}

double ConicProgram::evaluate_objective(const std::vector<double>& x) const {
  double s = objective_constant;
  for (size_t j = 0; j < objective.size(); ++j) s += objective[j] * x[j];
  return s;
}

ProgramBuilder::ProgramBuilder(FleetSpec fleet, BuildOptions options)
    : fleet_(std::move(fleet)), opts_(std::move(options)) {}

ProgramBuilder& ProgramBuilder::apply_forecast_error(double alpha) {
  if (!(alpha >= 0 && alpha <= 1)) throw std::invalid_argument("alpha must lie in [0,1]");
  opts_.forecast_alpha = alpha;
  return *this;
}

ProgramBuilder& ProgramBuilder::enable_hi_optimization(double h_lo, double h_hi) {
  if (!(h_lo >= 0 && h_lo <= h_hi)) throw std::invalid_argument("need 0 <= h_lo <= h_hi");
  opts_.hi_optimize = true;
  opts_.h_lo = h_lo;
  opts_.h_hi = h_hi;
  opts_.gfm_curtailment = false;
  return *this;
}

ConicProgram ProgramBuilder::build_single_period() const {
  if (fleet_.params.periods() != 1)
    throw std::invalid_argument("single-period build needs a scalar demand");
  return build(1);
}

ConicProgram ProgramBuilder::build_multi_period() const {
  if (fleet_.params.periods() != 24)
    throw std::invalid_argument("multi-period build needs 24 demand values");
  return build(24);
}

namespace {

std::string idx_handle(const std::string& base, int t) {
  return base + "[" + std::to_string(t) + "]";
}

std::string unit_handle(const std::string& base, const std::string& id, int t) {
  return base + "[" + id + "][" + std::to_string(t) + "]";
}

bool same_class(const GeneratorSpec& a, const GeneratorSpec& b) {
  GeneratorSpec x = a, y = b;
  x.id.clear();
  y.id.clear();
  return x == y;
}

struct UnitVars {
  int y = -1, p = -1, r = -1, sg = -1, sd = -1, st = -1;
};

}  // namespace

ConicProgram ProgramBuilder::build(int periods) const {
  auto diags = validate(fleet_);
  for (const auto& d : diags)
    if (d.severity == Severity::error && d.code == "nadir_regime")
      throw NadirRegimeError(d.field + ": " + d.message, 0, d.field);
  for (const auto& d : diags)
    if (d.severity == Severity::error)
      throw ScenarioError(d.field + ": " + d.message, 0, d.field);
  if (opts_.hi_optimize && opts_.gfm_curtailment)
    throw std::invalid_argument("H_i optimisation requires GFM curtailment to be disabled");

  const auto& sp = fleet_.params;
  const bool multi = periods > 1;
  const double alpha_override = opts_.forecast_alpha.value_or(-1.0);

  ConicProgram prog;
  prog.params = sp;
  prog.periods = periods;
  prog.period_index.resize(periods);

  const auto& gens = fleet_.generators;
  const auto& invs = fleet_.inverter_resources;
  std::vector<std::vector<UnitVars>> uv(gens.size(), std::vector<UnitVars>(periods));

  auto commitment_kind = [&](const GeneratorSpec& g) {
    if (opts_.fixed_commitment.count(g.id)) return VarKind::continuous;
    return opts_.relax_binaries ? VarKind::binary_relaxed : VarKind::binary;
  };
  auto startup_kind = [&]() {
    if (!opts_.fixed_commitment.empty()) return VarKind::binary_relaxed;
    return opts_.relax_binaries ? VarKind::binary_relaxed : VarKind::binary;
  };

  for (int t = 0; t < periods; ++t) {
    auto& pi = prog.period_index[t];
    pi.p_loss = sp.p_loss;
    Terms balance;
    double balance_rhs = sp.demand[t];
    Terms h_sync_terms;
    double h_sync_const = 0;
    Terms r_g_terms;

    // Synchronous generators.
    for (size_t g = 0; g < gens.size(); ++g) {
      const auto& G = gens[g];
      auto& v = uv[g][t];
      const bool pfr = G.response_kind == ResponseKind::pfr && G.r_max > 0;
      if (G.must_run) {
        v.p = prog.add_var(VarKind::continuous, G.p_msg, G.p_max, {G.id, t, Role::p_g}, G.c_m);
        prog.objective_constant += G.c_nl;
        balance.push_back({v.p, 1.0});
        if (G.provides_inertia) h_sync_const += G.h * G.p_max;
        if (pfr) {
          v.r = prog.add_var(VarKind::continuous, 0, G.r_max, {G.id, t, Role::r_g});
          prog.add_row({{v.r, 1}, {v.p, 1}}, Sense::le, G.p_max, unit_handle("headroom", G.id, t));
          r_g_terms.push_back({v.r, 1.0});
        }
        continue;
      }
      const bool fixed = opts_.fixed_commitment.count(G.id) > 0;
      double ylo = fixed ? -kInf : 0.0, yhi = fixed ? kInf : 1.0;
      v.y = prog.add_var(commitment_kind(G), ylo, yhi, {G.id, t, Role::y_g}, G.c_nl);
      v.p = prog.add_var(VarKind::continuous, -kInf, kInf, {G.id, t, Role::p_g}, G.c_m);
      if (pfr) v.r = prog.add_var(VarKind::continuous, 0, kInf, {G.id, t, Role::r_g});
      if (multi) {
        v.sg = prog.add_var(startup_kind(), 0, 1, {G.id, t, Role::y_sg}, G.c_st);
        v.sd = prog.add_var(startup_kind(), 0, 1, {G.id, t, Role::y_sd});
        v.st = prog.add_var(startup_kind(), 0, 1, {G.id, t, Role::y_st});
      }
      balance.push_back({v.p, 1.0});
      if (G.provides_inertia && G.h > 0) h_sync_terms.push_back({v.y, -G.h * G.p_max});
      prog.add_row({{v.p, 1}, {v.y, -G.p_msg}}, Sense::ge, 0, unit_handle("gen_min", G.id, t));
      prog.add_row({{v.p, 1}, {v.y, -G.p_max}}, Sense::le, 0, unit_handle("gen_max", G.id, t));
      if (pfr) {
        prog.add_row({{v.r, 1}, {v.y, -G.r_max}}, Sense::le, 0, unit_handle("pfr_cap", G.id, t));
        if (opts_.literal_headroom)
          prog.add_row({{v.r, 1}, {v.p, 1}}, Sense::le, G.p_max, unit_handle("headroom", G.id, t));
        else
          prog.add_row({{v.r, 1}, {v.p, 1}, {v.y, -G.p_max}}, Sense::le, 0,
                       unit_handle("headroom", G.id, t));
        r_g_terms.push_back({v.r, 1.0});
      }
      if (fixed) {
        const auto& vals = opts_.fixed_commitment.at(G.id);
        if (static_cast<int>(vals.size()) != periods)
          throw std::invalid_argument("fixed commitment for " + G.id + " has wrong length");
        prog.add_row({{v.y, 1}}, Sense::eq, vals[t], unit_handle("commit", G.id, t));
      }
    }

    // Inverter-based resources.
    Terms h_synt_terms;
    double h_synt_const = 0;
    for (const auto& I : invs) {
      const double avail = I.available(t);
      const double alpha = alpha_override >= 0 ? alpha_override : I.alpha;
      const bool gfm = I.control == InverterControl::gfm;
      int curt = -1;
      int h_i = -1;
      if (gfm && opts_.hi_optimize) {
        double lo = I.h_optimizable ? I.h_lo : opts_.h_lo;
        double hi = I.h_optimizable ? I.h_hi : opts_.h_hi;
        h_i = prog.add_var(VarKind::continuous, lo, hi, {I.id, t, Role::h_i});
      } else if (!gfm || opts_.gfm_curtailment) {
        curt = prog.add_var(VarKind::continuous, 0, avail, {I.id, t, Role::p_curt});
      }
      int r = prog.add_var(VarKind::continuous, 0, I.r_max, {I.id, t, Role::r_i});
      pi.r_i.push_back(r);
      if (I.r_max > 0) {
        if (curt >= 0)
          prog.add_row({{r, 1}, {curt, -1}}, Sense::le, 0, unit_handle("efr_curt", I.id, t));
        else
          throw std::invalid_argument(I.id + ": EFR needs a curtailment variable");
      }
      balance_rhs -= avail;
      if (curt >= 0) balance.push_back({curt, -1.0});
      if (gfm) {
        // Forecast-derated margin, clamped at zero per resource.
        const double margin = avail - alpha * I.p_max;
        auto& rec = prog.gfm_margin[I.id];
        rec.resize(periods, 0.0);
        rec[t] = std::max(0.0, margin);
        if (margin > 0) {
          if (h_i >= 0) {
            h_synt_terms.push_back({h_i, -margin});
          } else {
            h_synt_const += I.h * margin;
            if (curt >= 0) h_synt_terms.push_back({curt, I.h});
          }
        }
      }
    }

    // Frequency aggregates.
    pi.h_sync = prog.add_var(VarKind::continuous, -kInf, kInf, {"system", t, Role::h_sync});
    pi.h_synt = prog.add_var(VarKind::continuous, 0, kInf, {"system", t, Role::h_synt});
    double efr_cap = 0;
    for (const auto& I : invs) efr_cap += I.r_max;
    pi.r_efr = prog.add_var(VarKind::continuous, 0, efr_cap > 0 ? kInf : 0.0,
                            {"system", t, Role::r_efr});
    pi.r_pfr = prog.add_var(VarKind::continuous, -kInf, kInf, {"system", t, Role::r_pfr});

    prog.add_row(std::move(balance), Sense::eq, balance_rhs, idx_handle("load_balance", t));

    h_sync_terms.insert(h_sync_terms.begin(), {pi.h_sync, 1.0});
    prog.add_row(std::move(h_sync_terms), Sense::eq, h_sync_const, idx_handle("h_sync_def", t));
    h_synt_terms.insert(h_synt_terms.begin(), {pi.h_synt, 1.0});
    prog.add_row(std::move(h_synt_terms), Sense::eq, h_synt_const, idx_handle("h_synt_def", t));

    Terms efr_terms{{pi.r_efr, 1.0}};
    for (int r : pi.r_i) efr_terms.push_back({r, -1.0});
    prog.add_row(std::move(efr_terms), opts_.nadir_efr_cap ? Sense::le : Sense::eq, 0,
                 idx_handle("r_efr_def", t));
    r_g_terms.insert(r_g_terms.begin(), {pi.r_pfr, 1.0});
    for (size_t k = 1; k < r_g_terms.size(); ++k) r_g_terms[k].second = -1.0;
    prog.add_row(std::move(r_g_terms), Sense::eq, 0, idx_handle("r_pfr_def", t));

    prog.add_row({{pi.h_sync, 2.0}, {pi.h_synt, 2.0}}, Sense::ge,
                 sp.p_loss * sp.f0 / sp.rocof_max, idx_handle("rocof", t));

    Terms qss{{pi.r_pfr, 1.0}, {pi.h_synt, -sp.k_rec}};
    for (int r : pi.r_i) qss.push_back({r, 1.0});
    prog.add_row(std::move(qss), Sense::ge, sp.p_loss, idx_handle("qss", t));

    // Nadir: rows ordered (inertia/T_PFR/EFR row, the 1/sqrt(delta_f) row).
    const double e = sp.t_efr / (4.0 * sp.delta_f_max);
    const double sq = std::sqrt(sp.delta_f_max);
    SocBlock b;
    b.c = {{pi.h_sync, 1.0 / sp.f0}, {pi.h_synt, 1.0 / sp.f0}, {pi.r_efr, -e},
           {pi.r_pfr, 1.0 / sp.t_pfr}};
    b.a[0] = {{pi.h_sync, 1.0 / sp.f0}, {pi.h_synt, 1.0 / sp.f0}, {pi.r_efr, -e},
              {pi.r_pfr, -1.0 / sp.t_pfr}};
    b.a[1] = {{pi.r_efr, -1.0 / sq}};
    b.a0 = {0.0, sp.p_loss / sq};
    b.handle = idx_handle("nadir", t);
    prog.add_soc(std::move(b));
  }

  // Inter-temporal rows.
  if (multi) {
    for (size_t g = 0; g < gens.size(); ++g) {
      const auto& G = gens[g];
      if (G.must_run) continue;
      // History before t = 0: the unit changed state initial_periods ago.
      auto hist_sg = [&](int j) { return G.initially_online && j == -G.initial_periods ? 1.0 : 0.0; };
      auto hist_sd = [&](int j) { return !G.initially_online && j == -G.initial_periods ? 1.0 : 0.0; };
      const double y_prev0 = G.initially_online ? 1.0 : 0.0;
      for (int t = 0; t < periods; ++t) {
        const auto& v = uv[g][t];
        double rhs = 0;
        Terms rec{{v.y, 1}, {v.sg, -1}, {v.sd, 1}};
        if (t > 0) rec.push_back({uv[g][t - 1].y, -1});
        else rhs += y_prev0;
        prog.add_row(std::move(rec), Sense::eq, rhs, unit_handle("commit_rec", G.id, t));

        int ts = t - G.t_st;
        if (G.t_st == 0) {
          prog.add_row({{v.sg, 1}, {v.st, -1}}, Sense::eq, 0, unit_handle("start_lag", G.id, t));
        } else if (ts >= 0) {
          prog.add_row({{v.sg, 1}, {uv[g][ts].st, -1}}, Sense::eq, 0,
                       unit_handle("start_lag", G.id, t));
        } else {
          prog.add_row({{v.sg, 1}}, Sense::eq, 0, unit_handle("start_lag", G.id, t));
        }

        // Windows cover the T periods before t.
        Terms su{{v.st, 1}};
        double su_rhs = 1.0;
        if (t > 0) su.push_back({uv[g][t - 1].y, 1});
        else su_rhs -= y_prev0;
        for (int j = t - G.t_mdt; j < t; ++j) {
          if (j >= 0) su.push_back({uv[g][j].sd, 1});
          else su_rhs -= hist_sd(j);
        }
        prog.add_row(std::move(su), Sense::le, su_rhs, unit_handle("startup_elig", G.id, t));

        Terms sd{{v.sd, 1}};
        double sd_rhs = 0;
        if (t > 0) sd.push_back({uv[g][t - 1].y, -1});
        else sd_rhs += y_prev0;
        for (int j = t - G.t_mut; j < t; ++j) {
          if (j >= 0) sd.push_back({uv[g][j].sg, 1});
          else sd_rhs -= hist_sg(j);
        }
        prog.add_row(std::move(sd), Sense::le, sd_rhs, unit_handle("shutdown_elig", G.id, t));
      }
    }
  }

  // Interchangeable units.
  if (opts_.tag_symmetry && opts_.fixed_commitment.empty()) {
    std::vector<bool> used(gens.size(), false);
    for (size_t a = 0; a < gens.size(); ++a) {
      if (used[a] || gens[a].must_run) continue;
      SymmetryClass cls;
      cls.t_st = gens[a].t_st;
      cls.t_mut = gens[a].t_mut;
      cls.t_mdt = gens[a].t_mdt;
      cls.initially_online = gens[a].initially_online;
      cls.initial_periods = gens[a].initial_periods;
      for (size_t b = a; b < gens.size(); ++b) {
        if (used[b] || gens[b].must_run || !same_class(gens[a], gens[b])) continue;
        used[b] = true;
        cls.units.push_back(gens[b].id);
        std::vector<int> m;
        for (int t = 0; t < periods; ++t) {
          const auto& v = uv[b][t];
          for (int j : {v.y, v.p, v.r, v.sg, v.sd, v.st})
            if (j >= 0) m.push_back(j);
        }
        cls.members.push_back(std::move(m));
      }
      if (cls.units.size() > 1) prog.classes.push_back(std::move(cls));
    }
  }
  return prog;
}

ConicProgram build_single_period(const FleetSpec& fleet, const BuildOptions& options) {
  return ProgramBuilder(fleet, options).build_single_period();
}

ConicProgram build_multi_period(const FleetSpec& fleet, const BuildOptions& options) {
  return ProgramBuilder(fleet, options).build_multi_period();
}

namespace {

// Coefficients of a terms row over the four nadir aggregates.
std::array<double, 4> over_aggregates(const Terms& terms, const PeriodIndex& pi, bool& foreign) {
  std::array<double, 4> out{0, 0, 0, 0};
  for (auto [j, a] : terms) {
    if (j == pi.h_sync) out[0] += a;
    else if (j == pi.h_synt) out[1] += a;
    else if (j == pi.r_efr) out[2] += a;
    else if (j == pi.r_pfr) out[3] += a;
    else foreign = true;
  }
  return out;
}

}  // namespace

bool soc_standard_form_check(const ConicProgram& program, double tol) {
  if (static_cast<int>(program.socs.size()) != program.periods) return false;
  const auto& s = program.params;
  for (int t = 0; t < program.periods; ++t) {
    const auto& pi = program.period_index[t];
    const auto& b = program.socs[t];
    bool foreign = false;
    auto c = over_aggregates(b.c, pi, foreign);
    auto a1 = over_aggregates(b.a[0], pi, foreign);
    auto a2 = over_aggregates(b.a[1], pi, foreign);
    if (foreign) return false;
    // Variables z = (H_sync, H_synt, R_I, R_G, 1); the cone is c^2 - a1^2 - a2^2 >= 0
    // with c >= 0. Target: 4 (H/f0 - R_I e) R_G / T_PFR - (P_L - R_I)^2 / delta_f >= 0.
    std::array<double, 5> cz{c[0], c[1], c[2], c[3], b.c0};
    std::array<double, 5> a1z{a1[0], a1[1], a1[2], a1[3], b.a0[0]};
    std::array<double, 5> a2z{a2[0], a2[1], a2[2], a2[3], b.a0[1]};
    const double e = s.t_efr / (4.0 * s.delta_f_max);
    const double df = s.delta_f_max;
    std::array<double, 5> u{1.0 / s.f0, 1.0 / s.f0, -e, 0, 0};  // H/f0 - e R_I
    std::array<double, 5> v{0, 0, 0, 1.0 / s.t_pfr, 0};        // R_G / T_PFR
    std::array<double, 5> w{0, 0, -1, 0, pi.p_loss};           // P_L - R_I
    double scale = 0;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        double got = cz[i] * cz[j] - a1z[i] * a1z[j] - a2z[i] * a2z[j];
        double want = 2.0 * (u[i] * v[j] + u[j] * v[i]) - w[i] * w[j] / df;
        scale = std::max({scale, std::abs(want)});
        if (std::abs(got - want) > tol * std::max(1.0, std::abs(want))) return false;
      }
    // c = u + v, so c >= 0 follows from the product of nonnegative factors.
    for (int i = 0; i < 5; ++i)
      if (std::abs(cz[i] - (u[i] + v[i])) > tol * std::max(1.0, scale)) return false;
  }
  return true;
}

ProgramStats program_stats(const ConicProgram& program) {
  ProgramStats s;
  for (const auto& v : program.vars) {
    if (v.kind == VarKind::continuous) ++s.continuous;
    else ++s.binaries;
    if (std::isfinite(v.lo)) ++s.bound_sides;
    if (std::isfinite(v.hi) && v.hi != v.lo) ++s.bound_sides;
  }
  s.linear_rows = static_cast<int>(program.rows.size());
  s.soc_blocks = static_cast<int>(program.socs.size());
  return s;
}

namespace {

void write_terms(std::ostream& out, const Terms& terms) {
  char buf[64];
  for (auto [j, a] : terms) {
    std::snprintf(buf, sizeof buf, " %.17g*x%d", a, j);
    out << buf;
  }
}

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void dump_program(const ConicProgram& p, std::ostream& out) {
  out << "freqclear-conic 1\n";
  out << "vars " << p.vars.size() << "\n";
  for (const auto& v : p.vars) {
    const char* kind = v.kind == VarKind::continuous ? "C" : v.kind == VarKind::binary ? "B" : "R";
    out << "x" << v.index << " " << kind << " " << num(v.lo) << " " << num(v.hi) << " "
        << num(p.objective[v.index]) << " " << v.name.unit << ":" << v.name.period << ":"
        << to_string(v.name.role) << "\n";
  }
  out << "objective_constant " << num(p.objective_constant) << "\n";
  out << "rows " << p.rows.size() << "\n";
  for (const auto& r : p.rows) {
    const char* sense = r.sense == Sense::le ? "<=" : r.sense == Sense::ge ? ">=" : "=";
    out << r.handle << ":";
    write_terms(out, r.coeffs);
    out << " " << sense << " " << num(r.rhs) << "\n";
  }
  out << "socs " << p.socs.size() << "\n";
  for (const auto& b : p.socs) {
    out << b.handle << "\n  t:";
    write_terms(out, b.c);
    out << " + " << num(b.c0) << "\n";
    for (int k = 0; k < 2; ++k) {
      out << "  u" << k + 1 << ":";
      write_terms(out, b.a[k]);
      out << " + " << num(b.a0[k]) << "\n";
    }
  }
}

DispatchPoint dispatch_point(const ConicProgram& program, const std::vector<double>& x,
                             int period) {
  const auto& pi = program.period_index.at(period);
  DispatchPoint d;
  d.params = program.params;
  d.h_sync = x[pi.h_sync];
  d.h_synt = x[pi.h_synt];
  d.r_pfr = x[pi.r_pfr];
  // Delivered EFR is every R_i; the nadir credit R_EFR may be smaller.
  d.r_efr = 0;
  for (int r : pi.r_i) d.r_efr += x[r];
  d.p_loss = pi.p_loss;
  return d;
}

}  // namespace freqclear
