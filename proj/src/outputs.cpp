#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"

#include "freqclear/scenario_runner.hpp"

namespace freqclear {

namespace {

constexpr int kSchemaVersion = 1;

std::string num(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  // Avoid "-0.00" for values that round to zero.
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string money(double v) { return num(v, 2); }
std::string price(double v) { return num(v, 2); }
std::string qty(double v) { return num(v, 3); }

class Out {
 public:
  explicit Out(const std::filesystem::path& path) : path_(path), f_(path) {
    if (!f_) throw std::runtime_error("cannot write " + path.string());
  }
  std::ofstream& operator*() { return f_; }
  void close() {
    f_.close();
    if (!f_) throw std::runtime_error("write failed for " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream f_;
};

std::string flag(bool b) { return b ? "1" : "0"; }

void write_prices(const SweepResult& res, const std::filesystem::path& dir) {
  Out out(dir / "prices.csv");
  *out << "wind_mw,mode,period,energy,sync_inertia,synt_inertia,efr,pfr,"
          "rocof_binding,nadir_binding,qss_binding,status\n";
  const auto modes = modes_of(res.spec.pricing);
  for (const auto& p : res.points) {
    const int periods = p.security.empty() ? 1 : static_cast<int>(p.security.size());
    for (size_t k = 0; k < modes.size(); ++k) {
      const ModeResult* m = k < p.modes.size() ? &p.modes[k] : nullptr;
      for (int t = 0; t < periods; ++t) {
        *out << qty(p.wind_mw) << ',' << to_string(modes[k]) << ',' << t << ',';
        if (m && m->prices) {
          const auto& pr = m->prices->periods.at(t);
          *out << price(pr.energy) << ',' << price(pr.sync_inertia) << ',' << price(pr.synt_inertia)
               << ',' << price(pr.efr) << ',' << price(pr.pfr) << ',' << flag(pr.binding.rocof)
               << ',' << flag(pr.binding.nadir) << ',' << flag(pr.binding.qss) << ",ok\n";
        } else {
          *out << ",,,,,,,,failed\n";
        }
      }
    }
  }
  out.close();
}

void settlement_row(std::ofstream& f, const PointResult& p, PricingMode mode, const std::string& period,
                    const std::string& level, const UnitSettlement& u, double commitment_price) {
  f << qty(p.wind_mw) << ',' << to_string(mode) << ',' << period << ',' << level << ',' << u.unit
    << ',' << u.group << ',' << flag(u.committed) << ',' << qty(u.energy) << ',' << qty(u.response)
    << ',' << qty(u.inertia) << ',' << money(u.energy_revenue) << ',' << money(u.response_revenue)
    << ',' << money(u.inertia_revenue) << ',' << price(commitment_price) << ','
    << money(u.commitment_revenue) << ',' << money(u.operating_cost) << ',' << money(u.make_whole)
    << '\n';
}

void write_settlements(const SweepResult& res, const std::filesystem::path& dir) {
  Out out(dir / "settlements.csv");
  *out << "wind_mw,mode,period,level,unit,group,committed,energy_mwh,response_mw,inertia_mws,"
          "energy_revenue,response_revenue,inertia_revenue,commitment_price,commitment_revenue,"
          "operating_cost,make_whole\n";
  for (const auto& p : res.points)
    for (const auto& m : p.modes) {
      if (!m.settlement || !m.prices) continue;
      const auto& s = *m.settlement;
      for (size_t t = 0; t < s.by_period.size(); ++t)
        for (const auto& u : s.by_period[t]) {
          const auto& cp = m.prices->periods[t].commitment;
          auto it = cp.find(u.unit);
          settlement_row(*out, p, m.mode, std::to_string(t), "unit", u,
                         it == cp.end() ? 0.0 : it->second);
        }
      for (const auto& u : s.units) settlement_row(*out, p, m.mode, "total", "unit", u, 0.0);
      for (const auto& g : s.groups())
        settlement_row(*out, p, m.mode, "total", "group", s.group_total(g), 0.0);
    }
  out.close();
}

void write_schedule(const SweepResult& res, const std::filesystem::path& dir) {
  Out out(dir / "schedule.csv");
  *out << "wind_mw,period,unit,committed,power_mw,reserve_mw,curtailed_mw,h_s\n";
  for (const auto& p : res.points)
    for (const auto& r : p.schedule)
      *out << qty(p.wind_mw) << ',' << r.period << ',' << r.unit << ',' << num(r.committed, 0) << ','
           << qty(r.power) << ',' << qty(r.reserve) << ',' << qty(r.curtailed) << ',' << num(r.h, 4)
           << '\n';
  out.close();
}

void write_security(const SweepResult& res, const std::filesystem::path& dir) {
  Out out(dir / "security.csv");
  *out << "wind_mw,period,rocof_ok,nadir_ok,qss_ok,rocof_margin_mws,nadir_margin_hz,"
          "qss_margin_mw,simulated_depth_hz,t_nadir_s,note\n";
  for (const auto& p : res.points)
    for (size_t t = 0; t < p.security.size(); ++t) {
      const auto& s = p.security[t];
      *out << qty(p.wind_mw) << ',' << t << ',' << flag(s.rocof_ok) << ',' << flag(s.nadir_ok) << ','
           << flag(s.qss_ok) << ',' << qty(s.rocof_margin) << ',' << num(s.nadir_margin, 6) << ','
           << qty(s.qss_margin) << ',' << num(s.simulated_depth, 6) << ',' << num(s.t_nadir, 4)
           << ',' << s.note << '\n';
    }
  out.close();
}

// Finite numbers only; JSON has no NaN or infinity.
nlohmann::json finite(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

void write_summary(const SweepResult& res, const std::filesystem::path& dir) {
  using nlohmann::json;
  const auto& sp = res.spec;
  json j;
  j["schema_version"] = kSchemaVersion;
  json spec;
  spec["preset"] = sp.scenario_file ? json() : json(sp.preset);
  spec["scenario_file"] = sp.scenario_file ? json(*sp.scenario_file) : json();
  spec["wind_grid_mw"] = sp.wind_grid;
  json modes = json::array();
  for (auto m : modes_of(sp.pricing)) modes.push_back(to_string(m));
  spec["pricing"] = modes;
  spec["forecast_alpha"] = sp.forecast_alpha ? json(*sp.forecast_alpha) : json();
  spec["hi_optimize"] = sp.hi_optimize;
  spec["h_bounds"] = {sp.h_lo, sp.h_hi};
  spec["k_rec"] = sp.k_rec ? json(*sp.k_rec) : json();
  spec["multi_period"] = sp.multi_period;
  spec["c_st"] = sp.c_st;
  spec["seed"] = sp.seed;
  j["spec"] = spec;

  json points = json::array();
  for (const auto& p : res.points) {
    json q;
    q["wind_mw"] = p.wind_mw;
    q["failed"] = p.failed;
    q["error"] = p.error;
    q["status"] = to_string(p.status);
    q["objective"] = finite(p.objective);
    q["nodes"] = p.bnb.nodes;
    q["incumbent_updates"] = p.bnb.incumbent_updates;
    q["gap"] = finite(p.bnb.gap);
    q["disaggregation_failures"] = p.bnb.disaggregation_failures;
    q["committed"] = p.committed;
    q["curtailment_mw"] = p.curtailment;
    q["secure"] = p.secure();
    json ms = json::array();
    for (const auto& m : p.modes) {
      json mm;
      mm["mode"] = to_string(m.mode);
      mm["priced"] = m.prices.has_value();
      mm["diagnostic"] = m.diagnostic;
      if (m.prices) {
        mm["kkt_max"] = finite(m.prices->kkt.max());
        mm["cone_violation"] = finite(m.prices->cone_violation);
      }
      ms.push_back(mm);
    }
    q["modes"] = ms;
    points.push_back(q);
  }
  j["points"] = points;
  j["failures"] = res.failures();
  Out out(dir / "summary.json");
  *out << j.dump(2) << '\n';
  out.close();
}

// Two-column series: x is wind in GW for sweeps, the hour for multi-period runs.
void write_plots(const SweepResult& res, const std::filesystem::path& dir) {
  const auto modes = modes_of(res.spec.pricing);
  const bool multi = !res.points.empty() && res.points.front().security.size() > 1;
  using Getter = double (*)(const PeriodPrices&);
  const std::vector<std::pair<std::string, Getter>> series = {
      {"energy", [](const PeriodPrices& p) { return p.energy; }},
      {"sync_inertia", [](const PeriodPrices& p) { return p.sync_inertia; }},
      {"synt_inertia", [](const PeriodPrices& p) { return p.synt_inertia; }},
      {"efr", [](const PeriodPrices& p) { return p.efr; }},
      {"pfr", [](const PeriodPrices& p) { return p.pfr; }},
  };
  for (size_t k = 0; k < modes.size(); ++k) {
    for (const auto& [name, get] : series) {
      Out out(dir / ("plot_" + std::string(to_string(modes[k])) + "_" + name + ".dat"));
      *out << (multi ? "# hour " : "# wind_gw ") << name << '\n';
      for (const auto& p : res.points) {
        if (k >= p.modes.size() || !p.modes[k].prices) continue;
        const auto& per = p.modes[k].prices->periods;
        for (size_t t = 0; t < per.size(); ++t)
          *out << (multi ? num(static_cast<double>(t), 0) : num(p.wind_mw / 1000.0, 3)) << ' '
               << num(get(per[t]), 4) << '\n';
      }
      out.close();
    }
    if (modes[k] != PricingMode::restricted) continue;
    // Mean commitment price over units online in the period.
    Out out(dir / "plot_restricted_commitment.dat");
    *out << (multi ? "# hour " : "# wind_gw ") << "mean_commitment_price\n";
    for (const auto& p : res.points) {
      if (k >= p.modes.size() || !p.modes[k].prices) continue;
      const auto& per = p.modes[k].prices->periods;
      for (size_t t = 0; t < per.size(); ++t) {
        double sum = 0;
        int n = 0;
        for (const auto& r : p.schedule)
          if (r.period == static_cast<int>(t) && r.committed > 0.5) {
            auto it = per[t].commitment.find(r.unit);
            if (it == per[t].commitment.end()) continue;
            sum += it->second;
            ++n;
          }
        *out << (multi ? num(static_cast<double>(t), 0) : num(p.wind_mw / 1000.0, 3)) << ' '
             << num(n ? sum / n : 0.0, 4) << '\n';
      }
    }
    out.close();
  }
}

}  // namespace

void emit_outputs(const SweepResult& result, const std::string& out_dir) {
  std::filesystem::path dir(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir + ": " + ec.message());
  write_prices(result, dir);
  write_settlements(result, dir);
  write_schedule(result, dir);
  write_security(result, dir);
  write_summary(result, dir);
  write_plots(result, dir);
}

}  // namespace freqclear
