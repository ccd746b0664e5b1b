// Scenario text format: a small TOML subset (key = value, [system],
// [[generator]], [[inverter_resource]]). See docs/formats.md.
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <variant>

#include "freqclear/system_model.hpp"

namespace freqclear {

namespace {

using Value = std::variant<double, std::string, bool, std::vector<double>>;

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

double parse_number(const std::string& tok, int line, const std::string& key) {
  std::string t = trim(tok);
  std::string cleaned;
  for (char c : t)
    if (c != '_') cleaned += c;
  try {
    size_t used = 0;
    double v = std::stod(cleaned, &used);
    if (used != cleaned.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ScenarioError("line " + std::to_string(line) + ": field '" + key +
                            "': expected a number, got '" + t + "'",
                        line, key);
  }
}

Value parse_value(const std::string& raw, int line, const std::string& key) {
  std::string v = trim(raw);
  if (v.empty())
    throw ScenarioError("line " + std::to_string(line) + ": field '" + key + "' has no value",
                        line, key);
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"')
      throw ScenarioError("line " + std::to_string(line) + ": unterminated string", line, key);
    return v.substr(1, v.size() - 2);
  }
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.front() == '[') {
    if (v.back() != ']')
      throw ScenarioError("line " + std::to_string(line) + ": unterminated array", line, key);
    std::vector<double> out;
    std::string body = v.substr(1, v.size() - 2);
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!trim(item).empty()) out.push_back(parse_number(item, line, key));
    return out;
  }
  return parse_number(v, line, key);
}

struct Entry {
  Value value;
  int line;
};
using Table = std::map<std::string, Entry>;

struct Reader {
  const Table& t;
  std::string section;
  std::map<std::string, bool> used;

  [[noreturn]] void fail(const std::string& key, int line, const std::string& what) const {
    throw ScenarioError("line " + std::to_string(line) + ": " + section + "." + key + ": " + what,
                        line, key);
  }

  double num(const std::string& key, double def) {
    auto it = t.find(key);
    if (it == t.end()) return def;
    used[key] = true;
    if (auto p = std::get_if<double>(&it->second.value)) return *p;
    fail(key, it->second.line, "expected a number");
  }
  int integer(const std::string& key, int def) {
    auto it = t.find(key);
    double v = num(key, def);
    if (it != t.end() && (v != std::floor(v) || std::abs(v) > 1e9))
      fail(key, it->second.line, "expected an integer number of periods");
    return static_cast<int>(v);
  }
  bool flag(const std::string& key, bool def) {
    auto it = t.find(key);
    if (it == t.end()) return def;
    used[key] = true;
    if (auto p = std::get_if<bool>(&it->second.value)) return *p;
    fail(key, it->second.line, "expected true or false");
  }
  std::string str(const std::string& key, const std::string& def, bool required = false) {
    auto it = t.find(key);
    if (it == t.end()) {
      if (required) throw ScenarioError(section + ": missing required field '" + key + "'", 0, key);
      return def;
    }
    used[key] = true;
    if (auto p = std::get_if<std::string>(&it->second.value)) return *p;
    fail(key, it->second.line, "expected a quoted string");
  }
  std::vector<double> list(const std::string& key) {
    auto it = t.find(key);
    if (it == t.end()) return {};
    used[key] = true;
    if (auto p = std::get_if<std::vector<double>>(&it->second.value)) return *p;
    if (auto p = std::get_if<double>(&it->second.value)) return {*p};
    fail(key, it->second.line, "expected a number or an array of numbers");
  }
  int line_of(const std::string& key) const {
    auto it = t.find(key);
    return it == t.end() ? 0 : it->second.line;
  }
  void reject_unknown() const {
    for (const auto& [k, e] : t)
      if (!used.count(k)) fail(k, e.line, "unknown field");
  }
};

GeneratorSpec read_generator(Reader& r) {
  GeneratorSpec g;
  g.id = r.str("id", "", true);
  g.p_max = r.num("p_max", 0);
  g.p_msg = r.num("p_msg", 0);
  g.c_nl = r.num("c_nl", 0);
  g.c_m = r.num("c_m", 0);
  g.c_q = r.num("c_q", 0);
  g.c_st = r.num("c_st", 0);
  g.h = r.num("h", 0);
  g.r_max = r.num("r_max", 0);
  g.t_st = r.integer("t_st", 0);
  g.t_mut = r.integer("t_mut", 0);
  g.t_mdt = r.integer("t_mdt", 0);
  g.provides_inertia = r.flag("provides_inertia", true);
  std::string rk = r.str("response_kind", "none");
  if (rk == "PFR" || rk == "pfr")
    g.response_kind = ResponseKind::pfr;
  else if (rk == "none")
    g.response_kind = ResponseKind::none;
  else
    r.fail("response_kind", r.line_of("response_kind"), "expected \"PFR\" or \"none\"");
  g.must_run = r.flag("must_run", false);
  g.initially_online = r.flag("initially_online", g.must_run);
  g.initial_periods = r.integer("initial_periods", 1000);
  return g;
}

InverterResourceSpec read_inverter(Reader& r) {
  InverterResourceSpec s;
  s.id = r.str("id", "", true);
  s.p_max = r.num("p_max", 0);
  s.p_avail = r.num("p_avail", s.p_max);
  std::string c = r.str("control", "energy_only");
  if (c == "GFL" || c == "gfl")
    s.control = InverterControl::gfl;
  else if (c == "GFM" || c == "gfm")
    s.control = InverterControl::gfm;
  else if (c == "energy_only")
    s.control = InverterControl::energy_only;
  else
    r.fail("control", r.line_of("control"), "expected \"GFL\", \"GFM\" or \"energy_only\"");
  s.h = r.num("h", 0);
  s.h_optimizable = r.flag("h_optimizable", false);
  s.h_lo = r.num("h_lo", 0);
  s.h_hi = r.num("h_hi", 0);
  s.r_max = r.num("r_max", 0);
  s.alpha = r.num("alpha", 0);
  s.p_avail_profile = r.list("p_avail_profile");
  return s;
}

void read_system(Reader& r, SystemParams& p) {
  p.f0 = r.num("f0", p.f0);
  p.delta_f_max = r.num("delta_f_max", p.delta_f_max);
  p.rocof_max = r.num("rocof_max", p.rocof_max);
  p.t_efr = r.num("t_efr", p.t_efr);
  p.t_pfr = r.num("t_pfr", p.t_pfr);
  p.k_rec = r.num("k_rec", p.k_rec);
  p.p_loss = r.num("p_loss", p.p_loss);
  p.t_rec = r.num("t_rec", p.t_pfr + 0.5);
  if (r.t.count("demand")) p.demand = r.list("demand");
}

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
  return std::string(buf, res.ptr);
}

}  // namespace

FleetSpec parse_scenario(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  Table top, system;
  std::vector<std::pair<std::string, Table>> blocks;
  std::vector<int> block_lines;
  Table* cur = &top;
  bool seen_system = false;

  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.rfind("[[", 0) == 0) {
      if (s.size() < 4 || s.substr(s.size() - 2) != "]]")
        throw ScenarioError("line " + std::to_string(lineno) + ": malformed table header", lineno);
      std::string name = trim(s.substr(2, s.size() - 4));
      if (name != "generator" && name != "inverter_resource")
        throw ScenarioError("line " + std::to_string(lineno) + ": unknown table [[" + name + "]]",
                            lineno, name);
      blocks.emplace_back(name, Table{});
      block_lines.push_back(lineno);
      cur = &blocks.back().second;
      continue;
    }
    if (s.front() == '[') {
      if (s.back() != ']')
        throw ScenarioError("line " + std::to_string(lineno) + ": malformed section header", lineno);
      std::string name = trim(s.substr(1, s.size() - 2));
      if (name != "system")
        throw ScenarioError("line " + std::to_string(lineno) + ": unknown section [" + name + "]",
                            lineno, name);
      if (seen_system)
        throw ScenarioError("line " + std::to_string(lineno) + ": duplicate [system]", lineno);
      seen_system = true;
      cur = &system;
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ScenarioError("line " + std::to_string(lineno) + ": expected key = value", lineno);
    std::string key = trim(s.substr(0, eq));
    if (key.empty())
      throw ScenarioError("line " + std::to_string(lineno) + ": empty key", lineno);
    if (cur->count(key))
      throw ScenarioError("line " + std::to_string(lineno) + ": duplicate field '" + key + "'",
                          lineno, key);
    (*cur)[key] = Entry{parse_value(s.substr(eq + 1), lineno, key), lineno};
  }

  auto fit = top.find("format");
  if (fit == top.end()) throw ScenarioError("missing 'format = 1' header", 0, "format");
  auto* fv = std::get_if<double>(&fit->second.value);
  if (!fv || *fv != 1)
    throw ScenarioError("line " + std::to_string(fit->second.line) +
                            ": unsupported format version (expected 1)",
                        fit->second.line, "format");
  for (const auto& [k, e] : top)
    if (k != "format")
      throw ScenarioError("line " + std::to_string(e.line) + ": field '" + k +
                              "' outside any section",
                          e.line, k);

  FleetSpec f;
  f.params.demand.clear();
  {
    Reader r{system, "system", {}};
    read_system(r, f.params);
    r.reject_unknown();
  }
  for (size_t b = 0; b < blocks.size(); ++b) {
    auto& [name, table] = blocks[b];
    Reader r{table, name, {}};
    try {
      if (name == "generator") {
        int count = r.integer("count", 1);
        GeneratorSpec g = read_generator(r);
        r.reject_unknown();
        if (count < 1) r.fail("count", r.line_of("count"), "count must be at least 1");
        if (count == 1) {
          f.generators.push_back(g);
        } else {
          for (int k = 1; k <= count; ++k) {
            GeneratorSpec c = g;
            char buf[16];
            std::snprintf(buf, sizeof buf, "%02d", k);
            c.id = g.id + buf;
            f.generators.push_back(c);
          }
        }
      } else {
        InverterResourceSpec s = read_inverter(r);
        r.reject_unknown();
        f.inverter_resources.push_back(s);
      }
    } catch (const ScenarioError& e) {
      if (e.line() != 0) throw;
      throw ScenarioError("line " + std::to_string(block_lines[b]) + ": " + e.what(),
                          block_lines[b], e.field());
    }
  }
  if (f.params.demand.empty()) f.params.demand = {0.0};
  return f;
}

FleetSpec load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  FleetSpec f = parse_scenario(ss.str());
  auto diags = validate(f);
  for (const auto& d : diags) {
    if (d.severity != Severity::error) continue;
    if (d.code == "nadir_regime") throw NadirRegimeError(d.field + ": " + d.message, 0, d.field);
  }
  for (const auto& d : diags)
    if (d.severity == Severity::error) throw ScenarioError(d.field + ": " + d.message, 0, d.field);
  return f;
}

std::string serialize_scenario(const FleetSpec& f) {
  std::ostringstream o;
  o << "format = 1\n\n[system]\n";
  const auto& p = f.params;
  o << "f0 = " << fmt(p.f0) << "\n";
  o << "delta_f_max = " << fmt(p.delta_f_max) << "\n";
  o << "rocof_max = " << fmt(p.rocof_max) << "\n";
  o << "t_efr = " << fmt(p.t_efr) << "\n";
  o << "t_pfr = " << fmt(p.t_pfr) << "\n";
  o << "t_rec = " << fmt(p.t_rec) << "\n";
  o << "k_rec = " << fmt(p.k_rec) << "\n";
  o << "p_loss = " << fmt(p.p_loss) << "\n";
  auto list = [](const std::vector<double>& v) {
    std::string s = "[";
    for (size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
    return s + "]";
  };
  if (p.demand.size() == 1)
    o << "demand = " << fmt(p.demand[0]) << "\n";
  else
    o << "demand = " << list(p.demand) << "\n";

  for (const auto& g : f.generators) {
    o << "\n[[generator]]\n";
    o << "id = \"" << g.id << "\"\n";
    o << "p_max = " << fmt(g.p_max) << "\np_msg = " << fmt(g.p_msg) << "\n";
    o << "c_nl = " << fmt(g.c_nl) << "\nc_m = " << fmt(g.c_m) << "\n";
    if (g.c_q != 0) o << "c_q = " << fmt(g.c_q) << "\n";
    o << "c_st = " << fmt(g.c_st) << "\n";
    o << "h = " << fmt(g.h) << "\nr_max = " << fmt(g.r_max) << "\n";
    o << "t_st = " << g.t_st << "\nt_mut = " << g.t_mut << "\nt_mdt = " << g.t_mdt << "\n";
    o << "provides_inertia = " << (g.provides_inertia ? "true" : "false") << "\n";
    o << "response_kind = \"" << to_string(g.response_kind) << "\"\n";
    o << "must_run = " << (g.must_run ? "true" : "false") << "\n";
    o << "initially_online = " << (g.initially_online ? "true" : "false") << "\n";
    o << "initial_periods = " << g.initial_periods << "\n";
  }
  for (const auto& r : f.inverter_resources) {
    o << "\n[[inverter_resource]]\n";
    o << "id = \"" << r.id << "\"\n";
    o << "control = \"" << to_string(r.control) << "\"\n";
    o << "p_max = " << fmt(r.p_max) << "\np_avail = " << fmt(r.p_avail) << "\n";
    o << "h = " << fmt(r.h) << "\n";
    o << "h_optimizable = " << (r.h_optimizable ? "true" : "false") << "\n";
    o << "h_lo = " << fmt(r.h_lo) << "\nh_hi = " << fmt(r.h_hi) << "\n";
    o << "r_max = " << fmt(r.r_max) << "\nalpha = " << fmt(r.alpha) << "\n";
    if (!r.p_avail_profile.empty()) o << "p_avail_profile = " << list(r.p_avail_profile) << "\n";
  }
  return o.str();
}

void save_scenario(const FleetSpec& fleet, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ScenarioError("cannot write scenario file " + path);
  out << serialize_scenario(fleet);
  if (!out) throw ScenarioError("write failed for " + path);
}

}  // namespace freqclear
