// freqclear: sweeps and multi-period runs of the frequency-secured clearing engine.
#include <chrono>
#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "freqclear/scenario_runner.hpp"

using namespace freqclear;

namespace {

struct RunArgs {
  std::string scenario;
  std::string preset;
  std::string wind = "";
  std::string pricing = "dispatchable";
  double alpha = -1;
  bool optimize_hi = false;
  double h_lo = 0, h_hi = 6;
  double krec = -1;
  double h_gfm = -1;
  bool multi_period = false;
  double cst = 10000;
  double wind_fraction = 0.6;
  std::string demand;
  std::string out = "out";
  std::uint64_t seed = 0;
  bool verbose = false;
  int jobs = 1;
};

SweepSpec to_spec(const RunArgs& a) {
  SweepSpec s;
  if (!a.scenario.empty()) s.scenario_file = a.scenario;
  if (!a.preset.empty()) s.preset = a.preset;
  s.wind_grid = parse_wind_range(a.wind);
  s.pricing = parse_pricing(a.pricing);
  if (a.alpha >= 0) s.forecast_alpha = a.alpha;
  s.hi_optimize = a.optimize_hi;
  s.h_lo = a.h_lo;
  s.h_hi = a.h_hi;
  if (a.krec >= 0) s.k_rec = a.krec;
  if (a.h_gfm >= 0) s.h_gfm = a.h_gfm;
  s.multi_period = a.multi_period;
  s.c_st = a.cst;
  s.wind_fraction = a.wind_fraction;
  if (!a.demand.empty()) s.demand_profile = a.demand;
  s.seed = a.seed;
  s.verbose = a.verbose;
  s.jobs = a.jobs;
  return s;
}

int run(const RunArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  SweepSpec spec = to_spec(a);
  const bool multi =
      spec.multi_period || (!spec.scenario_file && find_preset(spec.preset).multi_period);
  if (!multi && !spec.scenario_file && spec.wind_grid.empty())
    std::fprintf(stderr, "note: empty wind grid, nothing to solve\n");
  SweepResult res = multi ? run_multi_period(spec) : run_sweep(spec);
  emit_outputs(res, a.out);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const int failed = res.failures();
  std::fprintf(stderr, "%zu point(s), %d failed, %.2f s, outputs in %s\n", res.points.size(), failed,
               secs, a.out.c_str());
  for (const auto& p : res.points)
    if (p.failed) std::fprintf(stderr, "  %.0f MW: %s\n", p.wind_mw, p.error.c_str());
  return failed > 0 ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-secured unit commitment and ancillary-service pricing"};
  app.require_subcommand(1);
  RunArgs a;
  auto* run_cmd = app.add_subcommand("run", "solve a sweep or a 24-hour instance and write outputs");
  auto* src = run_cmd->add_option("--scenario", a.scenario, "scenario file (TOML)");
  std::string preset_help = "case-study preset:";
  for (const auto& p : presets()) preset_help += " " + p.name;
  run_cmd->add_option("--preset", a.preset, preset_help)->excludes(src);
  run_cmd->add_option("--wind-gw", a.wind, "wind availability in GW: X, LO:HI[:STEP] or X,Y,...");
  run_cmd->add_option("--pricing", a.pricing, "dispatchable, restricted or both");
  run_cmd->add_option("--alpha", a.alpha, "GFM inertia forecast fraction alpha in [0,1]");
  run_cmd->add_flag("--optimize-hi", a.optimize_hi, "optimise H_i of GFM units");
  run_cmd->add_option("--hi-min", a.h_lo, "lower H_i bound, s");
  run_cmd->add_option("--hi-max", a.h_hi, "upper H_i bound, s");
  run_cmd->add_option("--krec", a.krec, "recovery coefficient k_rec override");
  run_cmd->add_option("--h-gfm", a.h_gfm, "fixed GFM inertia constant, s");
  run_cmd->add_flag("--multi-period", a.multi_period, "24-hour instance");
  run_cmd->add_option("--cst", a.cst, "start-up cost per gas unit, GBP");
  run_cmd->add_option("--wind-fraction", a.wind_fraction, "24-hour wind as a fraction of capacity");
  run_cmd->add_option("--demand", a.demand, "24-hour demand profile file (MW per line)");
  run_cmd->add_option("--out", a.out, "output directory");
  run_cmd->add_option("--seed", a.seed, "recorded in summary.json");
  run_cmd->add_flag("--verbose", a.verbose, "per-point progress on stderr");
  run_cmd->add_option("--jobs", a.jobs, "parallel sweep points")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    return run(a);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "freqclear: %s\n", e.what());
    return 1;
  }
}
