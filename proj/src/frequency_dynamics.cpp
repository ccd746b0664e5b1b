#include "freqclear/frequency_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace freqclear {

double response_profile(double t, const DispatchPoint& p) {
  if (t <= 0) return 0;
  const double efr = p.r_efr * std::min(t / p.params.t_efr, 1.0);
  const double pfr = p.r_pfr * std::min(t / p.params.t_pfr, 1.0);
  return efr + pfr;
}

double recovery_profile(double t, const DispatchPoint& p, double t_rec) {
  return t > t_rec ? p.params.k_rec * p.h_synt : 0.0;
}

namespace {

// Net power deficit d(t) = P_L + P_rec(t) - FR(t) is linear on each segment.
struct Segment {
  double t0, t1;
  double a, b;  // d(t) = a + b * t
};

std::vector<Segment> segments(const DispatchPoint& p, double horizon) {
  const auto& s = p.params;
  std::vector<double> br{0.0, s.t_efr, s.t_pfr, s.t_rec};
  std::sort(br.begin(), br.end());
  br.push_back(std::max(horizon, br.back() + 1.0));
  std::vector<Segment> out;
  for (size_t i = 0; i + 1 < br.size(); ++i) {
    double t0 = br[i], t1 = br[i + 1];
    if (t1 <= t0) continue;
    double mid = 0.5 * (t0 + t1);
    double re = mid < s.t_efr ? p.r_efr / s.t_efr : 0.0;
    double rg = mid < s.t_pfr ? p.r_pfr / s.t_pfr : 0.0;
    double a = p.p_loss + recovery_profile(mid, p, s.t_rec);
    a -= (mid < s.t_efr ? 0.0 : p.r_efr) + (mid < s.t_pfr ? 0.0 : p.r_pfr);
    out.push_back({t0, t1, a, -(re + rg)});
  }
  return out;
}

// Integral of d over [t0, t] on one segment.
double seg_integral(const Segment& g, double t) {
  return g.a * (t - g.t0) + 0.5 * g.b * (t * t - g.t0 * g.t0);
}

}  // namespace

FrequencyTrace simulate_post_fault(const DispatchPoint& p, double horizon, double dt) {
  const double H = p.inertia();
  if (!(H > 0)) throw NadirError("simulation needs positive inertia");
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  const double k = p.params.f0 / (2.0 * H);
  auto segs = segments(p, horizon);

  // Deviation at each segment start, then exact extremum inside segments.
  std::vector<double> f_start(segs.size() + 1, 0.0);
  for (size_t i = 0; i < segs.size(); ++i)
    f_start[i + 1] = f_start[i] - k * seg_integral(segs[i], segs[i].t1);

  auto eval = [&](double t) {
    for (size_t i = 0; i < segs.size(); ++i)
      if (t <= segs[i].t1 || i + 1 == segs.size())
        return f_start[i] - k * seg_integral(segs[i], std::min(t, segs[i].t1));
    return 0.0;
  };

  double best_t = 0, best_f = 0;
  auto consider = [&](double t) {
    if (t < 0 || t > horizon) return;
    double f = eval(t);
    if (f < best_f) {
      best_f = f;
      best_t = t;
    }
  };
  for (const auto& g : segs) {
    consider(std::min(g.t0, horizon));
    consider(std::min(g.t1, horizon));
    if (g.b != 0) {
      double ts = -g.a / g.b;  // deficit crosses zero
      if (ts > g.t0 && ts < g.t1) consider(ts);
    }
  }

  FrequencyTrace tr;
  const int n = static_cast<int>(std::floor(horizon / dt + 1e-9));
  for (int i = 0; i <= n; ++i) tr.times.push_back(i * dt);
  if (tr.times.back() < horizon) tr.times.push_back(horizon);
  if (best_t > 0) tr.times.push_back(best_t);
  std::sort(tr.times.begin(), tr.times.end());
  tr.times.erase(std::unique(tr.times.begin(), tr.times.end()), tr.times.end());
  for (double t : tr.times) tr.delta_f.push_back(eval(t));
  tr.delta_f[0] = 0.0;
  tr.nadir_time = best_t;
  tr.nadir_depth = -best_f;

  if (p.h_synt > 0 && horizon > p.params.t_rec) tr.second_nadir_depth = -eval(horizon);
  return tr;
}

NadirResult analytic_nadir(const DispatchPoint& p) {
  const auto& s = p.params;
  const double H = p.inertia();
  if (!(H > 0)) throw NadirError("analytic nadir needs positive inertia");
  const double k = s.f0 / (2.0 * H);
  const double PL = p.p_loss, RI = p.r_efr, RG = p.r_pfr;
  if (!(PL > 0)) return {};

  // Within the EFR ramp the response grows at (R_I/T_EFR + R_G/T_PFR) per second.
  const double ramp = RI / s.t_efr + RG / s.t_pfr;
  // Relative slack absorbs R_I = P_L met only to solver precision with R_G = 0.
  if (ramp > 0 && PL / ramp <= s.t_efr * (1.0 + 1e-9)) {
    NadirResult r;
    r.t_nadir = PL / ramp;
    r.depth = k * 0.5 * PL * r.t_nadir;
    r.before_efr = true;
    return r;
  }
  if (!(RG > 0)) throw NadirError("nadir not reached by PFR");
  NadirResult r;
  r.t_nadir = (PL - RI) * s.t_pfr / RG;
  r.depth = k * ((PL - RI) * (PL - RI) * s.t_pfr / (2.0 * RG) + RI * s.t_efr / 2.0);
  return r;
}

SecurityReport check_security(const DispatchPoint& p, double tol) {
  const auto& s = p.params;
  SecurityReport r;
  const double H = p.inertia();
  r.rocof_margin = 2.0 * H - p.p_loss * s.f0 / s.rocof_max;
  r.rocof_ok = r.rocof_margin >= -tol * std::max(1.0, p.p_loss * s.f0 / s.rocof_max);
  r.qss_margin = p.r_efr + p.r_pfr - p.p_loss - s.k_rec * p.h_synt;
  r.qss_ok = r.qss_margin >= -tol * std::max(1.0, p.p_loss);

  if (!(p.p_loss > 0)) {
    r.nadir_ok = true;
    r.nadir_margin = s.delta_f_max;
    r.note = "no contingency";
    return r;
  }
  if (!(H > 0)) {
    r.nadir_ok = false;
    r.note = "no inertia";
    return r;
  }
  try {
    NadirResult a = analytic_nadir(p);
    r.t_nadir = a.t_nadir;
    r.nadir_margin = s.delta_f_max - a.depth;
    if (a.t_nadir > s.t_pfr + 1e-12) {
      r.nadir_after_pfr = true;
      r.note = "nadir after PFR saturation";
    }
  } catch (const NadirError& e) {
    r.nadir_margin = -std::numeric_limits<double>::infinity();
    r.note = e.what();
  }
  const double horizon = std::max(60.0, 3.0 * s.t_rec);
  FrequencyTrace tr = simulate_post_fault(p, horizon, 0.01);
  r.simulated_depth = tr.nadir_depth;
  double sim_margin = s.delta_f_max - tr.nadir_depth;
  r.nadir_ok = r.nadir_margin >= -tol && sim_margin >= -tol && !r.nadir_after_pfr;
  return r;
}

void write_trace_csv(const FrequencyTrace& tr, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "t,delta_f\n";
  char buf[64];
  for (size_t i = 0; i < tr.times.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f,%.9f\n", tr.times[i], tr.delta_f[i]);
    out << buf;
  }
}

}  // namespace freqclear
