#include <algorithm>
#include <cmath>

#include "freqclear/conic_solver.hpp"

namespace freqclear {

double KktReport::max() const {
  return std::max({stationarity, primal_feas, dual_feas, complementarity});
}

KktReport verify_kkt(const ConicProgram& program, const Solution& solution) {
  std::vector<double> lo, hi;
  for (const auto& v : program.vars) {
    lo.push_back(v.lo);
    hi.push_back(v.hi);
  }
  return verify_kkt(program, lo, hi, solution);
}

namespace {

double dot(const Terms& t, const std::vector<double>& x) {
  double s = 0;
  for (auto [j, a] : t) s += a * x[j];
  return s;
}

double abs_dot(const Terms& t, const std::vector<double>& x) {
  double s = 0;
  for (auto [j, a] : t) s += std::abs(a * x[j]);
  return s;
}

}  // namespace

KktReport verify_kkt(const ConicProgram& P, const std::vector<double>& lo,
                     const std::vector<double>& hi, const Solution& s) {
  KktReport rep;
  const size_t n = P.vars.size();
  const auto& x = s.primal;
  if (x.size() != n || s.row_duals.size() != P.rows.size() || s.soc_duals.size() != P.socs.size()) {
    rep.stationarity = rep.primal_feas = rep.dual_feas = rep.complementarity = INFINITY;
    return rep;
  }

  std::vector<double> grad(P.objective), mag(n);
  for (size_t j = 0; j < n; ++j) mag[j] = std::abs(P.objective[j]);
  auto add = [&](int j, double v) {
    grad[j] += v;
    mag[j] += std::abs(v);
  };

  double dual_obj = P.objective_constant;
  double comp = 0;
  const double obj_scale = std::max(1.0, std::abs(s.objective));

  for (size_t i = 0; i < P.rows.size(); ++i) {
    const auto& r = P.rows[i];
    const double d = s.row_duals[i];
    const double ax = dot(r.coeffs, x);
    const double scale = std::max({1.0, std::abs(r.rhs), abs_dot(r.coeffs, x)});
    double viol = 0, slack = 0, sign = 0;
    switch (r.sense) {
      case Sense::eq:
        viol = std::abs(ax - r.rhs);
        sign = -1;
        break;
      case Sense::ge:
        viol = std::max(0.0, r.rhs - ax);
        slack = ax - r.rhs;
        sign = -1;
        rep.dual_feas = std::max(rep.dual_feas, -d / std::max(1.0, std::abs(d)));
        break;
      case Sense::le:
        viol = std::max(0.0, ax - r.rhs);
        slack = r.rhs - ax;
        sign = 1;
        rep.dual_feas = std::max(rep.dual_feas, -d / std::max(1.0, std::abs(d)));
        break;
    }
    rep.primal_feas = std::max(rep.primal_feas, viol / scale);
    for (auto [j, a] : r.coeffs) add(j, sign * d * a);
    dual_obj += -sign * d * r.rhs;
    comp += std::abs(d * slack);
  }

  for (size_t j = 0; j < n; ++j) {
    const double l = s.lo_duals[j], u = s.hi_duals[j];
    rep.dual_feas = std::max({rep.dual_feas, -l / std::max(1.0, std::abs(l)),
                              -u / std::max(1.0, std::abs(u))});
    if (std::isfinite(lo[j])) {
      rep.primal_feas = std::max(rep.primal_feas, (lo[j] - x[j]) / std::max(1.0, std::abs(lo[j])));
      comp += std::abs(l * (x[j] - lo[j]));
      dual_obj += l * lo[j];
    } else {
      rep.dual_feas = std::max(rep.dual_feas, std::abs(l));
    }
    if (std::isfinite(hi[j])) {
      rep.primal_feas = std::max(rep.primal_feas, (x[j] - hi[j]) / std::max(1.0, std::abs(hi[j])));
      comp += std::abs(u * (hi[j] - x[j]));
      dual_obj -= u * hi[j];
    } else {
      rep.dual_feas = std::max(rep.dual_feas, std::abs(u));
    }
    add(static_cast<int>(j), u - l);
  }

  for (size_t k = 0; k < P.socs.size(); ++k) {
    const auto& b = P.socs[k];
    const auto& d = s.soc_duals[k];
    const double t = dot(b.c, x) + b.c0;
    const double u1 = dot(b.a[0], x) + b.a0[0];
    const double u2 = dot(b.a[1], x) + b.a0[1];
    const double scale = std::max({1.0, std::abs(t), std::abs(b.c0), abs_dot(b.c, x)});
    rep.primal_feas = std::max(rep.primal_feas, (std::hypot(u1, u2) - t) / scale);
    rep.dual_feas =
        std::max(rep.dual_feas, (std::hypot(d.lambda1, d.lambda2) - d.mu) / std::max(1.0, d.mu));
    for (auto [j, a] : b.c) add(j, -d.mu * a);
    for (auto [j, a] : b.a[0]) add(j, d.lambda1 * a);
    for (auto [j, a] : b.a[1]) add(j, d.lambda2 * a);
    dual_obj += -d.mu * b.c0 + d.lambda1 * b.a0[0] + d.lambda2 * b.a0[1];
    comp += std::abs(d.mu * t - d.lambda1 * u1 - d.lambda2 * u2);
  }

  for (size_t j = 0; j < n; ++j)
    rep.stationarity = std::max(rep.stationarity, std::abs(grad[j]) / std::max(1.0, mag[j]));
  rep.complementarity = comp / obj_scale;
  rep.dual_objective = dual_obj;
  return rep;
}

}  // namespace freqclear
