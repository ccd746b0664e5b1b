// Homogeneous self-dual interior-point method for LP + second-order cones,
// Nesterov-Todd scaling, Mehrotra predictor-corrector.
//
// Internal form:  min c'x  s.t.  A x = b,  G x + s = h,  s in K.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>

#include "freqclear/conic_solver.hpp"

namespace freqclear {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::node_limit: return "node_limit";
    case SolveStatus::numerical: return "numerical";
  }
  return "?";
}

double Solution::dual(const ConicProgram& p, const std::string& handle) const {
  auto it = p.handles.find(handle);
  if (it == p.handles.end() || it->second.soc) throw std::out_of_range("no row " + handle);
  return row_duals.at(it->second.index);
}

SocDual Solution::soc_dual(const ConicProgram& p, const std::string& handle) const {
  auto it = p.handles.find(handle);
  if (it == p.handles.end() || !it->second.soc) throw std::out_of_range("no cone " + handle);
  return soc_duals.at(it->second.index);
}

double Solution::value(const ConicProgram& p, const std::string& unit, int period, Role role) const {
  int j = p.find_var(unit, period, role);
  if (j < 0) throw std::out_of_range("no variable " + unit);
  return primal.at(j);
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

enum class Exit { optimal, close_to_optimal, infeasible, unbounded, maxit, numerics, fatal, running };

constexpr double kGamma = 0.99;
constexpr double kDeltaStat = 7e-8;
constexpr double kStepMin = 1e-6;
constexpr double kStepMax = 0.999;
constexpr double kSigmaMin = 1e-4;
constexpr double kSigmaMax = 1.0;
constexpr double kSafeguard = 500;
constexpr double kLinSysAcc = 1e-14;
constexpr double kIrErrFact = 6;
constexpr int kNitRef = 9;
constexpr double kFeasInacc = 1e-4;
constexpr double kAbsInacc = 5e-5;
constexpr double kRelInacc = 5e-5;
constexpr int kEquilIters = 3;

struct SocScale {
  double eta = 1, a = 1;
  Vec q;
  Eigen::MatrixXd W, W2;
};

struct Info {
  double gap = 0, mu = 0, kapovert = 0, pcost = 0, dcost = 0;
  std::optional<double> relgap, pinfres, dinfres;
  double pres = 0, dres = 0, step = 0, sigma = 0;
  int iter = 0;

  bool better_than(const Info& o) const {
    if (pinfres && kapovert > 1) {
      if (o.pinfres)
        return gap > 0 && o.gap > 0 && gap < o.gap && *pinfres > 0 && *pinfres < o.pres &&
               mu > 0 && mu < o.mu;
      return gap > 0 && o.gap > 0 && gap < o.gap && mu > 0 && mu < o.mu;
    }
    return gap > 0 && o.gap > 0 && gap < o.gap && pres > 0 && pres < o.pres && dres > 0 &&
           dres < o.dres && kapovert > 0 && kapovert < o.kapovert && mu > 0 && mu < o.mu;
  }
};

struct Iterate {
  Vec x, y, z, s, lambda;
  double tau = 1, kap = 1;
  double cx = 0, by = 0, hz = 0;
  Info info;
};

struct IpmResult {
  Exit code = Exit::fatal;
  Vec x, y, z, s;
  Info info;
};

class Ipm {
 public:
  Ipm(SpMat A, SpMat G, Vec c, Vec b, Vec h, int m_lp, std::vector<int> soc_dims,
      const SolverOptions& opt)
      : A_(std::move(A)), G_(std::move(G)), c_(std::move(c)), b_(std::move(b)), h_(std::move(h)),
        n_(static_cast<int>(c_.size())), p_(static_cast<int>(b_.size())),
        m_(static_cast<int>(h_.size())), m_lp_(m_lp), soc_(std::move(soc_dims)), opt_(opt) {
    soc_start_.reserve(soc_.size());
    int k = m_lp_;
    for (int d : soc_) {
      soc_start_.push_back(k);
      k += d;
    }
    if (k != m_) throw std::logic_error("cone dimensions do not match G");
  }

  IpmResult run();

 private:
  void equilibrate();
  void build_kkt();
  void set_scaling_block(bool identity);
  bool update_scalings(const Vec& s, const Vec& z, Vec& lambda);
  void scale(const Vec& z, Vec& out) const;
  void scale_sq(const Vec& z, Vec& out) const;
  void bring_to_cone(const Vec& r, Vec& s) const;
  void conic_product(const Vec& u, const Vec& v, Vec& w) const;
  void conic_division(const Vec& u, const Vec& w, Vec& v) const;
  double line_search(const Vec& lambda, const Vec& ds, const Vec& dz, double tau, double dtau,
                     double kap, double dkap) const;
  bool factor();
  void solve_kkt(const Vec& rhs, Vec& dx, Vec& dy, Vec& dz, bool identity_block);
  void residuals(Iterate& w);
  void statistics(Iterate& w);
  Exit check_exit(const Iterate& w, bool reduced) const;

  SpMat A_, G_, At_, Gt_;
  Vec c_, b_, h_;
  int n_, p_, m_, m_lp_;
  std::vector<int> soc_, soc_start_;
  SolverOptions opt_;

  Vec x_equil_, a_equil_, g_equil_;

  SpMat K_;
  std::vector<double*> lp_diag_;
  std::vector<std::vector<double*>> soc_block_;  // row-major lower triangle entries
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  bool analysed_ = false;

  Vec lp_v_, lp_w_;
  std::vector<SocScale> sc_;
  bool identity_scaling_ = true;

  Vec rx_, ry_, rz_;
  double rt_ = 0, hresx_ = 0, hresy_ = 0, hresz_ = 0;
  double nx_ = 0, ny_ = 0, nz_ = 0, ns_ = 0;
  double resx0_ = 1, resy0_ = 1, resz0_ = 1;
};

void scale_rows(SpMat& M, const Vec& e) {
  for (int k = 0; k < M.outerSize(); ++k)
    for (SpMat::InnerIterator it(M, k); it; ++it) it.valueRef() /= e(it.row());
}

void scale_cols(SpMat& M, const Vec& e) {
  for (int k = 0; k < M.outerSize(); ++k)
    for (SpMat::InnerIterator it(M, k); it; ++it) it.valueRef() /= e(it.col());
}

void Ipm::equilibrate() {
  x_equil_ = Vec::Ones(n_);
  a_equil_ = Vec::Ones(p_);
  g_equil_ = Vec::Ones(m_);
  if (!opt_.equilibrate) return;
  for (int iter = 0; iter < kEquilIters; ++iter) {
    Vec xt = Vec::Zero(n_), at = Vec::Zero(p_), gt = Vec::Zero(m_);
    for (int k = 0; k < A_.outerSize(); ++k)
      for (SpMat::InnerIterator it(A_, k); it; ++it) {
        double v = std::abs(it.value());
        xt(it.col()) = std::max(xt(it.col()), v);
        at(it.row()) = std::max(at(it.row()), v);
      }
    for (int k = 0; k < G_.outerSize(); ++k)
      for (SpMat::InnerIterator it(G_, k); it; ++it) {
        double v = std::abs(it.value());
        xt(it.col()) = std::max(xt(it.col()), v);
        gt(it.row()) = std::max(gt(it.row()), v);
      }
    for (size_t k = 0; k < soc_.size(); ++k) {
      double total = gt.segment(soc_start_[k], soc_[k]).sum();
      gt.segment(soc_start_[k], soc_[k]).setConstant(total);
    }
    auto root = [](double a) { return std::abs(a) < 1e-6 ? 1.0 : std::sqrt(a); };
    xt = xt.unaryExpr(root);
    at = at.unaryExpr(root);
    gt = gt.unaryExpr(root);
    scale_rows(A_, at);
    scale_rows(G_, gt);
    scale_cols(A_, xt);
    scale_cols(G_, xt);
    x_equil_ = x_equil_.cwiseProduct(xt);
    a_equil_ = a_equil_.cwiseProduct(at);
    g_equil_ = g_equil_.cwiseProduct(gt);
  }
  c_ = c_.cwiseQuotient(x_equil_);
  b_ = b_.cwiseQuotient(a_equil_);
  h_ = h_.cwiseQuotient(g_equil_);
}

void Ipm::build_kkt() {
  const int dim = n_ + p_ + m_;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(dim + A_.nonZeros() + G_.nonZeros() + 6 * soc_.size());
  for (int j = 0; j < n_; ++j) trip.emplace_back(j, j, kDeltaStat);
  for (int k = 0; k < A_.outerSize(); ++k)
    for (SpMat::InnerIterator it(A_, k); it; ++it)
      trip.emplace_back(n_ + it.row(), it.col(), it.value());
  for (int k = 0; k < G_.outerSize(); ++k)
    for (SpMat::InnerIterator it(G_, k); it; ++it)
      trip.emplace_back(n_ + p_ + it.row(), it.col(), it.value());
  for (int i = 0; i < p_; ++i) trip.emplace_back(n_ + i, n_ + i, -kDeltaStat);
  for (int i = 0; i < m_lp_; ++i) trip.emplace_back(n_ + p_ + i, n_ + p_ + i, -1.0);
  for (size_t k = 0; k < soc_.size(); ++k) {
    int o = n_ + p_ + soc_start_[k];
    for (int r = 0; r < soc_[k]; ++r)
      for (int q = 0; q <= r; ++q) trip.emplace_back(o + r, o + q, r == q ? -1.0 : 0.0);
  }
  K_.resize(dim, dim);
  K_.setFromTriplets(trip.begin(), trip.end());
  K_.makeCompressed();
  lp_diag_.clear();
  for (int i = 0; i < m_lp_; ++i) lp_diag_.push_back(&K_.coeffRef(n_ + p_ + i, n_ + p_ + i));
  soc_block_.assign(soc_.size(), {});
  for (size_t k = 0; k < soc_.size(); ++k) {
    int o = n_ + p_ + soc_start_[k];
    for (int r = 0; r < soc_[k]; ++r)
      for (int q = 0; q <= r; ++q) soc_block_[k].push_back(&K_.coeffRef(o + r, o + q));
  }
  At_ = A_.transpose();
  Gt_ = G_.transpose();
}

// Writes -W^2 - delta I into the cone block, or -I when identity is set.
void Ipm::set_scaling_block(bool identity) {
  identity_scaling_ = identity;
  for (int i = 0; i < m_lp_; ++i) *lp_diag_[i] = identity ? -1.0 : -lp_v_(i) - kDeltaStat;
  for (size_t k = 0; k < soc_.size(); ++k) {
    int idx = 0;
    for (int r = 0; r < soc_[k]; ++r)
      for (int q = 0; q <= r; ++q) {
        double v = identity ? (r == q ? -1.0 : 0.0) : -sc_[k].W2(r, q) - (r == q ? kDeltaStat : 0.0);
        *soc_block_[k][idx++] = v;
      }
  }
}

bool Ipm::update_scalings(const Vec& s, const Vec& z, Vec& lambda) {
  lp_v_ = s.head(m_lp_).cwiseQuotient(z.head(m_lp_));
  lp_w_ = lp_v_.cwiseSqrt();
  sc_.resize(soc_.size());
  for (size_t k = 0; k < soc_.size(); ++k) {
    const int o = soc_start_[k], d = soc_[k];
    const double sres = s(o) * s(o) - s.segment(o + 1, d - 1).squaredNorm();
    const double zres = z(o) * z(o) - z.segment(o + 1, d - 1).squaredNorm();
    if (sres <= 0 || zres <= 0) return false;
    const double snorm = std::sqrt(sres), znorm = std::sqrt(zres);
    Vec sbar = s.segment(o, d) / snorm;
    Vec zbar = z.segment(o, d) / znorm;
    auto& S = sc_[k];
    S.eta = std::sqrt(snorm / znorm);
    const double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
    S.a = 0.5 / gamma * (sbar(0) + zbar(0));
    S.q = 0.5 / gamma * (sbar.tail(d - 1) - zbar.tail(d - 1));
    S.W.resize(d, d);
    S.W(0, 0) = S.a;
    S.W.block(0, 1, 1, d - 1) = S.q.transpose();
    S.W.block(1, 0, d - 1, 1) = S.q;
    S.W.block(1, 1, d - 1, d - 1) =
        Eigen::MatrixXd::Identity(d - 1, d - 1) + S.q * S.q.transpose() / (1.0 + S.a);
    S.W *= S.eta;
    S.W2 = S.W * S.W;
  }
  scale(z, lambda);
  return true;
}

void Ipm::scale(const Vec& z, Vec& out) const {
  out.resize(m_);
  out.head(m_lp_) = lp_w_.cwiseProduct(z.head(m_lp_));
  for (size_t k = 0; k < soc_.size(); ++k)
    out.segment(soc_start_[k], soc_[k]) = sc_[k].W * z.segment(soc_start_[k], soc_[k]);
}

void Ipm::scale_sq(const Vec& z, Vec& out) const {
  out.resize(m_);
  if (identity_scaling_) {
    out = z;
    return;
  }
  out.head(m_lp_) = lp_v_.cwiseProduct(z.head(m_lp_));
  for (size_t k = 0; k < soc_.size(); ++k)
    out.segment(soc_start_[k], soc_[k]) = sc_[k].W2 * z.segment(soc_start_[k], soc_[k]);
}

void Ipm::bring_to_cone(const Vec& r, Vec& s) const {
  double alpha = -kGamma;
  for (int i = 0; i < m_lp_; ++i)
    if (r(i) <= 0 && -r(i) > alpha) alpha = -r(i);
  for (size_t k = 0; k < soc_.size(); ++k) {
    const int o = soc_start_[k];
    double cres = r(o) - r.segment(o + 1, soc_[k] - 1).norm();
    if (cres <= 0 && -cres > alpha) alpha = -cres;
  }
  alpha += 1.0;
  s = r;
  s.head(m_lp_).array() += alpha;
  for (size_t k = 0; k < soc_.size(); ++k) s(soc_start_[k]) += alpha;
}

void Ipm::conic_product(const Vec& u, const Vec& v, Vec& w) const {
  w.resize(m_);
  w.head(m_lp_) = u.head(m_lp_).cwiseProduct(v.head(m_lp_));
  for (size_t k = 0; k < soc_.size(); ++k) {
    const int o = soc_start_[k], d = soc_[k];
    w(o) = u.segment(o, d).dot(v.segment(o, d));
    w.segment(o + 1, d - 1) = u(o) * v.segment(o + 1, d - 1) + v(o) * u.segment(o + 1, d - 1);
  }
}

void Ipm::conic_division(const Vec& u, const Vec& w, Vec& v) const {
  v.resize(m_);
  v.head(m_lp_) = w.head(m_lp_).cwiseQuotient(u.head(m_lp_));
  for (size_t k = 0; k < soc_.size(); ++k) {
    const int o = soc_start_[k], d = soc_[k];
    const double u0 = u(o), w0 = w(o);
    const double rho = u0 * u0 - u.segment(o + 1, d - 1).squaredNorm();
    const double zeta = u.segment(o + 1, d - 1).dot(w.segment(o + 1, d - 1));
    const double factor = (zeta / u0 - w0) / rho;
    v(o) = (u0 * w0 - zeta) / rho;
    v.segment(o + 1, d - 1) = factor * u.segment(o + 1, d - 1) + w.segment(o + 1, d - 1) / u0;
  }
}

double Ipm::line_search(const Vec& lambda, const Vec& ds, const Vec& dz, double tau, double dtau,
                        double kap, double dkap) const {
  double alpha = 10.0;
  if (m_lp_ > 0) {
    double rhomin = (ds.head(m_lp_).cwiseQuotient(lambda.head(m_lp_))).minCoeff();
    double sigmamin = (dz.head(m_lp_).cwiseQuotient(lambda.head(m_lp_))).minCoeff();
    const double eps = 1e-13;
    if (-sigmamin > -rhomin)
      alpha = sigmamin < 0 ? 1.0 / -sigmamin : 1.0 / eps;
    else
      alpha = rhomin < 0 ? 1.0 / -rhomin : 1.0 / eps;
  }
  const double t = -tau / dtau, k = -kap / dkap;
  if (t > 0 && t < alpha) alpha = t;
  if (k > 0 && k < alpha) alpha = k;
  for (size_t c = 0; c < soc_.size(); ++c) {
    const int o = soc_start_[c], d = soc_[c];
    const double ln2 = lambda(o) * lambda(o) - lambda.segment(o + 1, d - 1).squaredNorm();
    if (ln2 <= 0) continue;
    const double ln = std::sqrt(ln2);
    Vec lbar = lambda.segment(o, d) / ln;
    auto norm_step = [&](const Vec& v) {
      const double lv = lbar(0) * v(o) - lbar.tail(d - 1).dot(v.segment(o + 1, d - 1));
      Vec r(d);
      r(0) = lv / ln;
      const double factor = (lv + v(o)) / (lbar(0) + 1.0);
      r.tail(d - 1) = (v.segment(o + 1, d - 1) - factor * lbar.tail(d - 1)) / ln;
      return r.tail(d - 1).norm() - r(0);
    };
    const double step = std::max({0.0, norm_step(ds), norm_step(dz)});
    if (step != 0) alpha = std::min(alpha, 1.0 / step);
  }
  return std::clamp(alpha, kStepMin, kStepMax);
}

bool Ipm::factor() {
  if (!analysed_) {
    ldlt_.analyzePattern(K_);
    analysed_ = true;
  }
  ldlt_.factorize(K_);
  return ldlt_.info() == Eigen::Success;
}

// Solves K d = rhs with refinement against the unregularised matrix.
void Ipm::solve_kkt(const Vec& rhs, Vec& dx, Vec& dy, Vec& dz, bool identity_block) {
  Vec sol = ldlt_.solve(rhs);
  const double threshold = (1.0 + rhs.lpNorm<Eigen::Infinity>()) * kLinSysAcc;
  double prev = std::numeric_limits<double>::max();
  Vec corr;
  for (int k = 0; k <= kNitRef; ++k) {
    Vec x = sol.head(n_), y = sol.segment(n_, p_), z = sol.tail(m_);
    Vec ex = rhs.head(n_) - Gt_ * z;
    if (p_ > 0) ex -= At_ * y;
    Vec ey = rhs.segment(n_, p_);
    if (p_ > 0) ey -= A_ * x;
    Vec wz;
    if (identity_block) wz = z;
    else scale_sq(z, wz);
    Vec ez = rhs.tail(m_) - G_ * x + wz;
    double err = std::max({ex.lpNorm<Eigen::Infinity>(), ez.lpNorm<Eigen::Infinity>(),
                           p_ > 0 ? ey.lpNorm<Eigen::Infinity>() : 0.0});
    if (k > 0 && err > prev) {
      sol -= corr;
      break;
    }
    if (k == kNitRef || err < threshold || (k > 0 && prev < kIrErrFact * err)) break;
    prev = err;
    Vec e(n_ + p_ + m_);
    e << ex, ey, ez;
    corr = ldlt_.solve(e);
    sol += corr;
  }
  dx = sol.head(n_);
  dy = sol.segment(n_, p_);
  dz = sol.tail(m_);
}

void Ipm::residuals(Iterate& w) {
  rx_ = -(Gt_ * w.z);
  if (p_ > 0) rx_ -= At_ * w.y;
  hresx_ = rx_.norm();
  rx_ -= w.tau * c_;
  if (p_ > 0) {
    ry_ = A_ * w.x;
    hresy_ = ry_.norm();
    ry_ -= w.tau * b_;
  } else {
    ry_.resize(0);
    hresy_ = 0;
  }
  rz_ = w.s + G_ * w.x;
  hresz_ = rz_.norm();
  rz_ -= w.tau * h_;
  w.cx = c_.dot(w.x);
  w.by = p_ > 0 ? b_.dot(w.y) : 0.0;
  w.hz = h_.dot(w.z);
  rt_ = w.kap + w.cx + w.by + w.hz;
  nx_ = w.x.norm();
  ny_ = w.y.norm();
  nz_ = w.z.norm();
  ns_ = w.s.norm();
}

void Ipm::statistics(Iterate& w) {
  Info& i = w.info;
  i.gap = w.s.dot(w.z);
  i.mu = (i.gap + w.kap * w.tau) / (m_lp_ + static_cast<double>(soc_.size()) + 1.0);
  i.kapovert = w.kap / w.tau;
  i.pcost = w.cx / w.tau;
  i.dcost = -(w.hz + w.by) / w.tau;
  if (i.pcost < 0) i.relgap = i.gap / -i.pcost;
  else if (i.dcost > 0) i.relgap = i.gap / i.dcost;
  else i.relgap.reset();
  const double nry = p_ > 0 ? ry_.norm() / std::max(resy0_ + nx_, 1.0) : 0.0;
  const double nrz = rz_.norm() / std::max(resz0_ + nx_ + ns_, 1.0);
  i.pres = std::max(nry, nrz) / w.tau;
  i.dres = rx_.norm() / std::max(resx0_ + ny_ + nz_, 1.0) / w.tau;
  i.pinfres.reset();
  i.dinfres.reset();
  if ((w.hz + w.by) / std::max(ny_ + nz_, 1.0) < -opt_.reltol)
    i.pinfres = hresx_ / std::max(ny_ + nz_, 1.0);
  if (w.cx / std::max(nx_, 1.0) < -opt_.reltol)
    i.dinfres = std::max(hresy_ / std::max(nx_, 1.0), hresz_ / std::max(nx_ + ns_, 1.0));
  if (opt_.verbose) {
    std::fprintf(stderr, "%3d  %+.6e  %+.6e  %+.1e  %.1e  %.1e  %.1e  %.1e  %.4f  %.1e\n", i.iter,
                 i.pcost, i.dcost, i.gap, i.pres, i.dres, i.kapovert, i.mu, i.step, i.sigma);
  }
}

Exit Ipm::check_exit(const Iterate& w, bool reduced) const {
  const double feastol = reduced ? kFeasInacc : opt_.feastol;
  const double abstol = reduced ? kAbsInacc : opt_.abstol;
  const double reltol = reduced ? kRelInacc : opt_.reltol;
  const Info& i = w.info;
  if ((-w.cx > 0 || -w.by - w.hz >= -abstol) && i.pres < feastol && i.dres < feastol &&
      (i.gap < abstol || (i.relgap && *i.relgap < reltol)))
    return reduced ? Exit::close_to_optimal : Exit::optimal;
  if (i.dinfres && *i.dinfres < feastol && w.tau < w.kap) return Exit::unbounded;
  if ((i.pinfres && *i.pinfres < feastol && w.tau < w.kap) ||
      (w.tau < feastol && w.kap < feastol && i.pinfres && *i.pinfres < feastol))
    return Exit::infeasible;
  return Exit::running;
}

IpmResult Ipm::run() {
  IpmResult out;
  equilibrate();
  build_kkt();
  resx0_ = std::max(1.0, c_.norm());
  resy0_ = std::max(1.0, b_.norm());
  resz0_ = std::max(1.0, h_.norm());

  set_scaling_block(true);
  if (!factor()) return out;

  const int dim = n_ + p_ + m_;
  Vec rhs1 = Vec::Zero(dim), rhs2 = Vec::Zero(dim);
  rhs1.segment(n_, p_) = b_;
  rhs1.tail(m_) = h_;
  rhs2.head(n_) = -c_;

  Iterate w;
  Vec dx1, dy1, dz1, dx2, dy2, dz2;
  solve_kkt(rhs1, dx1, dy1, dz1, true);
  w.x = dx1;
  bring_to_cone(-dz1, w.s);
  solve_kkt(rhs2, dx2, dy2, dz2, true);
  w.y = dy2;
  bring_to_cone(dz2, w.z);
  rhs1.head(n_) = -c_;
  w.tau = w.kap = 1.0;

  Iterate best;
  double pres_prev = std::numeric_limits<double>::max();
  Exit code = Exit::running;
  Vec W_dzaff, dsaff_by_W, ds1, ds2, dsaff;

  if (opt_.verbose)
    std::fprintf(stderr, " it     pcost          dcost          gap      pres     dres     k/t      mu       step    sigma\n");

  for (int it = 0; it <= opt_.max_iter; ++it) {
    w.info.iter = it;
    residuals(w);
    statistics(w);

    // Residuals scaled by 1/tau grow on the way to an infeasibility certificate.
    const bool certifying = w.info.kapovert > 1.0;
    if (it > 0 && ((!certifying && w.info.pres > kSafeguard * pres_prev) || w.info.gap < 0)) {
      w = best;
      code = check_exit(w, true);
      if (code == Exit::running) code = Exit::numerics;
      break;
    }
    pres_prev = w.info.pres;

    code = check_exit(w, false);
    if (code != Exit::running) break;
    if (it > 0 && w.info.step == kStepMin * kGamma) {
      w = best;
      code = check_exit(w, true);
      if (code == Exit::running) code = Exit::numerics;
      break;
    }
    if (it == opt_.max_iter) {
      if (!w.info.better_than(best.info)) w = best;
      code = check_exit(w, true);
      if (code == Exit::running) code = Exit::maxit;
      break;
    }
    if (std::isnan(w.info.pcost)) {
      if (it > 0 && !w.info.better_than(best.info)) w = best;
      code = check_exit(w, true);
      if (code == Exit::running) code = Exit::numerics;
      break;
    }
    if (it == 0 || w.info.better_than(best.info)) best = w;

    if (!update_scalings(w.s, w.z, w.lambda)) {
      w = best;
      code = check_exit(w, true);
      if (code == Exit::running) code = Exit::numerics;
      break;
    }
    set_scaling_block(false);
    if (!factor()) {
      w = best;
      code = check_exit(w, true);
      if (code == Exit::running) code = Exit::numerics;
      break;
    }

    solve_kkt(rhs1, dx1, dy1, dz1, false);

    // Affine direction.
    rhs2.head(n_) = rx_;
    rhs2.segment(n_, p_) = -ry_;
    rhs2.tail(m_) = w.s - rz_;
    solve_kkt(rhs2, dx2, dy2, dz2, false);

    const double dtau_denom = w.kap / w.tau - c_.dot(dx1) - b_.dot(dy1) - h_.dot(dz1);
    const double dtauaff = (rt_ - w.kap + c_.dot(dx2) + b_.dot(dy2) + h_.dot(dz2)) / dtau_denom;
    dz2 += dtauaff * dz1;
    scale(dz2, W_dzaff);
    dsaff_by_W = -W_dzaff - w.lambda;
    const double dkapaff = -w.kap - w.kap / w.tau * dtauaff;
    const double step_aff = line_search(w.lambda, dsaff_by_W, W_dzaff, w.tau, dtauaff, w.kap, dkapaff);
    const double sigma = std::clamp(std::pow(1.0 - step_aff, 3), kSigmaMin, kSigmaMax);
    w.info.sigma = sigma;

    // Combined direction.
    conic_product(w.lambda, w.lambda, ds1);
    conic_product(dsaff_by_W, W_dzaff, ds2);
    const double sigmamu = sigma * w.info.mu;
    ds1 += ds2;
    ds1.head(m_lp_).array() -= sigmamu;
    for (int o : soc_start_) ds1(o) -= sigmamu;
    conic_division(w.lambda, ds1, dsaff_by_W);  // lambda \ ds
    Vec Wdiv;
    scale(dsaff_by_W, Wdiv);
    rhs2.head(n_ + p_) *= 1.0 - sigma;
    rhs2.tail(m_) = -(1.0 - sigma) * rz_ + Wdiv;
    solve_kkt(rhs2, dx2, dy2, dz2, false);

    const double bkap = w.kap * w.tau + dkapaff * dtauaff - sigmamu;
    const double dtau =
        ((1.0 - sigma) * rt_ - bkap / w.tau + c_.dot(dx2) + b_.dot(dy2) + h_.dot(dz2)) / dtau_denom;
    dx2 += dtau * dx1;
    dy2 += dtau * dy1;
    dz2 += dtau * dz1;
    scale(dz2, W_dzaff);
    dsaff_by_W = -(dsaff_by_W + W_dzaff);
    const double dkap = -(bkap + w.kap * dtau) / w.tau;
    w.info.step = kGamma * line_search(w.lambda, dsaff_by_W, W_dzaff, w.tau, dtau, w.kap, dkap);
    scale(dsaff_by_W, dsaff);

    w.x += w.info.step * dx2;
    w.y += w.info.step * dy2;
    w.z += w.info.step * dz2;
    w.s += w.info.step * dsaff;
    w.kap += w.info.step * dkap;
    w.tau += w.info.step * dtau;
  }

  out.code = code;
  out.info = w.info;
  // Undo equilibration; certificates keep tau = 1 scaling.
  const double tau = (code == Exit::infeasible || code == Exit::unbounded) ? 1.0 : w.tau;
  out.x = w.x.cwiseQuotient(x_equil_ * tau);
  out.y = w.y.cwiseQuotient(a_equil_ * tau);
  out.z = w.z.cwiseQuotient(g_equil_ * tau);
  out.s = w.s.cwiseProduct(g_equil_ / tau);
  return out;
}

// Maps program rows, bounds and cones to the internal form.
struct Layout {
  enum Kind { eq, lp };
  struct Ref { Kind kind; int index; };
  std::vector<Ref> row;
  std::vector<int> lo, hi, fix;  // -1 if absent
  int soc_offset = 0;
};

}  // namespace

Solution solve_socp(const ConicProgram& program, const SolverOptions& options) {
  std::vector<double> lo, hi;
  for (const auto& v : program.vars) {
    lo.push_back(v.lo);
    hi.push_back(v.hi);
  }
  return solve_socp(program, lo, hi, options);
}

Solution solve_socp(const ConicProgram& P, const std::vector<double>& lo,
                    const std::vector<double>& hi, const SolverOptions& options) {
  const int n = static_cast<int>(P.vars.size());
  Solution sol;
  for (int j = 0; j < n; ++j)
    if (lo[j] > hi[j]) {
      sol.status = SolveStatus::infeasible;
      sol.message = "crossed bounds";
      return sol;
    }

  Layout L;
  L.lo.assign(n, -1);
  L.hi.assign(n, -1);
  L.fix.assign(n, -1);
  std::vector<Eigen::Triplet<double>> at, gt;
  std::vector<double> b, h;
  int p = 0, m = 0;
  for (const auto& r : P.rows) {
    if (r.sense == Sense::eq) {
      for (auto [j, a] : r.coeffs) at.emplace_back(p, j, a);
      b.push_back(r.rhs);
      L.row.push_back({Layout::eq, p++});
    } else {
      const double sgn = r.sense == Sense::le ? 1.0 : -1.0;
      for (auto [j, a] : r.coeffs) gt.emplace_back(m, j, sgn * a);
      h.push_back(sgn * r.rhs);
      L.row.push_back({Layout::lp, m++});
    }
  }
  for (int j = 0; j < n; ++j) {
    if (lo[j] == hi[j]) {
      at.emplace_back(p, j, 1.0);
      b.push_back(lo[j]);
      L.fix[j] = p++;
      continue;
    }
    if (std::isfinite(lo[j])) {
      gt.emplace_back(m, j, -1.0);
      h.push_back(-lo[j]);
      L.lo[j] = m++;
    }
    if (std::isfinite(hi[j])) {
      gt.emplace_back(m, j, 1.0);
      h.push_back(hi[j]);
      L.hi[j] = m++;
    }
  }
  const int m_lp = m;
  L.soc_offset = m;
  std::vector<int> dims;
  for (const auto& blk : P.socs) {
    for (auto [j, a] : blk.c) gt.emplace_back(m, j, -a);
    h.push_back(blk.c0);
    ++m;
    for (int k = 0; k < 2; ++k) {
      for (auto [j, a] : blk.a[k]) gt.emplace_back(m, j, -a);
      h.push_back(blk.a0[k]);
      ++m;
    }
    dims.push_back(3);
  }

  SpMat A(p, n), G(m, n);
  A.setFromTriplets(at.begin(), at.end());
  G.setFromTriplets(gt.begin(), gt.end());
  A.makeCompressed();
  G.makeCompressed();
  Vec c(n);
  for (int j = 0; j < n; ++j) c(j) = P.objective[j];
  Vec bv = Eigen::Map<Vec>(b.data(), p), hv = Eigen::Map<Vec>(h.data(), m);

  Ipm ipm(std::move(A), std::move(G), c, bv, hv, m_lp, dims, options);
  IpmResult r = ipm.run();
  sol.iterations = r.info.iter;

  switch (r.code) {
    case Exit::optimal:
    case Exit::close_to_optimal: sol.status = SolveStatus::optimal; break;
    case Exit::infeasible: sol.status = SolveStatus::infeasible; break;
    case Exit::unbounded: sol.status = SolveStatus::unbounded; break;
    default: sol.status = SolveStatus::numerical; break;
  }
  if (r.code == Exit::close_to_optimal) sol.message = "reduced accuracy";
  if (r.code == Exit::maxit) sol.message = "iteration limit";
  if (r.code == Exit::numerics) sol.message = "numerical difficulties";
  if (r.code == Exit::fatal) sol.message = "factorisation failed";
  if (r.code == Exit::infeasible) sol.message = "primal infeasibility certificate";
  if (r.code == Exit::unbounded) sol.message = "dual infeasibility certificate";
  if (r.x.size() != n) return sol;

  sol.primal.assign(r.x.data(), r.x.data() + n);
  sol.row_duals.resize(P.rows.size());
  for (size_t i = 0; i < P.rows.size(); ++i) {
    const auto& ref = L.row[i];
    sol.row_duals[i] = ref.kind == Layout::eq ? -r.y(ref.index) : r.z(ref.index);
  }
  sol.lo_duals.assign(n, 0.0);
  sol.hi_duals.assign(n, 0.0);
  for (int j = 0; j < n; ++j) {
    if (L.fix[j] >= 0) {
      double y = r.y(L.fix[j]);
      if (y > 0) sol.hi_duals[j] = y;
      else sol.lo_duals[j] = -y;
      continue;
    }
    if (L.lo[j] >= 0) sol.lo_duals[j] = r.z(L.lo[j]);
    if (L.hi[j] >= 0) sol.hi_duals[j] = r.z(L.hi[j]);
  }
  sol.soc_duals.resize(P.socs.size());
  for (size_t k = 0; k < P.socs.size(); ++k) {
    const int o = L.soc_offset + 3 * static_cast<int>(k);
    sol.soc_duals[k] = {r.z(o), -r.z(o + 1), -r.z(o + 2)};
  }
  sol.objective = P.evaluate_objective(sol.primal);

  if (sol.status == SolveStatus::optimal) {
    KktReport rep = verify_kkt(P, lo, hi, sol);
    sol.kkt = {rep.primal_feas, std::max(rep.stationarity, rep.dual_feas), rep.complementarity};
    if (options.verbose)
      std::fprintf(stderr, "kkt: stat %.2e pfeas %.2e dfeas %.2e comp %.2e\n", rep.stationarity,
                   rep.primal_feas, rep.dual_feas, rep.complementarity);
    if (r.code == Exit::close_to_optimal && !rep.ok(1e-6)) {
      sol.status = SolveStatus::numerical;
      sol.message = "reduced accuracy, KKT check failed";
    }
  }
  return sol;
}

}  // namespace freqclear
