#include "fqr/regression.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace fqr {

int vech_index(int j, int l, int p) {
  if (l > j) std::swap(j, l);
  return l * p - l * (l - 1) / 2 + (j - l);
}

Design build_design(const Eigen::MatrixXd& scores, bool centered) {
  const Eigen::Index n = scores.rows();
  const int p = static_cast<int>(scores.cols());
  if (p < 1) throw Error("build_design: need at least one score column");
  const int q = p * (p + 1) / 2;

  Design d;
  d.x = scores;
  d.z.resize(n, q);
  for (int l = 0; l < p; ++l)
    for (int j = l; j < p; ++j)
      d.z.col(vech_index(j, l, p)) = scores.col(j).cwiseProduct(scores.col(l));
  d.full.resize(n, 1 + p + q);
  d.full.col(0) = Eigen::VectorXd::Ones(n);
  d.full.middleCols(1, p) = d.x;
  d.full.rightCols(q) = d.z;
  d.centered = centered;
  d.n = n;
  d.p = p;
  d.q = q;
  return d;
}

Eigen::VectorXd stack_coef(const CoefVector& c) {
  Eigen::VectorXd theta(1 + c.b.size() + c.u.size());
  theta(0) = c.a;
  theta.segment(1, c.b.size()) = c.b;
  theta.tail(c.u.size()) = c.u;
  return theta;
}

CoefVector unstack_coef(const Eigen::VectorXd& theta, int p, int q) {
  if (theta.size() != 1 + p + q) throw Error("unstack_coef: length mismatch");
  CoefVector c;
  c.a = theta(0);
  c.b = theta.segment(1, p);
  c.u = theta.tail(q);
  return c;
}

Eigen::VectorXd residuals_for(const Design& d, const Eigen::VectorXd& y,
                              const CoefVector& coef) {
  if (y.size() != d.n) throw Error("residuals_for: response length mismatch");
  return y - d.full * stack_coef(coef);
}

namespace {

// Weighted least squares via the normal equations; std::nullopt when the
// weighted design is numerically rank deficient.
std::optional<Eigen::VectorXd> wls_solve(const Eigen::MatrixXd& A,
                                         const Eigen::VectorXd& y,
                                         const Eigen::VectorXd& w) {
  Eigen::MatrixXd atw = A.transpose() * w.asDiagonal();
  Eigen::MatrixXd g = atw * A;
  Eigen::VectorXd rhs = atw * y;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
  if (ldlt.info() != Eigen::Success) return std::nullopt;
  const Eigen::VectorXd dvec = ldlt.vectorD();
  const double dmax = dvec.maxCoeff();
  if (!(dmax > 0.0) || dvec.minCoeff() < 1e-13 * dmax) return std::nullopt;
  Eigen::VectorXd sol = ldlt.solve(rhs);
  if (!sol.allFinite()) return std::nullopt;
  return sol;
}

double median_abs_residual(const Eigen::VectorXd& r) {
  std::vector<double> a(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) a[static_cast<std::size_t>(i)] = std::abs(r(i));
  const std::size_t mid = a.size() / 2;
  std::nth_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(mid), a.end());
  double med = a[mid];
  if (a.size() % 2 == 0)
    med = 0.5 * (med + *std::max_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(mid)));
  return med;
}

// Scale- and translation-safe size of a coefficient update: the intercept
// participates in the numerator only, so shifting the response does not alter
// the stopping decision.
double update_size(const Eigen::VectorXd& delta) { return delta.cwiseAbs().maxCoeff(); }

double coef_magnitude(const Eigen::VectorXd& theta, double sigma) {
  double mag = sigma;
  for (Eigen::Index j = 1; j < theta.size(); ++j) mag = std::max(mag, std::abs(theta(j)));
  return std::max(mag, 1e-300);
}

struct SCandidate {
  Eigen::VectorXd theta;
  double scale = std::numeric_limits<double>::infinity();
  int index = 0;
};

// One fast-S improvement step: update the scale by a single fixed-point move,
// then take a reweighted least-squares step with rho0 weights.
bool s_improve_step(const Eigen::MatrixXd& A, const Eigen::VectorXd& y,
                    const RhoConfig& cfg, Eigen::Index dof, Eigen::VectorXd& theta,
                    Eigen::VectorXd& r, double& s) {
  const Eigen::Index n = y.size();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) acc += rho(r(i) / s, cfg.c0);
  s *= std::sqrt(acc / (static_cast<double>(n - dof) * cfg.b));
  if (!(s > 0.0) || !std::isfinite(s)) return false;
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = rho_weight(r(i) / s, cfg.c0);
  auto sol = wls_solve(A, y, w);
  if (!sol) return false;
  theta = *sol;
  r = y - A * theta;
  return true;
}

}  // namespace

std::pair<CoefVector, double> ls_fit(const Design& d, const Eigen::VectorXd& y) {
  if (y.size() != d.n) throw Error("ls_fit: response length mismatch");
  const Eigen::Index h = d.full.cols();
  if (d.n < h) throw SingularDesignError("ls_fit: fewer observations than parameters");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.full);
  if (qr.rank() < h) throw SingularDesignError("ls_fit: design is rank deficient");
  Eigen::VectorXd theta = qr.solve(y);
  const double ssr = (y - d.full * theta).squaredNorm();
  const Eigen::Index dof = d.n - h;
  const double sigma = dof > 0 ? std::sqrt(ssr / static_cast<double>(dof)) : 0.0;
  return {unstack_coef(theta, d.p, d.q), sigma};
}

std::pair<CoefVector, double> s_estimate(const Design& d, const Eigen::VectorXd& y,
                                         const RhoConfig& cfg, int n_sub,
                                         std::uint64_t seed) {
  cfg.validate();
  if (y.size() != d.n) throw Error("s_estimate: response length mismatch");
  const int h = 1 + d.p + d.q;
  const Eigen::Index n = d.n;
  if (n <= h) throw Error("s_estimate: sample too small for the requested dimension");
  if (n_sub < 1) throw Error("s_estimate: need at least one subsample");
  const Eigen::Index dof = d.p + d.q;

  std::mt19937_64 rng(seed);
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);

  std::vector<SCandidate> candidates;
  candidates.reserve(static_cast<std::size_t>(n_sub) + 1);

  Eigen::MatrixXd sub_a(h, h);
  Eigen::VectorXd sub_y(h);
  for (int c = 0; c < n_sub; ++c) {
    // Partial Fisher-Yates draw of h distinct rows.
    for (int k = 0; k < h; ++k) {
      std::uniform_int_distribution<int> pick(k, static_cast<int>(n) - 1);
      std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(pick(rng))]);
      sub_a.row(k) = d.full.row(pool[static_cast<std::size_t>(k)]);
      sub_y(k) = y(pool[static_cast<std::size_t>(k)]);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub_a);
    if (qr.rank() < h) continue;
    SCandidate cand;
    cand.index = c;
    cand.theta = qr.solve(sub_y);
    if (!cand.theta.allFinite()) continue;

    Eigen::VectorXd r = y - d.full * cand.theta;
    double s = median_abs_residual(r) / 0.6745;
    if (s > 0.0) {
      for (int step = 0; step < 2; ++step)
        if (!s_improve_step(d.full, y, cfg, dof, cand.theta, r, s)) break;
    }
    cand.scale = m_scale(r, cfg, dof);
    candidates.push_back(std::move(cand));
  }

  try {
    auto [ls_coef, ls_sigma] = ls_fit(d, y);
    (void)ls_sigma;
    SCandidate cand;
    cand.index = n_sub;
    cand.theta = stack_coef(ls_coef);
    cand.scale = m_scale(y - d.full * cand.theta, cfg, dof);
    candidates.push_back(std::move(cand));
  } catch (const SingularDesignError&) {
    // fall through; elemental candidates may still exist
  }

  if (candidates.empty())
    throw SingularDesignError("s_estimate: no subsample produced a full-rank fit");

  auto better = [](const SCandidate& a, const SCandidate& b) {
    return a.scale < b.scale || (a.scale == b.scale && a.index < b.index);
  };
  const std::size_t keep = std::min<std::size_t>(5, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                    candidates.end(), better);
  candidates.resize(keep);

  // Refine the shortlist to full convergence.
  for (SCandidate& cand : candidates) {
    if (!(cand.scale > 0.0)) continue;
    Eigen::VectorXd theta = cand.theta;
    Eigen::VectorXd r = y - d.full * theta;
    double s = cand.scale;
    for (int it = 0; it < 50; ++it) {
      Eigen::VectorXd prev = theta;
      if (!s_improve_step(d.full, y, cfg, dof, theta, r, s)) break;
      if (update_size(theta - prev) <= 1e-7 * coef_magnitude(theta, s)) break;
    }
    const double refined = m_scale(y - d.full * theta, cfg, dof);
    if (refined < cand.scale) {
      cand.scale = refined;
      cand.theta = std::move(theta);
    }
  }

  const SCandidate& best = *std::min_element(candidates.begin(), candidates.end(), better);
  double sigma = best.scale;
  if (sigma <= 1e-12 * (1.0 + y.cwiseAbs().maxCoeff())) sigma = 0.0;  // exact fit
  return {unstack_coef(best.theta, d.p, d.q), sigma};
}

CoefVector mm_fit(const Design& d, const Eigen::VectorXd& y, double sigma,
                  const CoefVector& init, const RhoConfig& cfg) {
  cfg.validate();
  if (!(sigma > 0.0)) throw Error("mm_fit: scale must be positive");
  if (y.size() != d.n) throw Error("mm_fit: response length mismatch");
  const Eigen::Index n = d.n;

  auto loss = [&](const Eigen::VectorXd& r) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) acc += rho(r(i) / sigma, cfg.c1);
    return acc;
  };

  Eigen::VectorXd theta = stack_coef(init);
  Eigen::VectorXd r = y - d.full * theta;
  if (r.cwiseAbs().maxCoeff() == 0.0) return init;  // already interpolates
  double cur_loss = loss(r);

  const int max_iter = 500;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w(i) = rho_weight(r(i) / sigma, cfg.c1);
    auto sol = wls_solve(d.full, y, w);
    if (!sol) throw SingularDesignError("mm_fit: weighted normal equations are singular");

    // IRLS with a non-increasing weight function descends the loss; guard the
    // step anyway so the returned loss never exceeds the initial one.
    Eigen::VectorXd cand = *sol;
    Eigen::VectorXd r_cand = y - d.full * cand;
    double cand_loss = loss(r_cand);
    int halvings = 0;
    while (cand_loss > cur_loss && halvings < 30) {
      cand = 0.5 * (cand + theta);
      r_cand = y - d.full * cand;
      cand_loss = loss(r_cand);
      ++halvings;
    }
    if (cand_loss > cur_loss) return unstack_coef(theta, d.p, d.q);

    const double step = update_size(cand - theta);
    theta = std::move(cand);
    r = std::move(r_cand);
    cur_loss = cand_loss;
    if (step <= 1e-7 * coef_magnitude(theta, sigma)) return unstack_coef(theta, d.p, d.q);
  }
  throw ConvergenceError("mm_fit did not converge",
                         std::vector<double>(theta.data(), theta.data() + theta.size()),
                         cur_loss, max_iter);
}

std::pair<Curve, Surface> assemble(const CoefVector& coef, const PcaBasis& basis, int p) {
  if (p < 1 || p > static_cast<int>(basis.directions.size()))
    throw Error("assemble: p out of range");
  if (coef.b.size() != p || coef.u.size() != p * (p + 1) / 2)
    throw Error("assemble: coefficient lengths inconsistent with p");
  const GridPtr grid = basis.center.grid;
  const Eigen::Index m = grid->size();

  Eigen::MatrixXd dirs(m, p);
  for (int j = 0; j < p; ++j) dirs.col(j) = basis.directions[static_cast<std::size_t>(j)].values;

  Eigen::MatrixXd v(p, p);
  for (int l = 0; l < p; ++l)
    for (int j = l; j < p; ++j) {
      const double u = coef.u(vech_index(j, l, p));
      v(j, l) = v(l, j) = (j == l) ? u : 0.5 * u;
    }

  Curve beta(grid, dirs * coef.b);
  Surface upsilon(grid, dirs * v * dirs.transpose());
  return {std::move(beta), std::move(upsilon)};
}

namespace {

Eigen::VectorXd center_scores(const PcaBasis& basis, int p) {
  Eigen::VectorXd mu(p);
  const Eigen::ArrayXd cw = basis.center.grid->weights().array() * basis.center.values.array();
  for (int j = 0; j < p; ++j)
    mu(j) = (cw * basis.directions[static_cast<std::size_t>(j)].values.array()).sum();
  return mu;
}

Eigen::MatrixXd sym_from_u(const Eigen::VectorXd& u, int p) {
  Eigen::MatrixXd v(p, p);
  for (int l = 0; l < p; ++l)
    for (int j = l; j < p; ++j) {
      const double ujl = u(vech_index(j, l, p));
      v(j, l) = v(l, j) = (j == l) ? ujl : 0.5 * ujl;
    }
  return v;
}

}  // namespace

CoefVector to_centered(const CoefVector& coef, const PcaBasis& basis, int p) {
  if (coef.b.size() != p || coef.u.size() != p * (p + 1) / 2)
    throw Error("to_centered: coefficient lengths inconsistent with p");
  const Eigen::VectorXd mu = center_scores(basis, p);
  const Eigen::MatrixXd v = sym_from_u(coef.u, p);
  CoefVector out;
  out.a = coef.a + coef.b.dot(mu) + mu.dot(v * mu);
  out.b = coef.b + 2.0 * (v * mu);
  out.u = coef.u;
  return out;
}

CoefVector from_centered(const CoefVector& coef, const PcaBasis& basis, int p) {
  if (coef.b.size() != p || coef.u.size() != p * (p + 1) / 2)
    throw Error("from_centered: coefficient lengths inconsistent with p");
  const Eigen::VectorXd mu = center_scores(basis, p);
  const Eigen::MatrixXd v = sym_from_u(coef.u, p);
  CoefVector out;
  out.b = coef.b - 2.0 * (v * mu);
  out.a = coef.a - out.b.dot(mu) - mu.dot(v * mu);
  out.u = coef.u;
  return out;
}

FitResult fit(const std::vector<Curve>& sample, const Eigen::VectorXd& y,
              const FitOptions& opt) {
  const Eigen::Index n = static_cast<Eigen::Index>(sample.size());
  if (n != y.size()) throw Error("fit: sample and response sizes differ");
  if (n < 2) throw Error("fit: need at least 2 observations");
  opt.cfg.validate();

  const GridPtr grid = sample.front().grid;
  const int m_pool = static_cast<int>(std::min<Eigen::Index>(grid->size(), n - 1));
  const PcaMethod pca =
      opt.method == FitMethod::mm ? PcaMethod::spherical : PcaMethod::classical;
  PcaBasis basis = build_basis(sample, pca, m_pool);

  int p = opt.p ? *opt.p : select_dimension(basis.scales, opt.var_threshold);
  if (p < 1 || p > m_pool) throw Error("fit: requested dimension out of range");
  const int q = p * (p + 1) / 2;
  if (n <= 1 + p + q) throw Error("fit: selected dimension too large for the sample size");

  Eigen::MatrixXd scores = project_scores(sample, basis, p);
  Design design = build_design(scores, true);

  CoefVector coef, scoef;
  double sigma = 0.0;
  if (opt.method == FitMethod::mm) {
    std::tie(scoef, sigma) = s_estimate(design, y, opt.cfg, opt.n_sub, opt.seed);
    coef = sigma > 0.0 ? mm_fit(design, y, sigma, scoef, opt.cfg) : scoef;
  } else {
    std::tie(coef, sigma) = ls_fit(design, y);
    scoef = coef;
  }

  auto [beta, upsilon] = assemble(coef, basis, p);
  CoefVector raw = from_centered(coef, basis, p);
  auto [beta_raw, upsilon_raw] = assemble(raw, basis, p);
  (void)upsilon_raw;  // identical to upsilon

  FitResult out(std::move(beta), std::move(upsilon), std::move(basis), std::move(beta_raw));
  out.alpha = coef.a;
  out.sigma = sigma;
  out.coef = coef;
  out.p = p;
  out.scores = std::move(scores);
  out.residuals = residuals_for(design, y, coef);
  out.method = opt.method;
  out.scoef = scoef;
  out.alpha_raw = raw.a;

  out.weights.resize(n);
  if (opt.method == FitMethod::mm && sigma > 0.0) {
    for (Eigen::Index i = 0; i < n; ++i)
      out.weights(i) = rho_weight(out.residuals(i) / sigma, opt.cfg.c1);
  } else {
    out.weights.setOnes();
  }
  return out;
}

double predict(const FitResult& fit, const Curve& x) {
  require_same_grid(fit.beta.grid, x.grid, "predict");
  Curve centered = x - fit.basis.center;
  return fit.alpha + inner_product(centered, fit.beta) +
         quadratic_form(fit.upsilon, centered);
}

}  // namespace fqr
