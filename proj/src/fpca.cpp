#include "fqr/fpca.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "fqr/spatial_median.hpp"

namespace fqr {

namespace {

void require_sample(const std::vector<Curve>& sample, const Curve& center) {
  if (sample.size() < 2) throw Error("need at least 2 curves");
  for (const Curve& x : sample)
    require_same_grid(center.grid, x.grid, "covariance accumulation");
}

}  // namespace

Surface sample_covariance(const std::vector<Curve>& sample, const Curve& center) {
  require_sample(sample, center);
  const Eigen::Index m = center.grid->size();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m, m);
  for (const Curve& x : sample) {
    const Eigen::VectorXd d = x.values - center.values;
    k.selfadjointView<Eigen::Lower>().rankUpdate(d, 1.0);
  }
  k = k.selfadjointView<Eigen::Lower>();
  k /= static_cast<double>(sample.size());
  return Surface(center.grid, std::move(k));
}

Surface sign_covariance(const std::vector<Curve>& sample, const Curve& center) {
  require_sample(sample, center);
  const Eigen::Index m = center.grid->size();
  const Eigen::VectorXd& w = center.grid->weights();
  const double center_norm = std::sqrt((w.array() * center.values.array().square()).sum());

  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m, m);
  Eigen::Index used = 0;
  for (const Curve& x : sample) {
    Eigen::VectorXd d = x.values - center.values;
    const double dn = std::sqrt((w.array() * d.array().square()).sum());
    if (dn < 1e-12 * (1.0 + center_norm)) continue;
    d /= dn;
    k.selfadjointView<Eigen::Lower>().rankUpdate(d, 1.0);
    ++used;
  }
  if (used == 0)
    throw DegenerateSampleError("sign_covariance: every curve coincides with the center");
  k = k.selfadjointView<Eigen::Lower>();
  k /= static_cast<double>(used);
  return Surface(center.grid, std::move(k));
}

std::pair<std::vector<Curve>, Eigen::VectorXd> eigen_directions(const Surface& k, int m) {
  const Eigen::Index gm = k.grid->size();
  if (m < 1 || m > gm) throw Error("eigen_directions: m out of range");
  const double scale = std::max(1.0, k.values.cwiseAbs().maxCoeff());
  if (k.asymmetry() > 1e-8 * scale)
    throw Error("eigen_directions: kernel is asymmetric beyond tolerance");

  // Discretize as W^{1/2} K W^{1/2}; this keeps the problem symmetric and the
  // back-mapped eigenvectors quadrature-orthonormal.
  const Eigen::VectorXd sw = k.grid->weights().array().sqrt().matrix();
  Eigen::MatrixXd sym = 0.5 * (k.values + k.values.transpose());
  Eigen::MatrixXd b = sw.asDiagonal() * sym * sw.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
  if (es.info() != Eigen::Success) throw Error("eigen_directions: eigendecomposition failed");

  std::vector<Curve> dirs;
  dirs.reserve(static_cast<std::size_t>(m));
  Eigen::VectorXd vals(m);
  for (int j = 0; j < m; ++j) {
    const Eigen::Index col = gm - 1 - j;  // solver sorts ascending
    vals(j) = es.eigenvalues()(col);
    Eigen::VectorXd phi = (es.eigenvectors().col(col).array() / sw.array()).matrix();
    Eigen::Index peak = 0;
    phi.cwiseAbs().maxCoeff(&peak);
    if (phi(peak) < 0.0) phi = -phi;
    dirs.emplace_back(k.grid, std::move(phi));
  }
  return {std::move(dirs), std::move(vals)};
}

double robust_scale_of_scores(const Eigen::VectorXd& scores) {
  if (scores.size() < 2) throw Error("robust_scale_of_scores: need at least 2 scores");
  RhoConfig cfg;
  const double s = m_scale(scores, cfg, 0);
  return s * s;
}

int select_dimension(const Eigen::VectorXd& scales, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw Error("select_dimension: threshold must lie in (0,1]");
  if (scales.size() == 0) throw Error("select_dimension: empty scales");
  double total = 0.0;
  for (Eigen::Index j = 0; j < scales.size(); ++j) {
    if (scales(j) < 0.0) throw Error("select_dimension: scales must be non-negative");
    total += scales(j);
  }
  if (total <= 0.0) throw DegenerateSampleError("select_dimension: all scales are zero");
  double cum = 0.0;
  for (Eigen::Index j = 0; j < scales.size(); ++j) {
    cum += scales(j);
    if (cum / total >= threshold) return static_cast<int>(j) + 1;
  }
  return static_cast<int>(scales.size());
}

PcaBasis build_basis(const std::vector<Curve>& sample, PcaMethod method, int m,
                     const std::optional<Curve>& center_override) {
  if (sample.size() < 2) throw Error("build_basis: need at least 2 curves");
  const GridPtr grid = sample.front().grid;

  if (method == PcaMethod::classical) {
    Curve center = [&]() {
      if (center_override) return *center_override;
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(grid->size());
      for (const Curve& x : sample) mean += x.values;
      mean /= static_cast<double>(sample.size());
      return Curve(grid, std::move(mean));
    }();
    const double center_norm = norm(center);
    bool varied = false;
    for (const Curve& x : sample)
      varied = varied || norm(x - center) >= 1e-12 * (1.0 + center_norm);
    if (!varied)
      throw DegenerateSampleError("build_basis: sample carries no variation");
    Surface cov = sample_covariance(sample, center);
    auto [dirs, vals] = eigen_directions(cov, m);
    return PcaBasis(std::move(center), std::move(dirs), vals.cwiseMax(0.0),
                    PcaMethod::classical);
  }

  Curve center = center_override ? *center_override : spatial_median(sample);
  Surface cov = sign_covariance(sample, center);
  auto [dirs, vals] = eigen_directions(cov, m);

  // Sign-operator eigenvalues are shrunk and may nearly tie; re-estimate each
  // scale as the robust scale of the projected data and re-sort.
  const Eigen::Index n = static_cast<Eigen::Index>(sample.size());
  Eigen::VectorXd robust(m);
  for (int j = 0; j < m; ++j) {
    Eigen::VectorXd scores(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      scores(i) = (grid->weights().array() *
                   (sample[static_cast<std::size_t>(i)].values - center.values).array() *
                   dirs[static_cast<std::size_t>(j)].values.array())
                      .sum();
    }
    robust(j) = robust_scale_of_scores(scores);
  }

  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return robust(a) > robust(b); });

  std::vector<Curve> sorted;
  sorted.reserve(static_cast<std::size_t>(m));
  Eigen::VectorXd scales(m);
  for (int j = 0; j < m; ++j) {
    sorted.push_back(std::move(dirs[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])]));
    scales(j) = robust(order[static_cast<std::size_t>(j)]);
  }
  if (!(scales.maxCoeff() > 0.0))
    throw DegenerateSampleError("build_basis: sample carries no variation");
  return PcaBasis(std::move(center), std::move(sorted), std::move(scales),
                  PcaMethod::spherical);
}

Eigen::MatrixXd project_scores(const std::vector<Curve>& sample, const PcaBasis& basis,
                               int p) {
  if (p < 1 || p > static_cast<int>(basis.directions.size()))
    throw Error("project_scores: p out of range");
  const GridPtr grid = basis.center.grid;
  const Eigen::Index n = static_cast<Eigen::Index>(sample.size());
  Eigen::MatrixXd scores(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    require_same_grid(grid, sample[static_cast<std::size_t>(i)].grid, "project_scores");
    const Eigen::ArrayXd centered =
        (sample[static_cast<std::size_t>(i)].values - basis.center.values).array() *
        grid->weights().array();
    for (int j = 0; j < p; ++j)
      scores(i, j) = (centered * basis.directions[static_cast<std::size_t>(j)].values.array()).sum();
  }
  return scores;
}

}  // namespace fqr
