#include "fqr/spatial_median.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace fqr {

namespace {

Eigen::VectorXd pointwise_median(const std::vector<Curve>& sample) {
  const Eigen::Index m = sample.front().grid->size();
  const std::size_t n = sample.size();
  Eigen::VectorXd med(m);
  std::vector<double> col(n);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = sample[i].values(j);
    const std::size_t mid = n / 2;
    std::nth_element(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(mid), col.end());
    double v = col[mid];
    if (n % 2 == 0)
      v = 0.5 * (v + *std::max_element(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(mid)));
    med(j) = v;
  }
  return med;
}

}  // namespace

Curve spatial_median(const std::vector<Curve>& sample, double tol, int max_iter) {
  if (sample.empty()) throw Error("spatial_median: empty sample");
  if (!(tol > 0.0)) throw Error("spatial_median: tolerance must be positive");
  const GridPtr grid = sample.front().grid;
  for (const Curve& x : sample) require_same_grid(grid, x.grid, "spatial_median");
  const std::size_t n = sample.size();
  if (n == 1) return sample.front();

  const Eigen::VectorXd& w = grid->weights();
  auto qnorm = [&](const Eigen::VectorXd& v) {
    const double s = (w.array() * v.array().square()).sum();
    return s > 0.0 ? std::sqrt(s) : 0.0;
  };

  std::vector<double> sample_norm(n);
  for (std::size_t i = 0; i < n; ++i) sample_norm[i] = qnorm(sample[i].values);

  Eigen::VectorXd theta = pointwise_median(sample);
  double grad_norm = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(grid->size());
    Eigen::VectorXd step = Eigen::VectorXd::Zero(grid->size());
    double wsum = 0.0;
    double coincident = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::VectorXd diff = sample[i].values - theta;
      const double d = qnorm(diff);
      if (d < 1e-12 * (1.0 + sample_norm[i])) {
        coincident += 1.0;  // dropped from the weighted step this iteration
        continue;
      }
      grad += diff / d;
      step += sample[i].values / d;
      wsum += 1.0 / d;
    }
    grad_norm = qnorm(grad);
    if (grad_norm <= tol * static_cast<double>(n)) return Curve(grid, theta);
    // Subgradient condition at a point carrying sample mass: optimal once the
    // pull of the non-coincident curves is at most the coincident count.
    if (coincident > 0.0 && grad_norm <= coincident) return Curve(grid, theta);
    if (wsum == 0.0) return Curve(grid, theta);  // every point coincides
    const Eigen::VectorXd target = step / wsum;
    if (coincident == 0.0) {
      theta = target;
    } else {
      const double pull = std::min(1.0, coincident / grad_norm);
      theta = (1.0 - pull) * target + pull * theta;
    }
  }
  throw ConvergenceError(
      "spatial_median did not converge",
      std::vector<double>(theta.data(), theta.data() + theta.size()), grad_norm,
      max_iter);
}

}  // namespace fqr
