#include "fqr/fit_io.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace fqr {

namespace {

// Linearly interpolated empirical quantile at index q*(n-1).
double quantile(std::vector<double> v, double q) {
  const std::size_t n = v.size();
  const double idx = q * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(idx));
  const auto hi = static_cast<std::size_t>(std::ceil(idx));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const double a = v[lo];
  if (hi == lo) return a;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(hi), v.end());
  return a + (v[hi] - a) * (idx - static_cast<double>(lo));
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::vector<int> residual_outliers(const Eigen::VectorXd& residuals) {
  std::vector<int> out;
  if (residuals.size() < 4) return out;
  const std::vector<double> r = to_std(residuals);
  const double q1 = quantile(r, 0.25);
  const double q3 = quantile(r, 0.75);
  const double iqr = q3 - q1;
  const double lo = q1 - 1.5 * iqr;
  const double hi = q3 + 1.5 * iqr;
  for (Eigen::Index i = 0; i < residuals.size(); ++i)
    if (residuals(i) < lo || residuals(i) > hi) out.push_back(static_cast<int>(i));
  return out;
}

std::string fit_to_json(const FitResult& fit, const AbscissaMap& map, int deriv_order,
                        std::uint64_t seed) {
  const CoefVector raw = from_centered(fit.coef, fit.basis, fit.p);

  nlohmann::json j;
  j["alpha"] = raw.a;
  j["sigma"] = fit.sigma;
  j["p"] = fit.p;
  j["method"] = fit.method == FitMethod::mm ? "mm" : "ls";
  j["b"] = to_std(raw.b);
  j["u"] = to_std(raw.u);

  Eigen::VectorXd mu_scores(fit.p);
  const Eigen::ArrayXd cw =
      fit.basis.center.grid->weights().array() * fit.basis.center.values.array();
  for (int k = 0; k < fit.p; ++k)
    mu_scores(k) = (cw * fit.basis.directions[static_cast<std::size_t>(k)].values.array()).sum();
  j["mu_scores"] = to_std(mu_scores);

  const std::vector<double> t = to_std(fit.beta.grid->points());
  j["beta"] = {{"t", t}, {"v", to_std(fit.beta_raw.values)}};
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < fit.upsilon.values.rows(); ++i)
    rows.push_back(to_std(fit.upsilon.values.row(i).transpose()));
  j["upsilon"] = {{"t", t}, {"rows", rows}};
  j["residuals"] = to_std(fit.residuals);
  j["weights"] = to_std(fit.weights);
  j["outliers"] = residual_outliers(fit.residuals);
  j["rescale"] = {{"t_min", map.t_min}, {"t_max", map.t_max}, {"scale", map.scale}};
  j["derivative"] = deriv_order;
  j["seed"] = seed;
  return j.dump(2);
}

LoadedFit fit_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  const std::vector<double> t = j.at("beta").at("t").get<std::vector<double>>();
  GridPtr grid = Grid::from_points(t);
  Curve beta(grid, from_std(j.at("beta").at("v").get<std::vector<double>>()));
  const auto rows = j.at("upsilon").at("rows");
  Eigen::MatrixXd up(grid->size(), grid->size());
  for (Eigen::Index i = 0; i < up.rows(); ++i) {
    const auto row = rows.at(static_cast<std::size_t>(i)).get<std::vector<double>>();
    up.row(i) = from_std(row).transpose();
  }
  LoadedFit fit(std::move(beta), Surface(grid, std::move(up)));
  fit.alpha = j.at("alpha").get<double>();
  fit.residuals = from_std(j.at("residuals").get<std::vector<double>>());
  return fit;
}

double predict_loaded(const LoadedFit& fit, const Curve& x) {
  return fit.alpha + inner_product(x, fit.beta) + quadratic_form(fit.upsilon, x);
}

}  // namespace fqr
