#pragma once

#include <string>
#include <vector>

#include "fqr/regression.hpp"

namespace fqr {

// Box-plot fences on the residuals: indices falling outside
// [Q1 - 1.5 IQR, Q3 + 1.5 IQR] with linearly interpolated quartiles.
std::vector<int> residual_outliers(const Eigen::VectorXd& residuals);

// Affine map between the file abscissae and the unit interval; recorded in
// the fit JSON so coefficient curves can be mapped back.
struct AbscissaMap {
  double t_min = 0.0;
  double t_max = 1.0;
  double scale = 1.0;
};

// Serializes a fit to JSON. The intercept, slope coordinates and slope curve
// are stored in the raw parametrization (inner products with the curves
// themselves), which makes the file self-contained for prediction; the
// center scores allow conversion to the centered coordinates.
std::string fit_to_json(const FitResult& fit, const AbscissaMap& map, int deriv_order,
                        std::uint64_t seed);

// Minimal reload of a fit JSON for offline prediction.
struct LoadedFit {
  double alpha = 0.0;  // raw intercept
  Curve beta;          // raw slope curve
  Surface upsilon;
  Eigen::VectorXd residuals;

  LoadedFit(Curve beta_, Surface up_) : beta(std::move(beta_)), upsilon(std::move(up_)) {}
};

LoadedFit fit_from_json(const std::string& text);

// alpha + <x, beta> + <x, Upsilon x>; identical to the in-memory centered
// prediction by the residual identity of the two parametrizations.
double predict_loaded(const LoadedFit& fit, const Curve& x);

}  // namespace fqr
