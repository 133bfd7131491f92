#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "fqr/errors.hpp"

namespace fqr {

// Discretization of [0,1]: ordered abscissae plus trapezoid quadrature
// weights. Grids are immutable and shared; every curve or surface in one
// analysis must reference the same grid.
class Grid {
 public:
  // m equally spaced points on [0,1] (endpoints included), composite
  // trapezoid weights.
  static std::shared_ptr<const Grid> uniform(std::size_t m);

  // Same points but the full spacing weight 1/(m-1) at every point, the
  // common sum-times-h Riemann convention. First-order at the endpoints;
  // kept for compatibility with discretizations that use it.
  static std::shared_ptr<const Grid> uniform_riemann(std::size_t m);

  // Arbitrary strictly increasing points in [0,1]; weights follow the
  // composite trapezoid rule.
  static std::shared_ptr<const Grid> from_points(std::vector<double> pts);

  const Eigen::VectorXd& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  Eigen::Index size() const { return points_.size(); }

  bool uniform_spacing() const { return uniform_; }
  // Spacing of a uniform grid; throws for non-uniform grids.
  double spacing() const;

 private:
  Grid(Eigen::VectorXd pts, Eigen::VectorXd w);

  Eigen::VectorXd points_;
  Eigen::VectorXd weights_;
  bool uniform_ = false;
};

using GridPtr = std::shared_ptr<const Grid>;

// True when the two handles denote the same discretization (same object or
// identical points and weights).
bool same_grid(const GridPtr& a, const GridPtr& b);
void require_same_grid(const GridPtr& a, const GridPtr& b, const char* what);

// A function sampled on a grid. Values must be finite.
struct Curve {
  Curve(GridPtr grid, Eigen::VectorXd values);

  GridPtr grid;
  Eigen::VectorXd values;
};

// A bivariate kernel sampled on grid x grid.
struct Surface {
  Surface(GridPtr grid, Eigen::MatrixXd values);

  GridPtr grid;
  Eigen::MatrixXd values;

  // Largest |k(s,t) - k(t,s)|.
  double asymmetry() const;
};

Curve operator+(const Curve& f, const Curve& g);
Curve operator-(const Curve& f, const Curve& g);
Curve operator*(double a, const Curve& f);

// Quadrature approximation of the L2(0,1) inner product.
double inner_product(const Curve& f, const Curve& g);
double norm(const Curve& f);

// Quadrature approximation of the bilinear form
// integral k(s,t) f(s) f(t) ds dt. Invariant under symmetrization of k.
double quadratic_form(const Surface& k, const Curve& f);

// First derivative on a uniform grid: central differences inside,
// second-order one-sided stencils at the endpoints. Exact for polynomials of
// degree <= 2.
Curve derivative(const Curve& f);

Curve zero_curve(const GridPtr& grid);
Surface zero_surface(const GridPtr& grid);

}  // namespace fqr
