#include "fqr/funcspace.hpp"

#include <cmath>
#include <utility>

namespace fqr {

namespace {

Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& pts) {
  const Eigen::Index m = pts.size();
  Eigen::VectorXd w(m);
  w(0) = 0.5 * (pts(1) - pts(0));
  for (Eigen::Index i = 1; i + 1 < m; ++i) w(i) = 0.5 * (pts(i + 1) - pts(i - 1));
  w(m - 1) = 0.5 * (pts(m - 1) - pts(m - 2));
  return w;
}

bool spacing_is_uniform(const Eigen::VectorXd& pts) {
  const Eigen::Index m = pts.size();
  const double h = (pts(m - 1) - pts(0)) / static_cast<double>(m - 1);
  for (Eigen::Index i = 1; i < m; ++i) {
    // Loose enough to absorb rescaling/parsing roundoff, far below any
    // genuinely irregular spacing.
    if (std::abs(pts(i) - pts(i - 1) - h) > 1e-6 * h) return false;
  }
  return true;
}

}  // namespace

Grid::Grid(Eigen::VectorXd pts, Eigen::VectorXd w)
    : points_(std::move(pts)), weights_(std::move(w)) {
  if (points_.size() < 2) throw Error("grid needs at least 2 points");
  if (points_.size() != weights_.size())
    throw Error("grid points/weights length mismatch");
  for (Eigen::Index i = 0; i < points_.size(); ++i) {
    if (!std::isfinite(points_(i)) || points_(i) < 0.0 || points_(i) > 1.0)
      throw Error("grid points must lie in [0,1]");
    if (i > 0 && points_(i) <= points_(i - 1))
      throw Error("grid points must be strictly increasing");
    if (!(weights_(i) > 0.0)) throw Error("grid weights must be positive");
  }
  uniform_ = spacing_is_uniform(points_);
}

std::shared_ptr<const Grid> Grid::uniform(std::size_t m) {
  if (m < 2) throw Error("grid needs at least 2 points");
  Eigen::VectorXd pts = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(m), 0.0, 1.0);
  return std::shared_ptr<const Grid>(new Grid(pts, trapezoid_weights(pts)));
}

std::shared_ptr<const Grid> Grid::uniform_riemann(std::size_t m) {
  if (m < 2) throw Error("grid needs at least 2 points");
  Eigen::VectorXd pts = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(m), 0.0, 1.0);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m),
                                                1.0 / static_cast<double>(m - 1));
  return std::shared_ptr<const Grid>(new Grid(pts, std::move(w)));
}

std::shared_ptr<const Grid> Grid::from_points(std::vector<double> pts) {
  Eigen::VectorXd p = Eigen::Map<Eigen::VectorXd>(pts.data(), static_cast<Eigen::Index>(pts.size()));
  return std::shared_ptr<const Grid>(new Grid(p, trapezoid_weights(p)));
}

double Grid::spacing() const {
  if (!uniform_) throw UnsupportedGridError("grid is not uniformly spaced");
  return (points_(points_.size() - 1) - points_(0)) / static_cast<double>(points_.size() - 1);
}

bool same_grid(const GridPtr& a, const GridPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return a->points() == b->points() && a->weights() == b->weights();
}

void require_same_grid(const GridPtr& a, const GridPtr& b, const char* what) {
  if (!same_grid(a, b))
    throw GridMismatchError(std::string(what) + ": inputs live on different grids");
}

Curve::Curve(GridPtr g, Eigen::VectorXd v) : grid(std::move(g)), values(std::move(v)) {
  if (!grid) throw Error("curve has no grid");
  if (values.size() != grid->size()) throw Error("curve length does not match grid");
  if (!values.allFinite()) throw Error("curve values must be finite");
}

Surface::Surface(GridPtr g, Eigen::MatrixXd v) : grid(std::move(g)), values(std::move(v)) {
  if (!grid) throw Error("surface has no grid");
  if (values.rows() != grid->size() || values.cols() != grid->size())
    throw Error("surface dimensions do not match grid");
  if (!values.allFinite()) throw Error("surface values must be finite");
}

double Surface::asymmetry() const {
  return (values - values.transpose()).cwiseAbs().maxCoeff();
}

Curve operator+(const Curve& f, const Curve& g) {
  require_same_grid(f.grid, g.grid, "curve addition");
  return Curve(f.grid, f.values + g.values);
}

Curve operator-(const Curve& f, const Curve& g) {
  require_same_grid(f.grid, g.grid, "curve subtraction");
  return Curve(f.grid, f.values - g.values);
}

Curve operator*(double a, const Curve& f) { return Curve(f.grid, a * f.values); }

double inner_product(const Curve& f, const Curve& g) {
  require_same_grid(f.grid, g.grid, "inner_product");
  return (f.grid->weights().array() * f.values.array() * g.values.array()).sum();
}

double norm(const Curve& f) {
  double ip = inner_product(f, f);
  return ip > 0.0 ? std::sqrt(ip) : 0.0;
}

double quadratic_form(const Surface& k, const Curve& f) {
  require_same_grid(k.grid, f.grid, "quadratic_form");
  Eigen::VectorXd fw = (f.grid->weights().array() * f.values.array()).matrix();
  return fw.dot(k.values * fw);
}

Curve derivative(const Curve& f) {
  const Eigen::Index m = f.grid->size();
  if (m < 3) throw UnsupportedGridError("derivative needs at least 3 grid points");
  const double h = f.grid->spacing();
  const Eigen::VectorXd& v = f.values;
  Eigen::VectorXd d(m);
  d(0) = (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h);
  for (Eigen::Index i = 1; i + 1 < m; ++i) d(i) = (v(i + 1) - v(i - 1)) / (2.0 * h);
  d(m - 1) = (3.0 * v(m - 1) - 4.0 * v(m - 2) + v(m - 3)) / (2.0 * h);
  return Curve(f.grid, std::move(d));
}

Curve zero_curve(const GridPtr& grid) {
  return Curve(grid, Eigen::VectorXd::Zero(grid->size()));
}

Surface zero_surface(const GridPtr& grid) {
  return Surface(grid, Eigen::MatrixXd::Zero(grid->size(), grid->size()));
}

}  // namespace fqr
