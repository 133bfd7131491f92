#include "fqr/rho.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace fqr {

void RhoConfig::validate() const {
  if (!(c0 > 0.0) || !(c1 > 0.0)) throw Error("rho tuning constants must be positive");
  if (!(c1 > c0)) throw Error("c1 must exceed c0 so the regression loss is the milder one");
  if (!(b > 0.0 && b < 1.0)) throw Error("scale target b must lie in (0,1)");
}

double rho(double t, double c) {
  const double u = t / c;
  if (std::abs(u) >= 1.0) return 1.0;
  const double q = 1.0 - u * u;
  return 1.0 - q * q * q;
}

double psi(double t, double c) {
  const double u = t / c;
  if (std::abs(u) >= 1.0) return 0.0;
  const double q = 1.0 - u * u;
  return 6.0 * t * q * q / (c * c);
}

double rho_weight(double t, double c) {
  const double u = t / c;
  if (std::abs(u) >= 1.0) return 0.0;
  const double q = 1.0 - u * u;
  return q * q;
}

namespace {

double median_abs(const Eigen::VectorXd& r) {
  std::vector<double> a(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) a[static_cast<std::size_t>(i)] = std::abs(r(i));
  const std::size_t n = a.size();
  const std::size_t mid = n / 2;
  std::nth_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(mid), a.end());
  double med = a[mid];
  if (n % 2 == 0) {
    med = 0.5 * (med + *std::max_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return med;
}

}  // namespace

double m_scale(const Eigen::VectorXd& r, const RhoConfig& cfg, Eigen::Index dof) {
  cfg.validate();
  const Eigen::Index n = r.size();
  if (n <= dof || dof < 0) throw Error("m_scale: need more residuals than degrees of freedom");
  if (!r.allFinite()) throw Error("m_scale: residuals must be finite");

  const double denom = static_cast<double>(n - dof);
  Eigen::Index nonzero = 0;
  for (Eigen::Index i = 0; i < n; ++i) nonzero += (r(i) != 0.0);
  // A positive solution exists iff lim_{s->0} avg rho(r/s) = nonzero/denom > b.
  if (static_cast<double>(nonzero) <= denom * cfg.b) return 0.0;

  double s = median_abs(r) / 0.6745;
  if (s == 0.0) {
    // More than half of the residuals vanish but a solution still exists
    // (dof-corrected target); restart from the mean absolute residual.
    s = r.cwiseAbs().sum() / static_cast<double>(nonzero);
  }

  for (int it = 0; it < 200; ++it) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) acc += rho(r(i) / s, cfg.c0);
    const double ratio = acc / (denom * cfg.b);
    const double s_next = s * std::sqrt(ratio);
    if (std::abs(s_next - s) <= 1e-10 * s) return s_next;
    s = s_next;
  }
  return s;
}

}  // namespace fqr
