#pragma once

#include <Eigen/Core>
#include <optional>
#include <utility>
#include <vector>

#include "fqr/funcspace.hpp"
#include "fqr/rho.hpp"

namespace fqr {

enum class PcaMethod { classical, spherical };

// Estimated center, ordered principal directions and the associated
// (robust) variance scales. Directions are quadrature-orthonormal; scales
// are non-negative and non-increasing.
struct PcaBasis {
  PcaBasis(Curve center, std::vector<Curve> directions, Eigen::VectorXd scales,
           PcaMethod method)
      : center(std::move(center)),
        directions(std::move(directions)),
        scales(std::move(scales)),
        method(method) {}

  Curve center;
  std::vector<Curve> directions;
  Eigen::VectorXd scales;
  PcaMethod method = PcaMethod::classical;
};

// Sample covariance kernel of the curves around the given center:
// k(s,t) = (1/n) sum_i (X_i - center)(s) (X_i - center)(t).
Surface sample_covariance(const std::vector<Curve>& sample, const Curve& center);

// Covariance kernel of the centered curves projected on the unit sphere.
// Curves that coincide with the center are dropped from the average; if all
// of them do the sample is degenerate. The quadrature-weighted trace of the
// result equals 1.
Surface sign_covariance(const std::vector<Curve>& sample, const Curve& center);

// Top-m eigenpairs of the quadrature-weighted operator induced by the
// symmetric kernel k. Eigenfunctions have unit quadrature norm and are
// sign-fixed so that the entry of largest magnitude is positive (earliest
// grid index on ties); eigenvalues are non-increasing.
std::pair<std::vector<Curve>, Eigen::VectorXd> eigen_directions(const Surface& k, int m);

// Squared bisquare M-scale (c0 = 1.54764, target 1/2, no dof correction) of
// a score vector; a resistant variance estimate.
double robust_scale_of_scores(const Eigen::VectorXd& scores);

// Smallest p whose leading scales explain at least `threshold` of the total.
int select_dimension(const Eigen::VectorXd& scales, double threshold);

// Classical basis: pointwise-mean center, sample covariance eigenpairs.
// Spherical basis: spatial-median center, sign covariance directions,
// scales re-estimated as robust score scales and directions re-sorted by
// descending scale. `center_override` fixes the center instead.
PcaBasis build_basis(const std::vector<Curve>& sample, PcaMethod method, int m,
                     const std::optional<Curve>& center_override = std::nullopt);

// Centered scores: entry (i,j) = <X_i - center, phi_j>.
Eigen::MatrixXd project_scores(const std::vector<Curve>& sample, const PcaBasis& basis,
                               int p);

}  // namespace fqr
