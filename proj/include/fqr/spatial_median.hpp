#pragma once

#include <vector>

#include "fqr/funcspace.hpp"

namespace fqr {

// Sample spatial median: the curve minimizing sum_i (||X_i - theta|| - ||X_i||)
// in the quadrature L2 norm. Computed by Weiszfeld iteration with weights
// 1/||X_i - theta||, started at the pointwise sample median; terms whose
// distance to the iterate falls below a coincidence threshold are dropped for
// that step. Converged when ||sum_i (X_i - theta)/||X_i - theta|| || <= tol * n.
Curve spatial_median(const std::vector<Curve>& sample, double tol = 1e-8,
                     int max_iter = 500);

}  // namespace fqr
