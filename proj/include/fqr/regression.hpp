#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "fqr/fpca.hpp"
#include "fqr/funcspace.hpp"
#include "fqr/rho.hpp"

namespace fqr {

// Position of the product x_j * x_l (0-based, j >= l) inside the
// half-vectorization that stacks the lower-triangular columns.
int vech_index(int j, int l, int p);

// Regression design built from principal-component scores: an implicit
// intercept, the p score columns and the q = p(p+1)/2 pairwise products.
struct Design {
  Eigen::MatrixXd x;     // n x p scores
  Eigen::MatrixXd z;     // n x q vech products
  Eigen::MatrixXd full;  // n x (1+p+q), first column constant 1
  bool centered = false;
  Eigen::Index n = 0;
  int p = 0;
  int q = 0;
};

Design build_design(const Eigen::MatrixXd& scores, bool centered);

// Intercept a, slope coordinates b (length p) and quadratic coordinates u
// (length q, off-diagonal entries doubled: u_jl = (2 - 1{j=l}) v_jl).
struct CoefVector {
  double a = 0.0;
  Eigen::VectorXd b;
  Eigen::VectorXd u;
};

Eigen::VectorXd stack_coef(const CoefVector& c);
CoefVector unstack_coef(const Eigen::VectorXd& theta, int p, int q);

Eigen::VectorXd residuals_for(const Design& d, const Eigen::VectorXd& y,
                              const CoefVector& coef);

// S-estimator: minimizes the M-scale of the residuals (dof = p+q) over
// n_sub refined elemental candidates plus the least-squares fit.
// Deterministic for a fixed seed; returns the winning coefficients and the
// minimal scale. Scales below 1e-12*(1+max|y|) are snapped to exactly 0.
std::pair<CoefVector, double> s_estimate(const Design& d, const Eigen::VectorXd& y,
                                         const RhoConfig& cfg, int n_sub,
                                         std::uint64_t seed);

// M-step: IRLS descent of sum_i rho1(r_i / sigma) from `init`, with
// monotonicity safeguard. The returned loss never exceeds the initial one.
CoefVector mm_fit(const Design& d, const Eigen::VectorXd& y, double sigma,
                  const CoefVector& init, const RhoConfig& cfg);

// Ordinary least squares on (1, x, z); sigma is the residual RMS with
// denominator n - (1+p+q).
std::pair<CoefVector, double> ls_fit(const Design& d, const Eigen::VectorXd& y);

// Slope curve sum_j b_j phi_j and quadratic kernel
// sum_j u_jj phi_j x phi_j + sum_{j<l} (u_jl/2)(phi_j x phi_l + phi_l x phi_j).
std::pair<Curve, Surface> assemble(const CoefVector& coef, const PcaBasis& basis, int p);

// Coefficient transport between the raw parametrization (inner products with
// the curves themselves) and the centered one (inner products with the
// deviations from the basis center). Residuals are identical under both.
CoefVector to_centered(const CoefVector& coef, const PcaBasis& basis, int p);
CoefVector from_centered(const CoefVector& coef, const PcaBasis& basis, int p);

enum class FitMethod { ls, mm };

struct FitOptions {
  FitMethod method = FitMethod::mm;
  std::optional<int> p;          // fixed dimension; otherwise data-driven
  double var_threshold = 0.9;    // variance fraction for dimension selection
  RhoConfig cfg;
  int n_sub = 500;
  std::uint64_t seed = 20240101ull;
};

// Full fit. alpha/beta/coef are reported in the centered parametrization
// (predictions subtract the basis center); alpha_raw/beta_raw carry the
// equivalent raw-model intercept and slope.
struct FitResult {
  FitResult(Curve beta, Surface upsilon, PcaBasis basis, Curve beta_raw)
      : beta(std::move(beta)),
        upsilon(std::move(upsilon)),
        basis(std::move(basis)),
        beta_raw(std::move(beta_raw)) {}

  double alpha = 0.0;          // centered intercept
  Curve beta;                  // centered slope curve
  Surface upsilon;             // quadratic kernel (same in both forms)
  double sigma = 0.0;          // residual scale
  CoefVector coef;             // centered coefficients
  PcaBasis basis;
  int p = 0;
  Eigen::MatrixXd scores;      // centered scores, n x p
  Eigen::VectorXd residuals;
  Eigen::VectorXd weights;     // final IRLS weights (diagnostics)
  FitMethod method = FitMethod::mm;
  CoefVector scoef;            // S-step coefficients (diagnostics; mm only)
  double alpha_raw = 0.0;
  Curve beta_raw;
};

FitResult fit(const std::vector<Curve>& sample, const Eigen::VectorXd& y,
              const FitOptions& opt);

double predict(const FitResult& fit, const Curve& x);

}  // namespace fqr
