#pragma once

#include <Eigen/Core>

#include "fqr/errors.hpp"

namespace fqr {

// Tuning constants for the two bisquare losses: rho0 (scale step, constant
// c0 with target b) and rho1 (regression step, constant c1). c1 > c0 so that
// the regression loss is pointwise below the scale loss.
struct RhoConfig {
  double c0 = 1.54764;
  double b = 0.5;
  double c1 = 3.444;

  void validate() const;
};

// Tukey bisquare loss, normalized to saturate at 1: min(1-(1-(t/c)^2)^3, 1).
double rho(double t, double c);

// Derivative of rho; zero for |t| >= c.
double psi(double t, double c);

// psi(t)/t rescaled so the value at t = 0 equals 1. The common factor 6/c^2
// cancels in reweighted least squares.
double rho_weight(double t, double c);

// M-scale of the residuals r: the value s >= 0 solving
//   (1/(n - dof)) sum_i rho(r_i / s, c0) = b.
// Returns 0 when too many residuals are exactly zero for a positive solution
// to exist. Solved by the monotone fixed-point iteration
// s <- s * sqrt(avg rho(r/s) / b), started at median|r|/0.6745.
double m_scale(const Eigen::VectorXd& r, const RhoConfig& cfg, Eigen::Index dof);

}  // namespace fqr
