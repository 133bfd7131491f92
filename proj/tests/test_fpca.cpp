#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fqr/fpca.hpp"
#include "fqr/spatial_median.hpp"
#include "test_support.hpp"

using namespace fqr;
using test::curve_of;

namespace {

const GridPtr kGrid = Grid::uniform(100);

double weighted_trace(const Surface& k) {
  return (k.grid->weights().array() * k.values.diagonal().array()).sum();
}

// Angle (degrees) between f and g modulo sign.
double angle_deg(const Curve& f, const Curve& g) {
  const double c = std::abs(inner_product(f, g)) / (norm(f) * norm(g));
  return std::acos(std::min(1.0, c)) * 180.0 / std::numbers::pi;
}

std::vector<Curve> model2_sample(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  const Curve p1 = test::m2_phi1(kGrid);
  const Curve p2 = test::m2_phi2(kGrid);
  std::vector<Curve> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(2.0 * gauss(rng) * p1 + gauss(rng) * p2);
  return out;
}

}  // namespace

TEST_CASE("sample covariance: duplicates and a rank-one pair") {
  const Curve c = curve_of(kGrid, [](double t) { return t + 1.0; });
  CHECK(sample_covariance({c, c}, c).values.cwiseAbs().maxCoeff() == 0.0);

  const Curve p1 = test::m2_phi1(kGrid);
  const Surface k = sample_covariance({p1, -1.0 * p1}, zero_curve(kGrid));
  CHECK((k.values - p1.values * p1.values.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(sample_covariance({c}, c), Error);
}

TEST_CASE("sample covariance recovers the population eigenvalues") {
  const std::vector<Curve> sample = model2_sample(2000, 99);
  const Surface k = sample_covariance(sample, zero_curve(kGrid));
  auto [dirs, vals] = eigen_directions(k, 2);
  CHECK(vals(0) == doctest::Approx(4.0).epsilon(0.10));
  CHECK(vals(1) == doctest::Approx(1.0).epsilon(0.10));
}

TEST_CASE("sign covariance: unit directions and weighted trace") {
  const Curve c = curve_of(kGrid, [](double t) { return 0.5 * t; });
  const Curve p1 = test::m2_phi1(kGrid);

  const Surface k1 = sign_covariance({c + p1, c + p1}, c);
  CHECK((k1.values - p1.values * p1.values.transpose()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(weighted_trace(k1) == doctest::Approx(1.0).epsilon(1e-8));

  // Antipodal contributions coincide after the sphere projection.
  const Surface k2 = sign_covariance({c + p1, c - p1}, c);
  CHECK((k2.values - k1.values).cwiseAbs().maxCoeff() < 1e-9);

  CHECK_THROWS_AS(sign_covariance({c, c}, c), DegenerateSampleError);
}

TEST_CASE("sign covariance trace is 1 on random samples") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<Curve> sample;
    const int n = 20 + rep;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd v(kGrid->size());
      for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = gauss(rng);
      sample.emplace_back(kGrid, v);
    }
    const Surface k = sign_covariance(sample, zero_curve(kGrid));
    CHECK(weighted_trace(k) == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("sign covariance resists score contamination") {
  // Second score recentered far away for 10% of the draws: the spherical
  // leading direction stays near phi1.
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss;
  std::bernoulli_distribution hit(0.10);
  const Curve p1 = test::m2_phi1(kGrid);
  const Curve p2 = test::m2_phi2(kGrid);
  std::vector<Curve> sample;
  for (int i = 0; i < 2000; ++i) {
    double s1 = 2.0 * gauss(rng);
    double s2 = hit(rng) ? 6.0 + 0.5 * gauss(rng) : gauss(rng);
    sample.push_back(s1 * p1 + s2 * p2);
  }
  const Surface k = sign_covariance(sample, spatial_median(sample));
  auto [dirs, vals] = eigen_directions(k, 2);
  CHECK(angle_deg(dirs[0], p1) < 15.0);
}

TEST_CASE("eigen_directions on closed-form kernels") {
  const Curve p1 = test::m2_phi1(kGrid);
  const Curve p2 = test::m2_phi2(kGrid);
  Surface k = test::surface_sum(test::outer(p1, p1), test::outer(p2, p2), 4.0, 1.0);
  auto [dirs, vals] = eigen_directions(k, 2);
  CHECK(vals(0) == doctest::Approx(4.0).epsilon(1e-2));
  CHECK(vals(1) == doctest::Approx(1.0).epsilon(1e-2));
  auto close_mod_sign = [](const Curve& a, const Curve& b) {
    const double plus = (a.values - b.values).cwiseAbs().maxCoeff();
    const double minus = (a.values + b.values).cwiseAbs().maxCoeff();
    return std::min(plus, minus);
  };
  CHECK(close_mod_sign(dirs[0], p1) < 5e-2);
  CHECK(close_mod_sign(dirs[1], p2) < 5e-2);

  // Rank-one kernel: eigenvalue 1, direction +-g.
  Curve g = curve_of(kGrid, [](double t) { return std::sin(2.0 * t) + 0.3; });
  g = (1.0 / norm(g)) * g;
  auto [gd, gv] = eigen_directions(test::outer(g, g), 1);
  CHECK(gv(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(close_mod_sign(gd[0], g) < 1e-6);
}

TEST_CASE("eigen_directions reproduces the j^-2 spectrum") {
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(kGrid->size(), kGrid->size());
  for (int j = 1; j <= 50; ++j) {
    const Curve phi = test::cos_phi(kGrid, j);
    acc += (1.0 / (static_cast<double>(j) * j)) * phi.values * phi.values.transpose();
  }
  auto [dirs, vals] = eigen_directions(Surface(kGrid, acc), 6);
  for (int j = 1; j <= 6; ++j)
    CHECK(vals(j - 1) == doctest::Approx(1.0 / (j * j)).epsilon(1e-2));
  // Orthonormality of the returned directions.
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b)
      CHECK(std::abs(inner_product(dirs[a], dirs[b]) - (a == b ? 1.0 : 0.0)) < 5e-3);
}

TEST_CASE("eigen_directions rejects asymmetric kernels") {
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(kGrid->size(), kGrid->size());
  bad(0, 1) = 1.0;  // no mirror entry
  CHECK_THROWS_AS(eigen_directions(Surface(kGrid, bad), 1), Error);
}

TEST_CASE("robust score scale: zeros, equivariance, calibration") {
  CHECK(robust_scale_of_scores(Eigen::VectorXd::Zero(50)) == 0.0);
  std::mt19937_64 rng(31);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd s(400);
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = gauss(rng);
  const double base = robust_scale_of_scores(s);
  CHECK(robust_scale_of_scores(3.0 * s) == doctest::Approx(9.0 * base).epsilon(1e-10));

  Eigen::VectorXd big(10000);
  for (Eigen::Index i = 0; i < big.size(); ++i) big(i) = 2.0 * gauss(rng);  // N(0,4)
  const double v = robust_scale_of_scores(big);
  CHECK(v >= 3.7);
  CHECK(v <= 4.3);
}

TEST_CASE("select_dimension thresholds") {
  Eigen::VectorXd two(2);
  two << 4.0, 1.0;
  CHECK(select_dimension(two, 0.9) == 2);  // 4/5 = 0.8 < 0.9
  Eigen::VectorXd spiked(3);
  spiked << 1.0, 0.0, 0.0;
  CHECK(select_dimension(spiked, 0.9) == 1);

  // Long j^-2 tail: five leading terms hold ~89% of the infinite total, six
  // hold ~90.7%.
  Eigen::VectorXd tail(10000);
  for (int j = 1; j <= tail.size(); ++j) tail(j - 1) = 1.0 / (static_cast<double>(j) * j);
  CHECK(select_dimension(tail, 0.9) == 6);

  // Truncating at 50 terms shrinks the denominator enough that five suffice.
  CHECK(select_dimension(tail.head(50), 0.9) == 5);

  // Invariant under positive rescaling.
  CHECK(select_dimension(1000.0 * tail, 0.9) == 6);
  CHECK(select_dimension(1e-6 * tail, 0.9) == 6);

  CHECK_THROWS_AS(select_dimension(Eigen::VectorXd::Zero(3), 0.9), Error);
  CHECK_THROWS_AS(select_dimension(two, 0.0), Error);
}

TEST_CASE("build_basis: spherical ordering by robust score scale") {
  const Curve c = curve_of(kGrid, [](double t) { return 0.2 * t; });
  const Curve p1 = test::m2_phi1(kGrid);
  const Curve p2 = test::m2_phi2(kGrid);
  // Score magnitude 2 along phi1, 1 along phi2; phi1 duplicated so the sphere
  // masses differ and the eigenproblem is well separated.
  const std::vector<Curve> sample = {c + 2.0 * p1, c - 2.0 * p1, c + p2,
                                     c - p2,       c + 2.0 * p1, c - 2.0 * p1};
  const PcaBasis basis = build_basis(sample, PcaMethod::spherical, 2);
  CHECK(std::abs(std::abs(inner_product(basis.directions[0], p1)) - 1.0) < 5e-3);
  CHECK(std::abs(std::abs(inner_product(basis.directions[1], p2)) - 1.0) < 5e-3);
  CHECK(basis.scales(0) >= basis.scales(1));
  CHECK(norm(basis.center - c) < 1e-6);
}

TEST_CASE("build_basis: classical scales near {4,1} on the two-score model") {
  const std::vector<Curve> sample = model2_sample(2000, 4);
  const PcaBasis basis = build_basis(sample, PcaMethod::classical, 2);
  CHECK(basis.scales(0) == doctest::Approx(4.0).epsilon(0.10));
  CHECK(basis.scales(1) == doctest::Approx(1.0).epsilon(0.10));
}

TEST_CASE("build_basis rejects a constant sample") {
  const Curve c = curve_of(kGrid, [](double t) { return t; });
  CHECK_THROWS_AS(build_basis({c, c, c}, PcaMethod::spherical, 1), DegenerateSampleError);
  CHECK_THROWS_AS(build_basis({c, c, c}, PcaMethod::classical, 1), DegenerateSampleError);
}

TEST_CASE("spherical basis ignores the radial magnitude of one curve") {
  // The flagged curve saturates the bisquare scale in every direction, so
  // even the robust scales are untouched by inflating its deviation.
  std::vector<Curve> sample = model2_sample(50, 12);
  const Curve p1 = test::m2_phi1(kGrid);
  const Curve p2 = test::m2_phi2(kGrid);
  const Curve c = zero_curve(kGrid);
  sample.push_back(200.0 * p1 + 100.0 * p2);

  const PcaBasis base = build_basis(sample, PcaMethod::spherical, 2, c);
  std::vector<Curve> inflated = sample;
  inflated.back() = 1e6 * sample.back();
  const PcaBasis big = build_basis(inflated, PcaMethod::spherical, 2, c);

  for (int j = 0; j < 2; ++j) {
    const double plus = (big.directions[j].values - base.directions[j].values)
                            .cwiseAbs().maxCoeff();
    const double minus = (big.directions[j].values + base.directions[j].values)
                             .cwiseAbs().maxCoeff();
    CHECK(std::min(plus, minus) < 1e-9);
  }
  CHECK(big.scales(0) == doctest::Approx(base.scales(0)).epsilon(1e-12));
  CHECK(big.scales(1) == doctest::Approx(base.scales(1)).epsilon(1e-12));
}

TEST_CASE("spherical leading direction is Fisher-consistent on clean draws") {
  const std::vector<Curve> sample = model2_sample(2000, 77);
  const PcaBasis basis = build_basis(sample, PcaMethod::spherical, 2);
  CHECK(angle_deg(basis.directions[0], test::m2_phi1(kGrid)) < 10.0);
}

TEST_CASE("project_scores: orthonormal reconstruction") {
  const std::vector<Curve> sample = model2_sample(200, 3);
  const PcaBasis basis = build_basis(sample, PcaMethod::classical, 2);

  std::vector<Curve> probes = {basis.center,
                               basis.center + 3.0 * basis.directions[1]};
  Eigen::MatrixXd s = project_scores(probes, basis, 2);
  CHECK(std::abs(s(0, 0)) < 5e-3);
  CHECK(std::abs(s(0, 1)) < 5e-3);
  CHECK(std::abs(s(1, 0)) < 5e-3);
  CHECK(s(1, 1) == doctest::Approx(3.0).epsilon(5e-3));

  // Bessel: the projection onto the basis never beats the full deviation.
  Eigen::MatrixXd all = project_scores(sample, basis, 2);
  for (int i = 0; i < 40; ++i) {
    Curve recon = basis.center + all(i, 0) * basis.directions[0] +
                  all(i, 1) * basis.directions[1];
    CHECK(norm(sample[i] - recon) <= norm(sample[i] - basis.center) * (1.0 + 1e-8));
  }
  CHECK_THROWS_AS(project_scores(sample, basis, 3), Error);
}
