#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fqr/regression.hpp"
#include "fqr/rho.hpp"
#include "test_support.hpp"

using namespace fqr;

namespace {

const GridPtr kGrid = Grid::uniform(100);

struct Dataset {
  std::vector<Curve> curves;
  Eigen::VectorXd y;
};

// Two-score quadratic model: y = <beta0,X> + <X,Ups0 X> + sigma eps with
// beta0 = phi1 + phi2 and the symmetric two-by-two kernel.
Dataset quadratic_dataset(int n, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  const Curve p1 = test::m2_phi1(kGrid);
  const Curve p2 = test::m2_phi2(kGrid);
  Dataset ds;
  ds.y.resize(n);
  for (int i = 0; i < n; ++i) {
    const double x1 = 2.0 * gauss(rng);
    const double x2 = gauss(rng);
    ds.curves.push_back(x1 * p1 + x2 * p2);
    ds.y(i) = (x1 + x2) + (x1 * x1 + x2 * x2 + x1 * x2) + sigma * gauss(rng);
  }
  return ds;
}

Curve true_beta() { return test::m2_phi1(kGrid) + test::m2_phi2(kGrid); }

Surface true_upsilon() {
  const Curve p1 = test::m2_phi1(kGrid);
  const Curve p2 = test::m2_phi2(kGrid);
  Surface k = test::surface_sum(test::outer(p1, p1), test::outer(p2, p2));
  return test::surface_sum(k, test::sym_outer(p1, p2));
}

}  // namespace

TEST_CASE("noiseless quadratic data is recovered exactly") {
  const Dataset ds = quadratic_dataset(300, 0.0, 1);
  FitOptions opt;
  opt.method = FitMethod::mm;
  opt.p = 2;
  const FitResult f = fit(ds.curves, ds.y, opt);
  CHECK(f.sigma == 0.0);
  CHECK((f.beta_raw.values - true_beta().values).cwiseAbs().maxCoeff() < 0.05);
  CHECK((f.upsilon.values - true_upsilon().values).cwiseAbs().maxCoeff() < 0.05);
  CHECK(f.basis.method == PcaMethod::spherical);
}

TEST_CASE("predict: center evaluates to alpha and residuals match") {
  const Dataset ds = quadratic_dataset(200, 0.5, 2);
  for (FitMethod method : {FitMethod::ls, FitMethod::mm}) {
    FitOptions opt;
    opt.method = method;
    const FitResult f = fit(ds.curves, ds.y, opt);
    CHECK(predict(f, f.basis.center) == doctest::Approx(f.alpha).epsilon(1e-10));
    for (int i = 0; i < 200; i += 17) {
      const double want = ds.y(i) - predict(f, ds.curves[static_cast<std::size_t>(i)]);
      CHECK(std::abs(want - f.residuals(i)) < 1e-8);
    }
    const GridPtr other = Grid::uniform(50);
    CHECK_THROWS_AS(predict(f, zero_curve(other)), GridMismatchError);
  }
}

TEST_CASE("automatic dimension selection on the two-score model picks 2") {
  const Dataset ds = quadratic_dataset(250, 0.5, 3);
  FitOptions opt;  // p data-driven at 0.9: 4/5 < 0.9 forces both components
  const FitResult f = fit(ds.curves, ds.y, opt);
  CHECK(f.p == 2);
}

TEST_CASE("response scale equivariance of both methods") {
  const Dataset ds = quadratic_dataset(80, 0.4, 4);
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> kdist(0.2, 5.0);
  for (FitMethod method : {FitMethod::ls, FitMethod::mm}) {
    for (int rep = 0; rep < 4; ++rep) {
      const double k = kdist(rng);
      FitOptions opt;
      opt.method = method;
      opt.p = 2;
      opt.seed = 99;
      const FitResult base = fit(ds.curves, ds.y, opt);
      const FitResult scaled = fit(ds.curves, k * ds.y, opt);
      const double tol = 1e-6;
      CHECK(std::abs(scaled.alpha - k * base.alpha) <= tol * (1.0 + std::abs(k * base.alpha)));
      CHECK(std::abs(scaled.sigma - k * base.sigma) <= tol * (1.0 + k * base.sigma));
      CHECK((scaled.beta.values - k * base.beta.values).cwiseAbs().maxCoeff() <=
            tol * (1.0 + k * base.beta.values.cwiseAbs().maxCoeff()));
      CHECK((scaled.upsilon.values - k * base.upsilon.values).cwiseAbs().maxCoeff() <=
            tol * (1.0 + k * base.upsilon.values.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("response translation equivariance of both methods") {
  const Dataset ds = quadratic_dataset(80, 0.4, 5);
  for (FitMethod method : {FitMethod::ls, FitMethod::mm}) {
    for (double c : {-3.0, 0.7, 12.0}) {
      FitOptions opt;
      opt.method = method;
      opt.p = 2;
      opt.seed = 7;
      const FitResult base = fit(ds.curves, ds.y, opt);
      const FitResult shifted = fit(ds.curves, (ds.y.array() + c).matrix(), opt);
      const double tol = 1e-6;
      CHECK(std::abs(shifted.alpha - (base.alpha + c)) <= tol * (1.0 + std::abs(base.alpha + c)));
      CHECK(std::abs(shifted.sigma - base.sigma) <= tol * (1.0 + base.sigma));
      CHECK((shifted.beta.values - base.beta.values).cwiseAbs().maxCoeff() <= tol);
      CHECK((shifted.upsilon.values - base.upsilon.values).cwiseAbs().maxCoeff() <= tol);
    }
  }
}

TEST_CASE("shuffling the observations does not move the fit") {
  const Dataset ds = quadratic_dataset(120, 0.5, 6);
  std::vector<int> perm(120);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(99));
  Dataset shuffled;
  shuffled.y.resize(120);
  for (int i = 0; i < 120; ++i) {
    shuffled.curves.push_back(ds.curves[static_cast<std::size_t>(perm[i])]);
    shuffled.y(i) = ds.y(perm[i]);
  }
  FitOptions opt;
  opt.p = 2;
  opt.seed = 31;

  opt.method = FitMethod::ls;
  const FitResult ls_a = fit(ds.curves, ds.y, opt);
  const FitResult ls_b = fit(shuffled.curves, shuffled.y, opt);
  CHECK((ls_a.beta.values - ls_b.beta.values).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(std::abs(ls_a.alpha - ls_b.alpha) < 1e-10);

  opt.method = FitMethod::mm;
  const FitResult mm_a = fit(ds.curves, ds.y, opt);
  const FitResult mm_b = fit(shuffled.curves, shuffled.y, opt);
  CHECK((mm_a.beta.values - mm_b.beta.values).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(std::abs(mm_a.sigma - mm_b.sigma) < 1e-6);
}

TEST_CASE("scale fixed point and monotone M-step at the fit level") {
  const Dataset ds = quadratic_dataset(150, 0.5, 8);
  FitOptions opt;
  opt.method = FitMethod::mm;
  opt.p = 2;
  const FitResult f = fit(ds.curves, ds.y, opt);
  REQUIRE(f.sigma > 0.0);

  const Design d = build_design(f.scores, true);
  const Eigen::VectorXd r_init = residuals_for(d, ds.y, f.scoef);
  RhoConfig cfg;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < r_init.size(); ++i) acc += rho(r_init(i) / f.sigma, cfg.c0);
  acc /= static_cast<double>(r_init.size() - f.p - d.q);
  CHECK(acc == doctest::Approx(cfg.b).epsilon(1e-8));

  auto loss1 = [&](const Eigen::VectorXd& r) {
    double l = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) l += rho(r(i) / f.sigma, cfg.c1);
    return l;
  };
  CHECK(loss1(f.residuals) <= loss1(r_init) + 1e-12);
  CHECK(f.weights.minCoeff() >= 0.0);
  CHECK(f.weights.maxCoeff() <= 1.0);
}

TEST_CASE("gross vertical outliers barely move the robust slope") {
  std::vector<double> mm_move, ls_move;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Dataset ds = quadratic_dataset(300, 0.5, 100 + seed);
    FitOptions opt;
    opt.p = 2;
    opt.seed = seed;

    opt.method = FitMethod::mm;
    const FitResult mm_clean = fit(ds.curves, ds.y, opt);
    opt.method = FitMethod::ls;
    const FitResult ls_clean = fit(ds.curves, ds.y, opt);

    Eigen::VectorXd y_bad = ds.y;
    std::mt19937_64 rng(200 + seed);
    std::bernoulli_distribution hit(0.10);
    for (int i = 0; i < 300; ++i)
      if (hit(rng)) y_bad(i) += 1e6;

    opt.method = FitMethod::mm;
    const FitResult mm_bad = fit(ds.curves, y_bad, opt);
    opt.method = FitMethod::ls;
    const FitResult ls_bad = fit(ds.curves, y_bad, opt);

    mm_move.push_back(norm(mm_bad.beta_raw - mm_clean.beta_raw));
    ls_move.push_back(norm(ls_bad.beta_raw - ls_clean.beta_raw));
  }
  std::nth_element(mm_move.begin(), mm_move.begin() + 10, mm_move.end());
  std::nth_element(ls_move.begin(), ls_move.begin() + 10, ls_move.end());
  CHECK(mm_move[10] < 0.2);
  CHECK(ls_move[10] > 10.0);
}

TEST_CASE("fit input validation") {
  const Dataset ds = quadratic_dataset(20, 0.5, 9);
  FitOptions opt;
  opt.p = 3;  // needs n > 1 + 3 + 6
  Eigen::VectorXd wrong(5);
  CHECK_THROWS_AS(fit(ds.curves, wrong, opt), Error);
  Dataset tiny = quadratic_dataset(9, 0.5, 10);
  CHECK_THROWS_AS(fit(tiny.curves, tiny.y, opt), Error);
}
