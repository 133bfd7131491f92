#include "fqr/simulation.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "fqr/rng.hpp"

namespace fqr {

namespace {

constexpr std::uint64_t kScoreStream = 1;
constexpr std::uint64_t kErrorStream = 2;
constexpr std::uint64_t kFlagStream = 3;
constexpr std::uint64_t kContamStream = 4;
constexpr std::uint64_t kFitSeedStream = 5;
constexpr double kContamRate = 0.10;

std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

bool model1_choice(UpsilonChoice c) {
  return c == UpsilonChoice::u00 || c == UpsilonChoice::u01 || c == UpsilonChoice::u02;
}

// Cosine basis of model 1: phi_1 = 1, phi_j(t) = sqrt(2) cos((j-1) pi t).
Eigen::MatrixXd cosine_basis(const GridPtr& grid, int k) {
  const Eigen::Index m = grid->size();
  Eigen::MatrixXd phi(m, k);
  phi.col(0).setOnes();
  for (int j = 1; j < k; ++j)
    phi.col(j) = (std::numbers::pi * static_cast<double>(j) * grid->points().array())
                     .cos()
                     .matrix() *
                 std::sqrt(2.0);
  return phi;
}

// Model-2 pair: phi_1 = -sqrt(2) cos(pi t), phi_2 = sqrt(2) sin(pi t).
Eigen::MatrixXd model2_basis(const GridPtr& grid) {
  const Eigen::Index m = grid->size();
  Eigen::MatrixXd phi(m, 2);
  phi.col(0) = -std::sqrt(2.0) * (std::numbers::pi * grid->points().array()).cos().matrix();
  phi.col(1) = std::sqrt(2.0) * (std::numbers::pi * grid->points().array()).sin().matrix();
  return phi;
}

Eigen::VectorXd model1_slope_coords() {
  Eigen::VectorXd b(50);
  b(0) = 0.3;
  for (int j = 2; j <= 50; ++j)
    b(j - 1) = 4.0 * ((j + 1) % 2 == 0 ? 1.0 : -1.0) / (static_cast<double>(j) * j);
  return b;
}

Eigen::VectorXd model_score_sds(Model model) {
  if (model == Model::model2) {
    Eigen::VectorXd sd(2);
    sd << 2.0, 1.0;
    return sd;
  }
  Eigen::VectorXd sd(50);
  for (int j = 1; j <= 50; ++j) sd(j - 1) = 1.0 / static_cast<double>(j);
  return sd;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (n < 1 || n_reps < 1) throw Error("scenario: n and n_reps must be positive");
  if (grid_size < 3) throw Error("scenario: grid size must be at least 3");
  if (model == Model::model1 && !model1_choice(upsilon))
    throw Error("scenario: model 1 expects one of U00/U01/U02");
  if (model == Model::model2 && model1_choice(upsilon))
    throw Error("scenario: model 2 expects linear or quadratic");
  switch (contamination) {
    case ContaminationKind::c0:
      break;
    case ContaminationKind::c1:
    case ContaminationKind::c2:
      if (!mu) throw Error("scenario: this contamination requires mu");
      break;
    case ContaminationKind::c3:
      if (model == Model::model1) {
        if (!mu || !delta) throw Error("model 1 C3 requires delta (and mu)");
      } else if (!mu) {
        throw Error("model 2 C3 requires mu");
      }
      break;
  }
}

std::string ScenarioConfig::label() const {
  std::string s = model == Model::model1 ? "model1/" : "model2/";
  switch (upsilon) {
    case UpsilonChoice::u00: s += "U00"; break;
    case UpsilonChoice::u01: s += "U01"; break;
    case UpsilonChoice::u02: s += "U02"; break;
    case UpsilonChoice::linear: s += "linear"; break;
    case UpsilonChoice::quadratic: s += "quadratic"; break;
  }
  s += '/';
  switch (contamination) {
    case ContaminationKind::c0: s += "C0"; break;
    case ContaminationKind::c1: s += "C1:mu=" + fmt_num(*mu); break;
    case ContaminationKind::c2: s += "C2:mu=" + fmt_num(*mu); break;
    case ContaminationKind::c3:
      s += "C3:mu=" + fmt_num(*mu);
      if (delta) s += ",delta=" + fmt_num(*delta);
      break;
  }
  return s;
}

TruthSet truth_model1(UpsilonChoice choice, const GridPtr& grid) {
  if (!model1_choice(choice)) throw Error("truth_model1: not a model-1 operator choice");
  if (!grid->uniform_spacing()) throw UnsupportedGridError("truth_model1: grid must be uniform");
  const Eigen::MatrixXd phi = cosine_basis(grid, 50);
  const Eigen::VectorXd b0 = model1_slope_coords();
  Curve beta0(grid, phi * b0);

  Eigen::MatrixXd ups = Eigen::MatrixXd::Zero(grid->size(), grid->size());
  if (choice == UpsilonChoice::u01) {
    // Coefficient matrix 5 b0 b0^T: a rank-one kernel 5 beta0 x beta0.
    ups = 5.0 * beta0.values * beta0.values.transpose();
  } else if (choice == UpsilonChoice::u02) {
    Eigen::VectorXd b2(5);
    b2 << 0.3, 0.3, 3.0 / 9.0, -3.0 / 16.0, 3.0 / 25.0;
    Eigen::MatrixXd odd(grid->size(), 5);
    for (int j = 0; j < 5; ++j) odd.col(j) = phi.col(2 * j);
    const Eigen::VectorXd g = odd * b2;
    ups = 5.0 * g * g.transpose();
  }
  return TruthSet(std::move(beta0), Surface(grid, std::move(ups)), 1.0);
}

TruthSet truth_model2(UpsilonChoice choice, const GridPtr& grid) {
  if (model1_choice(choice)) throw Error("truth_model2: not a model-2 operator choice");
  const Eigen::MatrixXd phi = model2_basis(grid);
  Eigen::VectorXd a(2);
  Eigen::MatrixXd ups = Eigen::MatrixXd::Zero(grid->size(), grid->size());
  if (choice == UpsilonChoice::linear) {
    a << 2.0, 0.5;
  } else {
    a << 1.0, 1.0;
    ups = phi.col(0) * phi.col(0).transpose() + phi.col(1) * phi.col(1).transpose() +
          0.5 * (phi.col(0) * phi.col(1).transpose() + phi.col(1) * phi.col(0).transpose());
  }
  return TruthSet(Curve(grid, phi * a), Surface(grid, std::move(ups)), 0.5);
}

TruthSet make_truth(const ScenarioConfig& cfg, const GridPtr& grid) {
  return cfg.model == Model::model1 ? truth_model1(cfg.upsilon, grid)
                                    : truth_model2(cfg.upsilon, grid);
}

GeneratedSample generate(const ScenarioConfig& cfg, const TruthSet& truth, int rep) {
  cfg.validate();
  const GridPtr grid = truth.beta0.grid;
  const int n = cfg.n;

  const Eigen::MatrixXd phi =
      cfg.model == Model::model1 ? cosine_basis(grid, 50) : model2_basis(grid);
  const Eigen::VectorXd sd = model_score_sds(cfg.model);
  const int k = static_cast<int>(sd.size());

  auto rng_scores = stream_rng(cfg.seed, static_cast<std::uint64_t>(rep), kScoreStream);
  auto rng_errors = stream_rng(cfg.seed, static_cast<std::uint64_t>(rep), kErrorStream);
  auto rng_flags = stream_rng(cfg.seed, static_cast<std::uint64_t>(rep), kFlagStream);
  auto rng_contam = stream_rng(cfg.seed, static_cast<std::uint64_t>(rep), kContamStream);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution hit(kContamRate);

  Eigen::MatrixXd xi(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) xi(i, j) = sd(j) * gauss(rng_scores);
  Eigen::VectorXd eps(n);
  for (int i = 0; i < n; ++i) eps(i) = gauss(rng_errors);

  std::vector<std::uint8_t> flags(static_cast<std::size_t>(n), 0);
  if (cfg.contamination != ContaminationKind::c0) {
    for (int i = 0; i < n; ++i) flags[static_cast<std::size_t>(i)] = hit(rng_flags) ? 1 : 0;
  }

  // Quadrature forms of the regression function.
  const Eigen::VectorXd bw =
      (grid->weights().array() * truth.beta0.values.array()).matrix();
  const Eigen::MatrixXd kw = grid->weights().asDiagonal() * truth.upsilon0.values *
                             grid->weights().asDiagonal();
  const bool has_quad = truth.upsilon0.values.cwiseAbs().maxCoeff() > 0.0;
  auto reg_fun = [&](const Eigen::VectorXd& x) {
    double g = truth.alpha0 + bw.dot(x);
    if (has_quad) g += x.dot(kw * x);
    return g;
  };

  Eigen::MatrixXd xvals = xi * phi.transpose();  // n x m rows are curves
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i)
    y(i) = reg_fun(xvals.row(i).transpose()) + truth.sigma0 * eps(i);

  const double mu = cfg.mu.value_or(0.0);
  switch (cfg.contamination) {
    case ContaminationKind::c0:
      break;
    case ContaminationKind::c1:
      // Vertical outliers: error mixture 0.9 N(0,1) + 0.1 N(mu, 0.25).
      for (int i = 0; i < n; ++i) {
        if (!flags[static_cast<std::size_t>(i)]) continue;
        const double e = mu + 0.5 * gauss(rng_contam);
        y(i) = reg_fun(xvals.row(i).transpose()) + truth.sigma0 * e;
      }
      break;
    case ContaminationKind::c2:
      // High leverage: second score recentered at mu/2, noise term N(mu, sigma0^2/4).
      for (int i = 0; i < n; ++i) {
        if (!flags[static_cast<std::size_t>(i)]) continue;
        for (int j = 0; j < k; ++j) {
          if (j == 1)
            xi(i, j) = 0.5 * mu + 0.5 * gauss(rng_contam);
          else
            xi(i, j) = sd(j) * gauss(rng_contam);
        }
        xvals.row(i) = (phi * xi.row(i).transpose()).transpose();
        const double noise = mu + 0.5 * truth.sigma0 * gauss(rng_contam);
        y(i) = reg_fun(xvals.row(i).transpose()) + noise;
      }
      break;
    case ContaminationKind::c3:
      if (cfg.model == Model::model1) {
        // Score means shifted to mu; responses shrunk to delta * y.
        for (int i = 0; i < n; ++i) {
          if (!flags[static_cast<std::size_t>(i)]) continue;
          for (int j = 0; j < k; ++j) xi(i, j) = mu + sd(j) * gauss(rng_contam);
          xvals.row(i) = (phi * xi.row(i).transpose()).transpose();
          y(i) *= *cfg.delta;
        }
      } else {
        // Scores folded and doubled; responses mapped to 2 mu |y|.
        for (int i = 0; i < n; ++i) {
          if (!flags[static_cast<std::size_t>(i)]) continue;
          for (int j = 0; j < k; ++j) xi(i, j) = 2.0 * std::abs(xi(i, j));
          xvals.row(i) = (phi * xi.row(i).transpose()).transpose();
          y(i) = 2.0 * mu * std::abs(y(i));
        }
      }
      break;
  }

  GeneratedSample out;
  out.curves.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.curves.emplace_back(grid, xvals.row(i).transpose());
  out.y = std::move(y);
  out.flags = std::move(flags);
  return out;
}

EstimatorMetrics metrics(const std::vector<std::pair<Curve, Surface>>& estimates,
                         const TruthSet& truth, double trim_fraction) {
  if (estimates.empty()) throw Error("metrics: no estimates");
  if (!(trim_fraction >= 0.0 && trim_fraction < 0.5))
    throw Error("metrics: trim fraction must lie in [0, 0.5)");
  const GridPtr grid = truth.beta0.grid;
  const Eigen::Index m = grid->size();
  const Eigen::Index q =
      static_cast<Eigen::Index>(std::floor(static_cast<double>(m) * trim_fraction));
  const double r = static_cast<double>(estimates.size());

  Eigen::VectorXd beta_mean = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd beta_sq = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd up_mean = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd up_sq = Eigen::MatrixXd::Zero(m, m);
  for (const auto& [beta, up] : estimates) {
    require_same_grid(grid, beta.grid, "metrics");
    require_same_grid(grid, up.grid, "metrics");
    const Eigen::VectorXd db = beta.values - truth.beta0.values;
    const Eigen::MatrixXd du = up.values - truth.upsilon0.values;
    beta_mean += db;
    beta_sq += db.cwiseAbs2();
    up_mean += du;
    up_sq += du.cwiseAbs2();
  }
  beta_mean /= r;
  up_mean /= r;

  auto avg_vec = [&](const Eigen::VectorXd& v, Eigen::Index lo, Eigen::Index len) {
    return v.segment(lo, len).sum() / static_cast<double>(len);
  };
  auto avg_mat = [&](const Eigen::MatrixXd& a, Eigen::Index lo, Eigen::Index len) {
    return a.block(lo, lo, len, len).sum() / static_cast<double>(len * len);
  };

  EstimatorMetrics out;
  out.bias2_beta = avg_vec(beta_mean.cwiseAbs2(), 0, m);
  out.mise_beta = avg_vec(beta_sq, 0, m) / r;
  out.bias2_up = avg_mat(up_mean.cwiseAbs2(), 0, m);
  out.mise_up = avg_mat(up_sq, 0, m) / r;
  const Eigen::Index len = m - 2 * q;
  out.bias2_beta_trim = avg_vec(beta_mean.cwiseAbs2(), q, len);
  out.mise_beta_trim = avg_vec(beta_sq, q, len) / r;
  out.bias2_up_trim = avg_mat(up_mean.cwiseAbs2(), q, len);
  out.mise_up_trim = avg_mat(up_sq, q, len) / r;
  return out;
}

namespace {

struct RepOutcome {
  bool ok = false;
  Eigen::VectorXd beta;
  Eigen::MatrixXd upsilon;
  double alpha = 0.0;
};

MethodReport summarize(const std::vector<RepOutcome>& outcomes, const TruthSet& truth,
                       const GridPtr& grid, double trim_fraction) {
  std::vector<std::pair<Curve, Surface>> estimates;
  std::vector<double> alphas;
  estimates.reserve(outcomes.size());
  for (const RepOutcome& o : outcomes) {
    if (!o.ok) continue;
    estimates.emplace_back(Curve(grid, o.beta), Surface(grid, o.upsilon));
    alphas.push_back(o.alpha);
  }
  MethodReport rep;
  rep.reps_used = static_cast<int>(estimates.size());
  rep.failures = static_cast<int>(outcomes.size() - estimates.size());
  if (estimates.empty()) return rep;
  rep.m = metrics(estimates, truth, trim_fraction);
  double mean = 0.0;
  for (double a : alphas) mean += a;
  mean /= static_cast<double>(alphas.size());
  rep.alpha_abs_mean = std::abs(mean);
  if (alphas.size() > 1) {
    double acc = 0.0;
    for (double a : alphas) acc += (a - mean) * (a - mean);
    rep.alpha_sd = std::sqrt(acc / static_cast<double>(alphas.size() - 1));
  }
  return rep;
}

}  // namespace

StudyReport run_study(const ScenarioConfig& cfg, const StudyOptions& opt) {
  cfg.validate();
  const GridPtr grid = Grid::uniform(static_cast<std::size_t>(cfg.grid_size));
  const TruthSet truth = make_truth(cfg, grid);
  const int reps = cfg.n_reps;

  std::vector<RepOutcome> ls_out(static_cast<std::size_t>(reps));
  std::vector<RepOutcome> mm_out(static_cast<std::size_t>(reps));

  const GridPtr fit_grid = opt.quadrature == StudyQuadrature::riemann
                               ? Grid::uniform_riemann(static_cast<std::size_t>(cfg.grid_size))
                               : grid;

  auto run_one = [&](int r) {
    const GeneratedSample sample = generate(cfg, truth, r);
    std::vector<Curve> curves;
    if (fit_grid == grid) {
      curves = sample.curves;
    } else {
      curves.reserve(sample.curves.size());
      for (const Curve& c : sample.curves) curves.emplace_back(fit_grid, c.values);
    }
    const std::uint64_t fit_seed =
        stream_key(cfg.seed, static_cast<std::uint64_t>(r), kFitSeedStream);
    auto run_method = [&](FitMethod method, RepOutcome& slot) {
      FitOptions fo = opt.fit;
      fo.method = method;
      fo.seed = fit_seed;
      try {
        FitResult f = fit(curves, sample.y, fo);
        slot.beta = f.beta_raw.values;
        slot.upsilon = f.upsilon.values;
        slot.alpha = f.alpha_raw;
        slot.ok = true;
      } catch (const Error&) {
        slot.ok = false;
      }
    };
    if (opt.with_ls) run_method(FitMethod::ls, ls_out[static_cast<std::size_t>(r)]);
    if (opt.with_mm) run_method(FitMethod::mm, mm_out[static_cast<std::size_t>(r)]);
  };

  int threads = opt.n_threads;
  if (threads == 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, reps));
  if (threads == 1) {
    for (int r = 0; r < reps; ++r) run_one(r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&]() {
        for (int r = next.fetch_add(1); r < reps; r = next.fetch_add(1)) run_one(r);
      });
    }
    for (std::thread& t : pool) t.join();
  }

  StudyReport report;
  report.scenario = cfg;
  auto finish = [&](const std::vector<RepOutcome>& outcomes) {
    MethodReport mr = summarize(outcomes, truth, grid, opt.trim_fraction);
    if (mr.failures > 0.02 * static_cast<double>(reps))
      throw StudyError("run_study: more than 2% of the replication fits failed (" +
                       std::to_string(mr.failures) + "/" + std::to_string(reps) + ")");
    return mr;
  };
  if (opt.with_ls) report.ls = finish(ls_out);
  if (opt.with_mm) report.mm = finish(mm_out);
  return report;
}

std::string study_csv_header() {
  return "scenario,estimator,metric,target,value,reps,failures\n";
}

namespace {

void append_rows(std::ostringstream& os, const std::string& scenario,
                 const std::string& estimator, const MethodReport& r) {
  const std::pair<const char*, double> rows[] = {
      {"bias2,beta", r.m.bias2_beta},         {"mise,beta", r.m.mise_beta},
      {"bias2_trim,beta", r.m.bias2_beta_trim}, {"mise_trim,beta", r.m.mise_beta_trim},
      {"bias2,upsilon", r.m.bias2_up},        {"mise,upsilon", r.m.mise_up},
      {"bias2_trim,upsilon", r.m.bias2_up_trim}, {"mise_trim,upsilon", r.m.mise_up_trim},
  };
  for (const auto& [key, value] : rows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", value);
    os << scenario << ',' << estimator << ',' << key << ',' << buf << ','
       << r.reps_used << ',' << r.failures << '\n';
  }
}

nlohmann::json method_json(const MethodReport& r) {
  return nlohmann::json{{"bias2_beta", r.m.bias2_beta},
                        {"mise_beta", r.m.mise_beta},
                        {"bias2_beta_trim", r.m.bias2_beta_trim},
                        {"mise_beta_trim", r.m.mise_beta_trim},
                        {"bias2_upsilon", r.m.bias2_up},
                        {"mise_upsilon", r.m.mise_up},
                        {"bias2_upsilon_trim", r.m.bias2_up_trim},
                        {"mise_upsilon_trim", r.m.mise_up_trim},
                        {"alpha_abs_mean", r.alpha_abs_mean},
                        {"alpha_sd", r.alpha_sd},
                        {"reps", r.reps_used},
                        {"failures", r.failures}};
}

}  // namespace

std::string study_csv_rows(const StudyReport& report, const std::string& scenario_label) {
  std::ostringstream os;
  if (report.ls) append_rows(os, scenario_label, "ls", *report.ls);
  if (report.mm) append_rows(os, scenario_label, "mm", *report.mm);
  return os.str();
}

std::string study_json(const StudyReport& report) {
  nlohmann::json j;
  j["scenario"] = report.scenario.label();
  j["n"] = report.scenario.n;
  j["n_reps"] = report.scenario.n_reps;
  j["grid_size"] = report.scenario.grid_size;
  j["seed"] = report.scenario.seed;
  if (report.ls) j["ls"] = method_json(*report.ls);
  if (report.mm) j["mm"] = method_json(*report.mm);
  return j.dump(2);
}

}  // namespace fqr
