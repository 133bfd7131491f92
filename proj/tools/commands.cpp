#include "commands.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "fqr/curve_io.hpp"
#include "fqr/fit_io.hpp"
#include "fqr/fpca.hpp"
#include "fqr/regression.hpp"
#include "fqr/simulation.hpp"

namespace fqr::cli {

namespace {

constexpr std::uint64_t kDefaultSeed = 20240101ull;

struct FitArgs {
  std::string input;
  std::string response;
  std::string method = "mm";
  int derivative = 0;
  int ncomp = 0;  // 0 = data-driven
  double var_frac = 0.9;
  std::uint64_t seed = kDefaultSeed;
  std::string out;
};

struct SimArgs {
  int model = 1;
  std::string upsilon = "U00";
  std::string contamination = "C0";
  int n = 300;
  int reps = 100;
  std::string methods = "ls,mm";
  std::uint64_t seed = kDefaultSeed;
  int grid_size = 100;
  int threads = 1;
  std::string quadrature = "riemann";
  std::string sweep;
  std::string out;
  std::string json_out;
};

struct PcaArgs {
  std::string input;
  std::string method = "classical";
  int ncomp = 2;
  std::uint64_t seed = kDefaultSeed;
  std::string out;
};

ContaminationKind parse_contam_kind(const std::string& head) {
  if (head == "C0") return ContaminationKind::c0;
  if (head == "C1") return ContaminationKind::c1;
  if (head == "C2") return ContaminationKind::c2;
  if (head == "C3") return ContaminationKind::c3;
  throw Error("invalid contamination spec: unknown scheme '" + head + "'");
}

void parse_contamination(const std::string& spec, ScenarioConfig* cfg) {
  const auto colon = spec.find(':');
  cfg->contamination = parse_contam_kind(spec.substr(0, colon));
  if (colon == std::string::npos) return;
  std::istringstream is(spec.substr(colon + 1));
  std::string kv;
  while (std::getline(is, kv, ',')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw Error("invalid contamination spec: expected key=value in '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    double value = 0.0;
    try {
      value = std::stod(kv.substr(eq + 1));
    } catch (const std::exception&) {
      throw Error("invalid contamination spec: bad number in '" + kv + "'");
    }
    if (key == "mu")
      cfg->mu = value;
    else if (key == "delta")
      cfg->delta = value;
    else
      throw Error("invalid contamination spec: unknown key '" + key + "'");
  }
}

UpsilonChoice parse_upsilon(int model, const std::string& s) {
  if (model == 1) {
    if (s == "U00") return UpsilonChoice::u00;
    if (s == "U01") return UpsilonChoice::u01;
    if (s == "U02") return UpsilonChoice::u02;
    throw Error("model 1 expects --upsilon U00, U01 or U02");
  }
  if (s == "linear") return UpsilonChoice::linear;
  if (s == "quadratic") return UpsilonChoice::quadratic;
  throw Error("model 2 expects --upsilon linear or quadratic");
}

std::vector<double> parse_sweep(const std::string& spec) {
  if (spec.rfind("mu=", 0) != 0) throw Error("--sweep expects mu=<lo>:<hi>:<step>");
  double lo = 0.0, hi = 0.0, step = 0.0;
  if (std::sscanf(spec.c_str() + 3, "%lf:%lf:%lf", &lo, &hi, &step) != 3 || step <= 0.0 ||
      hi < lo)
    throw Error("--sweep expects mu=<lo>:<hi>:<step> with step > 0");
  std::vector<double> points;
  for (double v = lo; v <= hi + 1e-9 * step; v += step) points.push_back(v);
  return points;
}

bool write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) return false;
  out << text;
  out.flush();
  return out.good();
}

int cmd_fit(const FitArgs& a) {
  CurveTable table = parse_curves_csv(a.input);
  if (!table.has_scalar(a.response)) {
    std::cerr << "response column not found: '" << a.response << "'\n";
    return 1;
  }
  std::vector<Curve> curves = table.curves();
  if (a.derivative == 1)
    for (Curve& c : curves) c = derivative(c);

  FitOptions opt;
  opt.method = a.method == "mm" ? FitMethod::mm : FitMethod::ls;
  if (a.ncomp > 0) opt.p = a.ncomp;
  opt.var_threshold = a.var_frac;
  opt.seed = a.seed;
  FitResult result = fit(curves, table.scalars.at(a.response), opt);

  AbscissaMap map{table.t_min, table.t_max, table.scale};
  if (!write_text(a.out, fit_to_json(result, map, a.derivative, a.seed))) {
    std::cerr << "cannot write output: " << a.out << "\n";
    return 1;
  }
  return 0;
}

struct SweepCell {
  double value;
  std::string scenario;
  int reps;
  int failures;
};

int cmd_simulate(const SimArgs& a) {
  ScenarioConfig cfg;
  cfg.model = a.model == 1 ? Model::model1 : Model::model2;
  cfg.upsilon = parse_upsilon(a.model, a.upsilon);
  parse_contamination(a.contamination, &cfg);
  cfg.n = a.n;
  cfg.n_reps = a.reps;
  cfg.grid_size = a.grid_size;
  cfg.seed = a.seed;

  StudyOptions opt;
  opt.with_ls = a.methods.find("ls") != std::string::npos;
  opt.with_mm = a.methods.find("mm") != std::string::npos;
  if (!opt.with_ls && !opt.with_mm) throw Error("--methods must name ls and/or mm");
  opt.n_threads = a.threads;
  opt.quadrature = a.quadrature == "trapezoid" ? StudyQuadrature::trapezoid
                                               : StudyQuadrature::riemann;

  std::ostringstream csv;
  csv << study_csv_header();
  std::vector<std::string> jsons;

  if (a.sweep.empty()) {
    cfg.validate();
    StudyReport report = run_study(cfg, opt);
    csv << study_csv_rows(report, cfg.label());
    jsons.push_back(study_json(report));
  } else {
    if (cfg.contamination == ContaminationKind::c0)
      throw Error("--sweep requires a contamination scheme with a mu parameter");
    // One study per sweep point, then a worst-case summary row per metric.
    std::map<std::string, SweepCell> maxima;  // key: estimator,metric,target
    for (double mu : parse_sweep(a.sweep)) {
      cfg.mu = mu;
      cfg.validate();
      StudyReport report = run_study(cfg, opt);
      const std::string rows = study_csv_rows(report, cfg.label());
      csv << rows;
      jsons.push_back(study_json(report));
      std::istringstream is(rows);
      std::string line;
      while (std::getline(is, line)) {
        // scenario,estimator,metric,target,value,reps,failures
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        const std::string key = cells[1] + "," + cells[2] + "," + cells[3];
        SweepCell sc{std::stod(cells[4]), cells[0], std::stoi(cells[5]),
                     std::stoi(cells[6])};
        auto it = maxima.find(key);
        if (it == maxima.end() || sc.value > it->second.value) maxima[key] = sc;
      }
    }
    for (const auto& [key, sc] : maxima) {
      const std::string scen = sc.scenario.substr(0, sc.scenario.find(":")) + ":max";
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.12g", sc.value);
      csv << scen << ',' << key << ',' << buf << ',' << sc.reps << ',' << sc.failures
          << '\n';
    }
  }

  if (!write_text(a.out, csv.str())) {
    std::cerr << "cannot write output: " << a.out << "\n";
    return 1;
  }
  if (!a.json_out.empty()) {
    std::string joined = jsons.size() == 1 ? jsons.front() : "[\n" + [&] {
      std::string acc;
      for (std::size_t i = 0; i < jsons.size(); ++i)
        acc += jsons[i] + (i + 1 < jsons.size() ? ",\n" : "\n");
      return acc;
    }() + "]\n";
    if (!write_text(a.json_out, joined)) {
      std::cerr << "cannot write output: " << a.json_out << "\n";
      return 1;
    }
  }
  return 0;
}

int cmd_pca(const PcaArgs& a) {
  CurveTable table = parse_curves_csv(a.input);
  std::vector<Curve> curves = table.curves();
  const int pool = static_cast<int>(
      std::min<Eigen::Index>(table.grid->size(), static_cast<Eigen::Index>(curves.size()) - 1));
  if (a.ncomp > pool) throw Error("--ncomp exceeds the number of estimable components");
  const PcaMethod method =
      a.method == "spherical" ? PcaMethod::spherical : PcaMethod::classical;
  PcaBasis basis = build_basis(curves, method, pool);

  std::ostringstream os;
  char buf[64];
  os << "# scales:";
  for (int j = 0; j < a.ncomp; ++j) {
    std::snprintf(buf, sizeof(buf), "%.12g", basis.scales(j));
    os << (j ? "," : " ") << buf;
  }
  os << "\nt,center";
  for (int j = 1; j <= a.ncomp; ++j) os << ",phi_" << j;
  os << '\n';
  for (Eigen::Index i = 0; i < table.grid->size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.12g", table.grid->points()(i));
    os << buf;
    std::snprintf(buf, sizeof(buf), "%.12g", basis.center.values(i));
    os << ',' << buf;
    for (int j = 0; j < a.ncomp; ++j) {
      std::snprintf(buf, sizeof(buf), "%.12g",
                    basis.directions[static_cast<std::size_t>(j)].values(i));
      os << ',' << buf;
    }
    os << '\n';
  }
  if (!write_text(a.out, os.str())) {
    std::cerr << "cannot write output: " << a.out << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Robust scalar-on-curve quadratic regression toolkit"};
  app.require_subcommand(1);

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a linear+quadratic model to curve data");
  fit_cmd->add_option("--input", fa.input, "curves CSV")->required();
  fit_cmd->add_option("--response", fa.response, "response column name")->required();
  fit_cmd->add_option("--method", fa.method)->check(CLI::IsMember({"ls", "mm"}))->required();
  fit_cmd->add_option("--derivative", fa.derivative)->check(CLI::IsMember({0, 1}));
  auto* ncomp_opt = fit_cmd->add_option("--ncomp", fa.ncomp)->check(CLI::PositiveNumber);
  fit_cmd->add_option("--var-frac", fa.var_frac)->check(CLI::Range(1e-6, 1.0))
      ->excludes(ncomp_opt);
  fit_cmd->add_option("--seed", fa.seed);
  fit_cmd->add_option("--out", fa.out, "output JSON")->required();

  SimArgs sa;
  auto* sim_cmd = app.add_subcommand("simulate", "Run a Monte Carlo study");
  sim_cmd->add_option("--model", sa.model)->check(CLI::IsMember({1, 2}))->required();
  sim_cmd->add_option("--upsilon", sa.upsilon)->required();
  sim_cmd->add_option("--contamination", sa.contamination);
  sim_cmd->add_option("--n", sa.n)->check(CLI::PositiveNumber);
  sim_cmd->add_option("--reps", sa.reps)->check(CLI::PositiveNumber);
  sim_cmd->add_option("--methods", sa.methods);
  sim_cmd->add_option("--seed", sa.seed);
  sim_cmd->add_option("--grid", sa.grid_size)->check(CLI::PositiveNumber);
  sim_cmd->add_option("--threads", sa.threads)->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--quadrature", sa.quadrature, "estimation quadrature")
      ->check(CLI::IsMember({"riemann", "trapezoid"}));
  sim_cmd->add_option("--sweep", sa.sweep, "mu=<lo>:<hi>:<step>");
  sim_cmd->add_option("--out", sa.out, "output CSV")->required();
  sim_cmd->add_option("--json", sa.json_out, "optional JSON report");

  PcaArgs pa;
  auto* pca_cmd = app.add_subcommand("pca", "Principal components of a curve sample");
  pca_cmd->add_option("--input", pa.input)->required();
  pca_cmd->add_option("--method", pa.method)
      ->check(CLI::IsMember({"classical", "spherical"}))
      ->required();
  pca_cmd->add_option("--ncomp", pa.ncomp)->check(CLI::PositiveNumber)->required();
  pca_cmd->add_option("--seed", pa.seed);
  pca_cmd->add_option("--out", pa.out)->required();

  std::vector<const char*> argv;
  argv.push_back("fqr");
  for (const std::string& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fa);
    if (sim_cmd->parsed()) return cmd_simulate(sa);
    if (pca_cmd->parsed()) return cmd_pca(pa);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace fqr::cli
