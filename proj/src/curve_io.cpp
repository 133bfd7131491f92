#include "fqr/curve_io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fqr {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    // trim surrounding whitespace
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

bool parse_number(const std::string& s, double* out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || end != s.c_str() + s.size() || !std::isfinite(v)) return false;
  *out = v;
  return true;
}

}  // namespace

std::vector<Curve> CurveTable::curves() const {
  std::vector<Curve> out;
  out.reserve(static_cast<std::size_t>(values.rows()));
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    out.emplace_back(grid, values.row(i).transpose());
  return out;
}

CurveTable parse_curves_csv_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ParseError("curve file is empty", 1);
  const std::vector<std::string> header = split_csv_line(line);
  if (header.empty() || header[0] != "id")
    throw ParseError("curve file header must start with an 'id' column", 1, 1);

  // Scalar columns sit between `id` and the first numeric abscissa.
  std::size_t first_t = 1;
  double tmp = 0.0;
  while (first_t < header.size() && !parse_number(header[first_t], &tmp)) ++first_t;
  if (header.size() - first_t < 2)
    throw ParseError("curve file needs at least 2 abscissa columns", 1);
  std::vector<std::string> scalar_names(header.begin() + 1,
                                        header.begin() + static_cast<std::ptrdiff_t>(first_t));
  const std::size_t m = header.size() - first_t;

  std::vector<double> abscissae(m);
  for (std::size_t j = 0; j < m; ++j) {
    if (!parse_number(header[first_t + j], &abscissae[j]))
      throw ParseError("non-numeric abscissa in header", 1, first_t + j + 1);
    if (j > 0 && abscissae[j] <= abscissae[j - 1])
      throw ParseError("abscissae must be strictly increasing", 1, first_t + j + 1);
  }

  CurveTable table;
  table.t_min = abscissae.front();
  table.t_max = abscissae.back();
  table.scale = 1.0 / (table.t_max - table.t_min);
  std::vector<double> unit(m);
  for (std::size_t j = 0; j < m; ++j)
    unit[j] = (abscissae[j] - table.t_min) * table.scale;
  unit.front() = 0.0;
  unit.back() = 1.0;
  table.grid = Grid::from_points(unit);

  std::vector<std::vector<double>> rows;
  std::vector<std::vector<double>> scalar_cols(scalar_names.size());
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError("row " + std::to_string(line_no) + " has " +
                           std::to_string(cells.size()) + " cells, expected " +
                           std::to_string(header.size()),
                       line_no);
    table.ids.push_back(cells[0]);
    for (std::size_t j = 0; j < scalar_names.size(); ++j) {
      double v = 0.0;
      if (!parse_number(cells[1 + j], &v))
        throw ParseError("non-numeric value in row " + std::to_string(line_no), line_no,
                         2 + j);
      scalar_cols[j].push_back(v);
    }
    std::vector<double> row(m);
    for (std::size_t j = 0; j < m; ++j) {
      if (!parse_number(cells[first_t + j], &row[j]))
        throw ParseError("non-numeric value in row " + std::to_string(line_no), line_no,
                         first_t + j + 1);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("curve file has no data rows", line_no);

  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < m; ++j)
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  for (std::size_t j = 0; j < scalar_names.size(); ++j) {
    table.scalars[scalar_names[j]] = Eigen::Map<Eigen::VectorXd>(
        scalar_cols[j].data(), static_cast<Eigen::Index>(scalar_cols[j].size()));
  }
  return table;
}

CurveTable parse_curves_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open curve file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_curves_csv_text(buf.str());
}

void write_curves_csv(const std::string& path, const std::vector<std::string>& ids,
                      const std::vector<double>& abscissae, const Eigen::MatrixXd& values,
                      const std::string& response_name, const Eigen::VectorXd& response) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write curve file: " + path);
  out << "id";
  if (!response_name.empty()) out << ',' << response_name;
  char buf[64];
  for (double t : abscissae) {
    std::snprintf(buf, sizeof(buf), "%.12g", t);
    out << ',' << buf;
  }
  out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    out << ids[static_cast<std::size_t>(i)];
    if (!response_name.empty()) {
      std::snprintf(buf, sizeof(buf), "%.17g", response(i));
      out << ',' << buf;
    }
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", values(i, j));
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace fqr
