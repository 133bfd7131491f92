#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "fqr/funcspace.hpp"

namespace fqr {

// Parsed curve file. The header is `id[,<scalar columns...>],t_1,...,t_M`;
// every data row carries an id, the scalar values and exactly M curve values.
// Abscissae are rescaled onto [0,1]; the affine map is kept for reporting.
struct CurveTable {
  std::vector<std::string> ids;
  GridPtr grid;                          // rescaled to [0,1]
  Eigen::MatrixXd values;                // n x M
  std::map<std::string, Eigen::VectorXd> scalars;  // e.g. the response column
  double t_min = 0.0;                    // original abscissa range
  double t_max = 1.0;
  double scale = 1.0;                    // 1 / (t_max - t_min)

  std::vector<Curve> curves() const;
  bool has_scalar(const std::string& name) const { return scalars.count(name) > 0; }
};

CurveTable parse_curves_csv(const std::string& path);
CurveTable parse_curves_csv_text(const std::string& text);

// Writer used by tests and the synthetic-data helpers.
void write_curves_csv(const std::string& path, const std::vector<std::string>& ids,
                      const std::vector<double>& abscissae, const Eigen::MatrixXd& values,
                      const std::string& response_name = "",
                      const Eigen::VectorXd& response = Eigen::VectorXd());

}  // namespace fqr
