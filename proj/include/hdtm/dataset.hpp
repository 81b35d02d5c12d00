#pragma once

#include <Eigen/Dense>
#include <set>
#include <string>
#include <vector>

#include "hdtm/errors.hpp"

namespace hdtm {

// A response vector with its regressor matrix. Rows are observations.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  std::string response_name = "y";
  std::vector<std::string> column_names;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return X.cols(); }

  void validate() const {
    if (y.size() < 2) throw InputError("dataset: need at least two observations");
    if (X.rows() != y.size()) throw InputError("dataset: X rows and y length disagree");
    if (!y.allFinite() || !X.allFinite()) throw InputError("dataset: non-finite entries");
    if (!column_names.empty()) {
      if (static_cast<Eigen::Index>(column_names.size()) != X.cols())
        throw InputError("dataset: column name count and X columns disagree");
      std::set<std::string> seen(column_names.begin(), column_names.end());
      if (seen.size() != column_names.size()) throw InputError("dataset: duplicate column names");
    }
  }

  Dataset resample_rows(const std::vector<Eigen::Index>& idx) const {
    Dataset out;
    out.response_name = response_name;
    out.column_names = column_names;
    out.y.resize(idx.size());
    out.X.resize(idx.size(), X.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.y(static_cast<Eigen::Index>(i)) = y(idx[i]);
      out.X.row(static_cast<Eigen::Index>(i)) = X.row(idx[i]);
    }
    return out;
  }
};

}  // namespace hdtm
