#pragma once

// Dataset ingestion (RFC-4180-style CSV, header required), result
// serialization to JSON, and Q-Q plot data emission. Missing or
// non-numeric cells are hard errors carrying row/column coordinates.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hdtm/dataset.hpp"
#include "hdtm/errors.hpp"
#include "hdtm/estimator.hpp"
#include "hdtm/nuisance.hpp"
#include "hdtm/stats.hpp"
#include "hdtm/version.hpp"

namespace hdtm {

using ordered_json = nlohmann::ordered_json;

namespace detail {

// Splits one CSV record honoring quoted fields; the record may span lines
// when a quoted field contains a newline, so the reader works on the whole
// buffer with a cursor.
inline bool next_record(const std::string& buf, std::size_t& pos, std::vector<std::string>& out) {
  out.clear();
  if (pos >= buf.size()) return false;
  std::string field;
  bool quoted = false;
  bool any = false;
  while (pos < buf.size()) {
    const char ch = buf[pos];
    if (quoted) {
      if (ch == '"') {
        if (pos + 1 < buf.size() && buf[pos + 1] == '"') {
          field += '"';
          pos += 2;
        } else {
          quoted = false;
          ++pos;
        }
      } else {
        field += ch;
        ++pos;
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
      any = true;
      ++pos;
    } else if (ch == ',') {
      out.push_back(std::move(field));
      field.clear();
      any = true;
      ++pos;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && pos + 1 < buf.size() && buf[pos + 1] == '\n') ++pos;
      ++pos;
      if (!any && field.empty()) continue;  // skip blank lines
      out.push_back(std::move(field));
      return true;
    } else {
      field += ch;
      any = true;
      ++pos;
    }
  }
  if (!any && field.empty()) return false;
  out.push_back(std::move(field));
  return true;
}

inline double parse_cell(const std::string& cell, long row, const std::string& column) {
  const char* b = cell.data();
  const char* e = b + cell.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\t')) --e;
  if (b == e) throw ParseError("csv: missing value", row, column);
  double v = 0.0;
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e)
    throw ParseError("csv: non-numeric value '" + cell + "'", row, column);
  if (!std::isfinite(v)) throw ParseError("csv: non-finite value", row, column);
  return v;
}

}  // namespace detail

inline Dataset read_csv(const std::string& path, const std::string& response_column,
                        const std::vector<std::string>& drop_columns = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("csv: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();

  std::size_t pos = 0;
  std::vector<std::string> header;
  if (!detail::next_record(buf, pos, header) || header.empty())
    throw ParseError("csv: missing header row");
  {
    std::set<std::string> seen(header.begin(), header.end());
    if (seen.size() != header.size()) throw ParseError("csv: duplicate column names in header");
  }

  std::set<std::string> drop(drop_columns.begin(), drop_columns.end());
  for (const auto& d : drop_columns)
    if (std::find(header.begin(), header.end(), d) == header.end())
      throw InputError("csv: drop column '" + d + "' not present");

  long response_idx = -1;
  std::vector<long> keep;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == response_column)
      response_idx = static_cast<long>(j);
    else if (!drop.count(header[j]))
      keep.push_back(static_cast<long>(j));
  }
  if (response_idx < 0)
    throw InputError("csv: response column '" + response_column + "' not found");
  if (keep.empty()) throw InputError("csv: no regressor columns left");

  std::vector<double> ys;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> record;
  long row_no = 0;
  while (detail::next_record(buf, pos, record)) {
    ++row_no;
    if (record.size() != header.size())
      throw ParseError("csv: expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(record.size()),
                       row_no);
    ys.push_back(detail::parse_cell(record[static_cast<std::size_t>(response_idx)], row_no,
                                    response_column));
    std::vector<double> xrow(keep.size());
    for (std::size_t k = 0; k < keep.size(); ++k)
      xrow[k] = detail::parse_cell(record[static_cast<std::size_t>(keep[k])], row_no,
                                   header[static_cast<std::size_t>(keep[k])]);
    rows.push_back(std::move(xrow));
  }
  if (rows.size() < 2) throw ParseError("csv: need at least two data rows");

  Dataset d;
  d.response_name = response_column;
  for (long j : keep) d.column_names.push_back(header[static_cast<std::size_t>(j)]);
  d.y.resize(static_cast<Eigen::Index>(ys.size()));
  d.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d.y(static_cast<Eigen::Index>(i)) = ys[i];
    for (std::size_t k = 0; k < keep.size(); ++k)
      d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  d.validate();
  if ((d.y.array() - d.y(0)).abs().maxCoeff() == 0.0)
    throw ParseError("csv: response column is constant");
  return d;
}

inline ordered_json result_to_json(const EstimationResult& r, const ordered_json& config) {
  ordered_json j;
  j["tool"] = "hdtm";
  j["version"] = version;
  if (!config.is_null()) j["config"] = config;
  j["theta_hat"] = r.theta_hat;
  j["mean_psi_at_hat"] = r.mean_psi_at_hat;
  j["epsilon_realized"] = r.epsilon_realized;
  j["multi_root"] = r.multi_root;
  if (r.sigma_boot) j["sigma_boot"] = *r.sigma_boot;
  if (r.sigma_plug) j["sigma_plug"] = *r.sigma_plug;
  if (r.ci) j["ci"] = {{"lo", r.ci->first}, {"hi", r.ci->second}, {"alpha", r.alpha}};
  j["alpha"] = r.alpha;
  j["n_boot"] = r.n_boot;
  j["boot_failures"] = r.boot_failures;
  j["seed"] = r.seed;
  ordered_json trace = ordered_json::array();
  for (const auto& t : r.solver_trace) trace.push_back({t.theta, t.mean_psi});
  j["solver_trace"] = trace;
  return j;
}

inline void write_result(const EstimationResult& r, const std::string& path,
                         const ordered_json& config = nullptr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("result: cannot write '" + path + "'");
  out << result_to_json(r, config).dump(2) << "\n";
  if (!out) throw InputError("result: write failed for '" + path + "'");
}

inline EstimationResult read_result(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("result: cannot open '" + path + "'");
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("result: invalid JSON: ") + e.what());
  }
  EstimationResult r;
  r.theta_hat = j.at("theta_hat").get<double>();
  r.mean_psi_at_hat = j.value("mean_psi_at_hat", 0.0);
  r.epsilon_realized = j.value("epsilon_realized", 0.0);
  r.multi_root = j.value("multi_root", false);
  if (j.contains("sigma_boot")) r.sigma_boot = j["sigma_boot"].get<double>();
  if (j.contains("sigma_plug")) r.sigma_plug = j["sigma_plug"].get<double>();
  r.alpha = j.value("alpha", 0.05);
  if (j.contains("ci"))
    r.ci = std::make_pair(j["ci"].at("lo").get<double>(), j["ci"].at("hi").get<double>());
  r.n_boot = j.value("n_boot", 0);
  r.boot_failures = j.value("boot_failures", 0);
  r.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("solver_trace"))
    for (const auto& t : j["solver_trace"])
      r.solver_trace.push_back({t.at(0).get<double>(), t.at(1).get<double>()});
  return r;
}

struct QqPoint {
  double theoretical = 0.0;
  double sample = 0.0;
};

// Sorted standardized residuals against standard normal quantiles at
// plotting positions (i - 0.5)/n.
inline std::vector<QqPoint> qq_data(const Eigen::VectorXd& residuals) {
  const Eigen::Index n = residuals.size();
  if (n < 1) throw InputError("qq: empty residual vector");
  std::vector<double> r(residuals.data(), residuals.data() + n);
  std::sort(r.begin(), r.end());
  const double m = compensated_mean(r.data(), r.size());
  double sd = 0.0;
  for (double v : r) sd += (v - m) * (v - m);
  sd = std::sqrt(sd / static_cast<double>(n));
  if (!(sd > 0.0)) sd = 1.0;  // constant residuals plot at zero
  std::vector<QqPoint> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)].theoretical =
        normal_icdf((static_cast<double>(i) + 0.5) / static_cast<double>(n));
    out[static_cast<std::size_t>(i)].sample = (r[static_cast<std::size_t>(i)] - m) / sd;
  }
  return out;
}

inline std::vector<QqPoint> qq_data(const NuisanceAtTheta& nuis) { return qq_data(nuis.resid); }

inline double qq_sup_deviation(const std::vector<QqPoint>& table) {
  double worst = 0.0;
  for (const auto& pt : table) worst = std::max(worst, std::abs(pt.sample - pt.theoretical));
  return worst;
}

inline void write_qq_csv(const std::vector<QqPoint>& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("qq: cannot write '" + path + "'");
  out << "theoretical,sample\n";
  char line[80];
  for (const auto& pt : table) {
    std::snprintf(line, sizeof line, "%.17g,%.17g\n", pt.theoretical, pt.sample);
    out << line;
  }
}

}  // namespace hdtm
