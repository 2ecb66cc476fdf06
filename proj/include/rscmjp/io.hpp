// Copyright 2026 The rscmjp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RSCMJP_IO_HPP_
#define RSCMJP_IO_HPP_

#include <fmt/format.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "rscmjp/error.hpp"
#include "rscmjp/estimators.hpp"
#include "rscmjp/model.hpp"
#include "rscmjp/simulator.hpp"

namespace rscmjp::io {

using nlohmann::json;

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

/// Shortest representation is not needed; 17 significant digits round-trip.
inline std::string num(double v) { return fmt::format("{:.17g}", v); }

namespace detail {

inline double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw IoError(where + ": expected a number");
  return v.get<double>();
}

/// Accepts a nested (rows of `cols`) or flat row-major array.
inline Eigen::MatrixXd read_matrix(const json& j, int rows, int cols, const std::string& where) {
  if (!j.is_array()) throw IoError(where + ": expected an array");
  Eigen::MatrixXd out(rows, cols);
  if (!j.empty() && j.front().is_array()) {
    if (static_cast<int>(j.size()) != rows) throw IoError(where + ": expected " + std::to_string(rows) + " rows");
    for (int r = 0; r < rows; ++r) {
      if (static_cast<int>(j[r].size()) != cols)
        throw IoError(where + ": row " + std::to_string(r + 1) + " needs " + std::to_string(cols) + " entries");
      for (int c = 0; c < cols; ++c) out(r, c) = as_number(j[r][c], where);
    }
  } else {
    if (static_cast<int>(j.size()) != rows * cols)
      throw IoError(where + ": expected " + std::to_string(rows * cols) + " entries");
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) out(r, c) = as_number(j[r * cols + c], where);
  }
  return out;
}

/// An intensity matrix with an optional diagonal: nested rows of p entries
/// (diagonal may be null), nested rows of p-1 off-diagonal entries, or the
/// flat row-major equivalents. An omitted diagonal is reconstructed.
inline Eigen::MatrixXd read_generator(const json& j, int p, const std::string& where) {
  if (!j.is_array()) throw IoError(where + ": expected an array");
  const double missing = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(p, p);
  std::vector<const json*> flat;
  if (!j.empty() && j.front().is_array()) {
    if (static_cast<int>(j.size()) != p) throw IoError(where + ": expected " + std::to_string(p) + " rows");
    for (const auto& row : j)
      for (const auto& v : row) flat.push_back(&v);
  } else {
    for (const auto& v : j) flat.push_back(&v);
  }
  const bool with_diag = static_cast<int>(flat.size()) == p * p;
  if (!with_diag && static_cast<int>(flat.size()) != p * (p - 1))
    throw IoError(where + ": expected p*p entries or p*(p-1) off-diagonal entries");
  std::size_t k = 0;
  for (int x = 0; x < p; ++x)
    for (int y = 0; y < p; ++y) {
      if (y == x && !with_diag) {
        Q(x, y) = missing;
        continue;
      }
      const json& v = *flat[k++];
      Q(x, y) = (y == x && v.is_null()) ? missing : as_number(v, where);
    }
  for (int x = 0; x < p; ++x) {
    if (!std::isnan(Q(x, x))) continue;
    double off = 0.0;
    for (int y = 0; y < p; ++y)
      if (y != x) off += Q(x, y);
    Q(x, x) = -off;
  }
  return Q;
}

}  // namespace detail

/// Parses {"p", "M", "alpha", "phi", "Q"}. Simplex sums within 1e-10 are
/// renormalized; anything else invalid is rejected.
inline ModelParams params_from_json(const json& j) {
  if (!j.is_object()) throw IoError("parameter file: expected an object");
  for (const char* key : {"p", "M", "alpha", "phi", "Q"})
    if (!j.contains(key)) throw IoError(std::string("parameter file: missing key '") + key + "'");
  ModelParams theta;
  theta.p = j.at("p").get<int>();
  theta.M = j.at("M").get<int>();
  if (theta.p < 2 || theta.M < 1) {
    std::vector<std::string> v;
    if (theta.p < 2) v.push_back("p must be >= 2");
    if (theta.M < 1) v.push_back("M must be >= 1");
    throw ValidationError(std::move(v));
  }
  theta.alpha = detail::read_matrix(j.at("alpha"), theta.p, 1, "alpha");
  theta.phi = detail::read_matrix(j.at("phi"), theta.p, theta.M, "phi");
  const json& qs = j.at("Q");
  if (!qs.is_array() || static_cast<int>(qs.size()) != theta.M)
    throw IoError("Q: expected a list of M matrices");
  for (int m = 0; m < theta.M; ++m)
    theta.q.push_back(detail::read_generator(qs[m], theta.p, "Q[" + std::to_string(m + 1) + "]"));
  return normalized(std::move(theta));
}

inline json params_to_json(const ModelParams& theta) {
  json j;
  j["p"] = theta.p;
  j["M"] = theta.M;
  j["alpha"] = std::vector<double>(theta.alpha.data(), theta.alpha.data() + theta.alpha.size());
  json phi = json::array();
  for (int x = 0; x < theta.p; ++x) {
    json row = json::array();
    for (int m = 0; m < theta.M; ++m) row.push_back(theta.phi(x, m));
    phi.push_back(row);
  }
  j["phi"] = phi;
  json qs = json::array();
  for (const auto& Q : theta.q) {
    json mat = json::array();
    for (int x = 0; x < theta.p; ++x) {
      json row = json::array();
      for (int y = 0; y < theta.p; ++y) row.push_back(Q(x, y));
      mat.push_back(row);
    }
    qs.push_back(mat);
  }
  j["Q"] = qs;
  return j;
}

inline ModelParams load_params(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  try {
    return params_from_json(j);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

inline void save_params(const std::filesystem::path& path, const ModelParams& theta) {
  write_text_file(path, params_to_json(theta).dump(2) + "\n");
}

/// One JSON record per line: {"regime": m, "events": [[state, time], ...], "horizon": h}.
/// States and regimes are 1-based.
inline std::string paths_to_jsonl(const std::vector<Path>& paths) {
  std::string out;
  for (const auto& path : paths) {
    out += fmt::format("{{\"regime\": {}, \"events\": [", path.regime + 1);
    for (std::size_t i = 0; i < path.events.size(); ++i)
      out += fmt::format("{}[{}, {}]", i ? ", " : "", path.events[i].state + 1, num(path.events[i].time));
    out += fmt::format("], \"horizon\": {}}}\n", num(path.horizon));
  }
  return out;
}

inline std::vector<Path> paths_from_jsonl(const std::string& text) {
  std::vector<Path> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Path path;
      path.regime = j.at("regime").get<int>() - 1;
      path.horizon = j.at("horizon").get<double>();
      for (const auto& e : j.at("events")) path.events.push_back({e.at(0).get<int>() - 1, e.at(1).get<double>()});
      if (path.events.empty()) throw IoError("path has no events");
      out.push_back(std::move(path));
    } catch (const json::exception& e) {
      throw IoError("paths line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

/// CSV header: path_id, B_1..B_p, N_11..N_pp, T_1..T_p.
inline std::string stats_to_csv(const Sample& sample) {
  if (sample.empty()) return "path_id\n";
  const int p = sample.front().p();
  std::string out = "path_id";
  for (int x = 1; x <= p; ++x) out += fmt::format(",B_{}", x);
  for (int x = 1; x <= p; ++x)
    for (int y = 1; y <= p; ++y) out += fmt::format(",N_{}{}", x, y);
  for (int x = 1; x <= p; ++x) out += fmt::format(",T_{}", x);
  out += '\n';
  for (std::size_t k = 0; k < sample.size(); ++k) {
    const auto& s = sample[k];
    out += std::to_string(k + 1);
    for (int x = 0; x < p; ++x) out += x == s.initial_state ? ",1" : ",0";
    for (int x = 0; x < p; ++x)
      for (int y = 0; y < p; ++y) out += "," + std::to_string(s.N(x, y));
    for (int x = 0; x < p; ++x) out += "," + num(s.T(x));
    out += '\n';
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw IoError(where + ": not a number: '" + s + "'");
  return v;
}

}  // namespace detail

/// Parses the stats CSV; each path's horizon is its total occupation time.
inline Sample stats_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("stats csv: empty input");
  const auto header = detail::split_csv_line(line);
  const int cols = static_cast<int>(header.size());
  int p = 0;
  while (1 + 2 * p + p * p < cols) ++p;
  if (p < 2 || 1 + 2 * p + p * p != cols || header[0] != "path_id")
    throw IoError("stats csv: header does not match path_id,B_1..B_p,N_11..N_pp,T_1..T_p");
  Sample out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv_line(line);
    const std::string where = "stats csv line " + std::to_string(lineno);
    if (static_cast<int>(f.size()) != cols) throw IoError(where + ": wrong number of fields");
    PathStats s;
    s.N = Eigen::MatrixXi::Zero(p, p);
    s.T = Eigen::VectorXd::Zero(p);
    int ones = 0;
    for (int x = 0; x < p; ++x)
      if (detail::parse_double(f[1 + x], where) == 1.0) {
        s.initial_state = x;
        ++ones;
      }
    if (ones != 1) throw IoError(where + ": exactly one B_x must be 1");
    for (int x = 0; x < p; ++x)
      for (int y = 0; y < p; ++y)
        s.N(x, y) = static_cast<int>(detail::parse_double(f[1 + p + x * p + y], where));
    for (int x = 0; x < p; ++x) s.T(x) = detail::parse_double(f[1 + p + p * p + x], where);
    s.horizon = s.T.sum();
    auto v = validate(s);
    if (!v.empty()) throw IoError(where + ": " + v.front());
    out.push_back(std::move(s));
  }
  if (out.empty()) throw IoError("stats csv: no rows");
  return out;
}

/// Row-major CSV with parameter labels as header and first column.
inline std::string matrix_to_csv(const Eigen::MatrixXd& a, const ParamLayout& layout) {
  std::string out = "param";
  for (const auto& l : layout.labels()) out += "," + l;
  out += '\n';
  for (int i = 0; i < a.rows(); ++i) {
    out += layout.label(i);
    for (int j = 0; j < a.cols(); ++j) out += "," + num(a(i, j));
    out += '\n';
  }
  return out;
}

/// Columns iter, loglik, step_error (empty on the starting row).
inline std::string trace_to_csv(const FitResult& r) {
  std::string out = "iter,loglik,step_error\n";
  for (std::size_t i = 0; i < r.loglik_trace.size(); ++i)
    out += fmt::format("{},{},{}\n", i, num(r.loglik_trace[i]), i == 0 ? "" : num(r.error_trace[i - 1]));
  return out;
}

inline std::string weighted_stats_to_csv(const WeightedStats& ws) {
  std::string out = "quantity,x,y,m,value\n";
  const auto p = ws.Bhat.rows();
  const auto M = ws.Bhat.cols();
  for (Eigen::Index m = 0; m < M; ++m)
    for (Eigen::Index x = 0; x < p; ++x) {
      out += fmt::format("Bhat,{},,{},{}\n", x + 1, m + 1, num(ws.Bhat(x, m)));
      out += fmt::format("That,{},,{},{}\n", x + 1, m + 1, num(ws.That(x, m)));
      for (Eigen::Index y = 0; y < p; ++y)
        if (y != x)
          out += fmt::format("Nhat,{},{},{},{}\n", x + 1, y + 1, m + 1,
                             num(ws.Nhat[static_cast<std::size_t>(m)](x, y)));
    }
  return out;
}

}  // namespace rscmjp::io

#endif  // RSCMJP_IO_HPP_
