#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dagopt/bnb.hpp"
#include "dagopt/graphs.hpp"

namespace dagopt {

/// File or format problem; carries the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct GraphText {
  int m = 0;
  std::vector<std::pair<int, int>> pairs;
};

inline GraphText parse_graph_text(std::istream& in, const std::string& name) {
  GraphText out;
  std::string line;
  int lineno = 0;
  bool have_m = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    if (!have_m) {
      if (!(ls >> out.m) || out.m < 0)
        throw IoError(name + ":" + std::to_string(lineno) + ": expected a node count");
      have_m = true;
      continue;
    }
    int u = 0, v = 0;
    if (!(ls >> u >> v))
      throw IoError(name + ":" + std::to_string(lineno) + ": expected two node indices");
    if (u < 0 || v < 0 || u >= out.m || v >= out.m || u == v)
      throw IoError(name + ":" + std::to_string(lineno) + ": pair (" + std::to_string(u) + "," +
                    std::to_string(v) + ") invalid for m = " + std::to_string(out.m));
    out.pairs.emplace_back(u, v);
  }
  if (!have_m) throw IoError(name + ": empty graph file");
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << std::setprecision(17);
  return out;
}

}  // namespace detail

inline DirectedGraph read_directed_graph(std::istream& in, const std::string& name = "<stream>") {
  const auto t = detail::parse_graph_text(in, name);
  DirectedGraph g(t.m);
  for (auto [u, v] : t.pairs) g.add_arc({u, v});
  return g;
}

inline UndirectedGraph read_undirected_graph(std::istream& in, const std::string& name = "<stream>") {
  const auto t = detail::parse_graph_text(in, name);
  UndirectedGraph g(t.m);
  for (auto [u, v] : t.pairs) g.add_edge(u, v);
  return g;
}

inline DirectedGraph read_directed_graph(const std::string& path) {
  auto in = detail::open_in(path);
  return read_directed_graph(in, path);
}

inline UndirectedGraph read_undirected_graph(const std::string& path) {
  auto in = detail::open_in(path);
  return read_undirected_graph(in, path);
}

inline void write_graph(std::ostream& out, const DirectedGraph& g) {
  out << g.num_nodes() << '\n';
  for (const Arc& a : g.arcs()) out << a.from << ' ' << a.to << '\n';
}

inline void write_graph(std::ostream& out, const UndirectedGraph& g) {
  out << g.num_nodes() << '\n';
  for (const Edge& e : g.edges()) out << e.u << ' ' << e.v << '\n';
}

template <class Graph>
void write_graph(const std::string& path, const Graph& g) {
  auto out = detail::open_out(path);
  write_graph(out, g);
  if (!out) throw IoError(path + ": write failed");
}

/// Headerless numeric CSV; every row must have the same width.
inline Eigen::MatrixXd read_csv_matrix(std::istream& in, const std::string& name = "<stream>") {
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw IoError(name + ":" + std::to_string(lineno) + ": non-numeric cell '" + cell + "'");
      }
      if (cell.find_first_not_of(" \t\r", used) != std::string::npos)
        throw IoError(name + ":" + std::to_string(lineno) + ": non-numeric cell '" + cell + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(name + ":" + std::to_string(lineno) + ": expected " + std::to_string(rows.front().size()) +
                    " columns, found " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(name + ": no data rows");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return x;
}

inline Eigen::MatrixXd read_csv_matrix(const std::string& path) {
  auto in = detail::open_in(path);
  return read_csv_matrix(in, path);
}

inline void write_csv_matrix(std::ostream& out, const Eigen::MatrixXd& x) {
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) out << (j ? "," : "") << x(i, j);
    out << '\n';
  }
}

inline void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& x) {
  auto out = detail::open_out(path);
  write_csv_matrix(out, x);
  if (!out) throw IoError(path + ": write failed");
}

/// Infinite values become null.
inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline nlohmann::json report_to_json(const SolveReport& r) {
  nlohmann::json j;
  j["status"] = to_string(r.status);
  j["ub"] = finite_or_null(r.ub);
  j["lb"] = finite_or_null(r.lb);
  j["gap"] = finite_or_null(r.gap);
  j["rgap"] = finite_or_null(r.rgap);
  j["nodes_explored"] = r.nodes_explored;
  j["cuts_added"] = r.cuts_added;
  j["relaxations"] = r.relaxations;
  j["wall_seconds"] = r.wall_seconds;
  j["root_lb"] = finite_or_null(r.root_lb);
  j["big_m_binding"] = r.big_m_binding;
  nlohmann::json arcs = nlohmann::json::array();
  for (const Arc& a : r.dag.arcs()) {
    const auto it = r.beta.find(a);
    arcs.push_back({a.from, a.to, it == r.beta.end() ? 0.0 : it->second});
  }
  j["arcs"] = std::move(arcs);
  j["warnings"] = r.warnings;
  j["config"] = {{"mode", to_string(r.mode)},
                 {"encoding", to_string(r.encoding)},
                 {"lambda_n", r.lambda_n},
                 {"mu", r.mu},
                 {"big_m", r.big_m},
                 {"abs_gap", r.stop.abs_gap},
                 {"rel_gap", r.stop.rel_gap},
                 {"time_limit", finite_or_null(r.stop.time_limit)},
                 {"node_limit", r.stop.node_limit}};
  return j;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError(path + ": write failed");
}

inline nlohmann::json read_json(const std::string& path) {
  auto in = detail::open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace dagopt
