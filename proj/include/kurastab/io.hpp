#ifndef KURASTAB_IO_HPP
#define KURASTAB_IO_HPP

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "network.hpp"

namespace kurastab {

enum class NetworkFormat { json, csv };

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Reactance edges become couplings K = 1/x (unit voltage magnitudes).
inline double coupling_from(bool has_k, double k, bool has_x, double x, const std::string& where) {
  if (has_k == has_x) throw ValidationError(where + ": edge needs exactly one of k or x");
  if (has_k) return k;
  if (!(x > 0.0)) throw ValidationError(where + ": reactance must be positive");
  return 1.0 / x;
}

inline Network assemble(std::vector<long long> ids, std::vector<double> omegas, std::vector<std::string> labels,
                        const std::vector<Edge>& raw_edges, const std::string& source) {
  const std::size_t n = ids.size();
  if (n == 0) throw ValidationError(source + ": no nodes");
  std::vector<int> seen(n, 0);
  Eigen::VectorXd omega(static_cast<Eigen::Index>(n));
  std::vector<std::string> ordered_labels(labels.empty() ? 0 : n);
  for (std::size_t r = 0; r < n; ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= n) {
      throw ValidationError(source + ": node ids must be 0.." + std::to_string(n - 1) + ", got " +
                            std::to_string(ids[r]));
    }
    const auto id = static_cast<std::size_t>(ids[r]);
    if (seen[id]++) throw ValidationError(source + ": duplicate node id " + std::to_string(id));
    omega[static_cast<Eigen::Index>(id)] = omegas[r];
    if (!labels.empty()) ordered_labels[id] = labels[r];
  }
  bool any_label = false;
  for (const auto& l : ordered_labels) any_label = any_label || !l.empty();
  if (!any_label) ordered_labels.clear();
  try {
    return Network(n, std::move(omega), raw_edges, std::move(ordered_labels));
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  return out;
}

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                                       std::vector<std::string>& header) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    if (!have_header) {
      header = std::move(cells);
      have_header = true;
    } else {
      if (cells.size() != header.size()) {
        throw ValidationError(path.string() + ": row has " + std::to_string(cells.size()) + " cells, header has " +
                              std::to_string(header.size()));
      }
      rows.push_back(std::move(cells));
    }
  }
  if (!have_header) throw ValidationError(path.string() + ": empty file");
  return rows;
}

inline int column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

inline double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(where + ": not a number: '" + s + "'");
  }
}

inline long long parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(where + ": not an integer: '" + s + "'");
  }
}

}  // namespace detail

/// Parse the network JSON schema:
/// {"nodes":[{"id":int,"omega":float[,"label":str]}...],
///  "edges":[{"u":int,"v":int,"k":float} | {"u":int,"v":int,"x":float}...]}
inline Network parse_network_json(const std::string& text, const std::string& source = "network json") {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(source + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc.contains("edges") || !doc["nodes"].is_array() ||
      !doc["edges"].is_array()) {
    throw ValidationError(source + ": expected object with array fields 'nodes' and 'edges'");
  }
  std::vector<long long> ids;
  std::vector<double> omegas;
  std::vector<std::string> labels;
  bool labelled = false;
  for (std::size_t r = 0; r < doc["nodes"].size(); ++r) {
    const auto& node = doc["nodes"][r];
    const std::string where = source + ": nodes[" + std::to_string(r) + "]";
    if (!node.is_object() || !node.contains("id") || !node["id"].is_number_integer() || !node.contains("omega") ||
        !node["omega"].is_number()) {
      throw ValidationError(where + ": needs integer 'id' and numeric 'omega'");
    }
    ids.push_back(node["id"].get<long long>());
    omegas.push_back(node["omega"].get<double>());
    if (node.contains("label")) {
      if (!node["label"].is_string()) throw ValidationError(where + ": 'label' must be a string");
      labelled = true;
      labels.push_back(node["label"].get<std::string>());
    } else {
      labels.emplace_back();
    }
  }
  if (!labelled) labels.clear();

  std::vector<Edge> edges;
  for (std::size_t r = 0; r < doc["edges"].size(); ++r) {
    const auto& edge = doc["edges"][r];
    const std::string where = source + ": edges[" + std::to_string(r) + "]";
    if (!edge.is_object() || !edge.contains("u") || !edge.contains("v") || !edge["u"].is_number_integer() ||
        !edge["v"].is_number_integer()) {
      throw ValidationError(where + ": needs integer 'u' and 'v'");
    }
    const bool has_k = edge.contains("k");
    const bool has_x = edge.contains("x");
    if ((has_k && !edge["k"].is_number()) || (has_x && !edge["x"].is_number())) {
      throw ValidationError(where + ": 'k'/'x' must be numeric");
    }
    const auto u = edge["u"].get<long long>();
    const auto v = edge["v"].get<long long>();
    if (u < 0 || v < 0) throw ValidationError(where + ": negative node index");
    const double k = detail::coupling_from(has_k, has_k ? edge["k"].get<double>() : 0.0, has_x,
                                           has_x ? edge["x"].get<double>() : 0.0, where);
    edges.push_back({static_cast<std::size_t>(u), static_cast<std::size_t>(v), k});
  }
  return detail::assemble(std::move(ids), std::move(omegas), std::move(labels), edges, source);
}

/// Read nodes.csv (id,omega[,label]) and edges.csv (u,v,k or u,v,x).
/// `path` is either the directory holding both files or the nodes.csv file.
inline Network load_network_csv(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::is_directory(path) ? path : path.parent_path();
  const fs::path nodes_path = fs::is_directory(path) ? dir / "nodes.csv" : path;
  const fs::path edges_path = dir / "edges.csv";

  std::vector<std::string> header;
  auto rows = detail::read_csv(nodes_path, header);
  const int c_id = detail::column(header, "id");
  const int c_omega = detail::column(header, "omega");
  const int c_label = detail::column(header, "label");
  if (c_id < 0 || c_omega < 0) throw ValidationError(nodes_path.string() + ": header needs id,omega");
  std::vector<long long> ids;
  std::vector<double> omegas;
  std::vector<std::string> labels;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::string where = nodes_path.string() + " row " + std::to_string(r + 2);
    ids.push_back(detail::parse_int(rows[r][static_cast<std::size_t>(c_id)], where));
    omegas.push_back(detail::parse_double(rows[r][static_cast<std::size_t>(c_omega)], where));
    if (c_label >= 0) labels.push_back(rows[r][static_cast<std::size_t>(c_label)]);
  }

  rows = detail::read_csv(edges_path, header);
  const int c_u = detail::column(header, "u");
  const int c_v = detail::column(header, "v");
  const int c_k = detail::column(header, "k");
  const int c_x = detail::column(header, "x");
  if (c_u < 0 || c_v < 0 || (c_k < 0 && c_x < 0)) {
    throw ValidationError(edges_path.string() + ": header needs u,v and k or x");
  }
  std::vector<Edge> edges;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::string where = edges_path.string() + " row " + std::to_string(r + 2);
    const auto u = detail::parse_int(rows[r][static_cast<std::size_t>(c_u)], where);
    const auto v = detail::parse_int(rows[r][static_cast<std::size_t>(c_v)], where);
    if (u < 0 || v < 0) throw ValidationError(where + ": negative node index");
    const bool has_k = c_k >= 0 && !rows[r][static_cast<std::size_t>(c_k)].empty();
    const bool has_x = c_x >= 0 && !rows[r][static_cast<std::size_t>(c_x)].empty();
    const double k = detail::coupling_from(
        has_k, has_k ? detail::parse_double(rows[r][static_cast<std::size_t>(c_k)], where) : 0.0, has_x,
        has_x ? detail::parse_double(rows[r][static_cast<std::size_t>(c_x)], where) : 0.0, where);
    edges.push_back({static_cast<std::size_t>(u), static_cast<std::size_t>(v), k});
  }
  return detail::assemble(std::move(ids), std::move(omegas), std::move(labels), edges, nodes_path.string());
}

inline Network load_network(const std::filesystem::path& path, NetworkFormat format) {
  if (format == NetworkFormat::csv) return load_network_csv(path);
  return parse_network_json(detail::read_file(path), path.string());
}

/// Format from the path: directories and *.csv are CSV, everything else JSON.
inline NetworkFormat guess_format(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path) || path.extension() == ".csv") return NetworkFormat::csv;
  return NetworkFormat::json;
}

inline Network load_network(const std::filesystem::path& path) { return load_network(path, guess_format(path)); }

inline nlohmann::json to_json(const Network& net) {
  nlohmann::json doc;
  doc["nodes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < net.size(); ++i) {
    nlohmann::json node = {{"id", i}, {"omega", net.omega()[static_cast<Eigen::Index>(i)]}};
    if (!net.labels().empty()) node["label"] = net.labels()[i];
    doc["nodes"].push_back(std::move(node));
  }
  doc["edges"] = nlohmann::json::array();
  for (const auto& e : net.edges()) doc["edges"].push_back({{"u", e.u}, {"v", e.v}, {"k", e.k}});
  return doc;
}

inline void save_network_json(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << to_json(net).dump(1) << '\n';
}

}  // namespace kurastab

#endif  // KURASTAB_IO_HPP
