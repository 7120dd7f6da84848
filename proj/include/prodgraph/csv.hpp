#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "prodgraph/structured.hpp"

namespace prodgraph {

/// Malformed or incomplete input stream; the CLI maps this to exit code 2.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Long-format export: header `t,node,feature,value`, one row per scalar,
/// nodes fastest within features within times.
template <typename Scalar>
void write_stream_csv(std::ostream& out, const Mat<Scalar>& stream, const GraphDims& dims) {
  out << "t,node,feature,value\n";
  out.precision(17);
  for (Eigen::Index t = 0; t < stream.cols(); ++t)
    for (int f = 0; f < dims.n_features; ++f)
      for (int n = 0; n < dims.n_nodes; ++n)
        out << t << ',' << n << ',' << f << ',' << stream(f * dims.n_nodes + n, t) << '\n';
}

template <typename Scalar>
void write_stream_csv(const std::string& path, const Mat<Scalar>& stream,
                      const GraphDims& dims) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_stream_csv(out, stream, dims);
}

/// Dense matrix dump for heatmap consumers.
template <typename Derived>
void write_matrix_csv(const std::string& path, const Eigen::MatrixBase<Derived>& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.precision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << '\n';
  }
}

template <typename Scalar = double>
struct IngestResult {
  Mat<Scalar> stream;  ///< NF x T in vec order; columns are time points
  GraphDims dims;      ///< period left at 1; it is a preassigned hyperparameter
  std::vector<std::string> nodes;     ///< node labels in discovery order
  std::vector<std::string> features;  ///< feature labels in discovery order
};

namespace csv_detail {

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline int lookup(std::vector<std::string>& labels, std::map<std::string, int>& index,
                  const std::string& label) {
  auto it = index.find(label);
  if (it != index.end()) return it->second;
  const int id = static_cast<int>(labels.size());
  labels.push_back(label);
  index.emplace(label, id);
  return id;
}

}  // namespace csv_detail

/**
 * Parses a complete matrix-variate stream from CSV.
 *
 * Long format has the header `t,node,feature,value`. Wide format has a `t`
 * column followed by `<node>_<feature>` columns (split at the last
 * underscore). Every (t, node, feature) cell must be present: time must be
 * gapless per cell and the node/feature sets consistent. Violations raise
 * SchemaError naming the first offending cell.
 */
template <typename Scalar = double>
IngestResult<Scalar> ingest_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("ingest: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = csv_detail::split(line);

  IngestResult<Scalar> res;
  std::map<std::string, int> node_index, feature_index;
  // cell values keyed by (t, node, feature)
  std::map<long, std::map<std::pair<int, int>, Scalar>> cells;
  long line_no = 1;

  const bool long_format = header.size() == 4 && header[0] == "t" && header[1] == "node" &&
                           header[2] == "feature" && header[3] == "value";
  if (long_format) {
    long prev_t = -1;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto f = csv_detail::split(line);
      if (f.size() != 4)
        throw SchemaError("ingest: line " + std::to_string(line_no) + ": expected 4 fields");
      long t;
      Scalar v;
      try {
        t = std::stol(f[0]);
        v = static_cast<Scalar>(std::stod(f[3]));
      } catch (const std::exception&) {
        throw SchemaError("ingest: line " + std::to_string(line_no) + ": bad number");
      }
      if (t < prev_t)
        throw SchemaError("ingest: line " + std::to_string(line_no) + ": non-monotone t");
      prev_t = std::max(prev_t, t);
      const int n = csv_detail::lookup(res.nodes, node_index, f[1]);
      const int ff = csv_detail::lookup(res.features, feature_index, f[2]);
      if (!cells[t].emplace(std::make_pair(n, ff), v).second)
        throw SchemaError("ingest: duplicate cell (t=" + f[0] + ", node=" + f[1] +
                          ", feature=" + f[2] + ")");
    }
  } else {
    if (header.empty() || header[0] != "t")
      throw SchemaError("ingest: header must be t,node,feature,value or t,<node>_<feature>,...");
    std::vector<std::pair<int, int>> col_cell;
    for (size_t c = 1; c < header.size(); ++c) {
      const auto pos = header[c].rfind('_');
      if (pos == std::string::npos || pos == 0 || pos + 1 == header[c].size())
        throw SchemaError("ingest: wide column '" + header[c] + "' is not <node>_<feature>");
      const int n = csv_detail::lookup(res.nodes, node_index, header[c].substr(0, pos));
      const int ff = csv_detail::lookup(res.features, feature_index, header[c].substr(pos + 1));
      col_cell.emplace_back(n, ff);
    }
    long prev_t = -1;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto f = csv_detail::split(line);
      if (f.size() != header.size())
        throw SchemaError("ingest: line " + std::to_string(line_no) + ": field count mismatch");
      long t;
      try {
        t = std::stol(f[0]);
      } catch (const std::exception&) {
        throw SchemaError("ingest: line " + std::to_string(line_no) + ": bad time index");
      }
      if (t <= prev_t)
        throw SchemaError("ingest: line " + std::to_string(line_no) + ": non-monotone t");
      prev_t = t;
      for (size_t c = 1; c < f.size(); ++c) {
        Scalar v;
        try {
          v = static_cast<Scalar>(std::stod(f[c]));
        } catch (const std::exception&) {
          throw SchemaError("ingest: line " + std::to_string(line_no) + ": bad number");
        }
        cells[t].emplace(col_cell[c - 1], v);
      }
    }
  }

  if (cells.empty()) throw SchemaError("ingest: no data rows");
  const int n_nodes = static_cast<int>(res.nodes.size());
  const int n_features = static_cast<int>(res.features.size());
  res.dims = GraphDims(n_nodes, n_features, 1);
  res.stream.resize(res.dims.state_size(), cells.size());

  long expected_t = cells.begin()->first;
  Eigen::Index col = 0;
  for (const auto& [t, row] : cells) {
    if (t != expected_t)
      throw SchemaError("ingest: missing time point t=" + std::to_string(expected_t));
    ++expected_t;
    for (int n = 0; n < n_nodes; ++n)
      for (int f = 0; f < n_features; ++f) {
        const auto it = row.find({n, f});
        if (it == row.end())
          throw SchemaError("ingest: missing cell (t=" + std::to_string(t) + ", node=" +
                            res.nodes[n] + ", feature=" + res.features[f] + ")");
        res.stream(f * n_nodes + n, col) = it->second;
      }
    ++col;
  }
  return res;
}

template <typename Scalar = double>
IngestResult<Scalar> ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("ingest: cannot open " + path);
  return ingest_csv<Scalar>(in);
}

}  // namespace prodgraph
