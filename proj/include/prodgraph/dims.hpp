#pragma once

#include <stdexcept>

namespace prodgraph {

/// Problem sizes for an N-node, F-feature product-graph model with an
/// optional periodic trend of length M. M = 1 encodes the stationary
/// (no-trend) case.
struct GraphDims {
  int n_nodes = 1;
  int n_features = 1;
  int period = 1;

  GraphDims() = default;
  GraphDims(int n, int f, int m = 1) : n_nodes(n), n_features(f), period(m) {
    if (n < 1 || f < 1 || m < 1)
      throw std::invalid_argument("GraphDims: N, F and M must all be >= 1");
  }

  /// Length of the vectorized state, NF.
  int state_size() const { return n_nodes * n_features; }

  int diag_count() const { return n_nodes * n_features; }
  int feature_pair_count() const { return n_features * (n_features - 1) / 2; }
  int node_pair_count() const { return n_nodes * (n_nodes - 1) / 2; }

  /// NF + F(F-1)/2 + N(N-1)/2, the dimension of the structured coefficient space.
  int graph_param_count() const {
    return diag_count() + feature_pair_count() + node_pair_count();
  }

  /// Graph parameters plus the N*F*M trend values; the trend block is
  /// counted only when a period is configured (M > 1).
  int total_param_count() const {
    return graph_param_count() + (period > 1 ? state_size() * period : 0);
  }

  bool operator==(const GraphDims& o) const {
    return n_nodes == o.n_nodes && n_features == o.n_features && period == o.period;
  }
};

/// Positive remainder, so that phase(-1, M) == M - 1.
inline int phase_mod(long t, int period) {
  int m = static_cast<int>(t % period);
  return m < 0 ? m + period : m;
}

}  // namespace prodgraph
