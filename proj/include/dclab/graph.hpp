#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dclab/common.hpp"

namespace dclab {

// Vocabulary graph. Vertices are 0-based internally; file formats are
// 1-based. Adjacency is symmetric and non-negative with zero diagonal for
// the built-in constructors.
struct Graph {
  int vertex_count = 0;
  Matrix adjacency;  // c x c, symmetric, non-negative

  std::vector<std::pair<int, int>> edges() const;          // u < v, nonzero weight
  std::vector<std::vector<int>> neighbor_lists() const;    // sorted, per vertex
  Vector unweighted_degrees() const;                       // adjacency row sums
  bool is_connected() const;                               // reachable from vertex 0
};

Graph grid_graph(int rows, int cols);   // 4-neighborhood, no periodic boundary
Graph ring_graph(int c);
Graph complete_graph(int c);

// Plain-text edge list: one "u v [weight]" per line, 1-indexed, '#' comments.
Graph graph_from_file(const std::string& path);
// Parses "grid:RxC" / "ring:C" / "complete:C" / "file:PATH".
Graph graph_from_spec(const std::string& spec);

enum class StationaryMode { Walk, Perron };
StationaryMode stationary_mode_from_string(const std::string& s);

// Walk: degree-proportional (the stationary law of the simple random walk).
// Perron: L1-normalized leading eigenvector of the adjacency.
Vector stationary_distribution(const Graph& g, StationaryMode mode);

struct ReweightedGraph {
  Graph base;       // original graph (the walk kernel uses its adjacency)
  Vector pi;        // strictly positive, sums to 1
  Matrix weights;   // w_{x,y} = adj_{x,y} * pi_x * pi_y
  Vector degrees;   // d_x = row sums of weights
  Matrix normalized;  // M = D^{-1/2} W D^{-1/2}

  int vertex_count() const { return base.vertex_count; }
  Vector sqrt_degrees() const { return degrees.cwiseSqrt(); }
};

ReweightedGraph reweight(const Graph& g, const Vector& pi);

// Eigenpairs of a symmetric operator, eigenvalues sorted in descending
// (signed) order so that index 0 is the Perron direction and indices 1..q-1
// are the surviving low-frequency directions. Sign convention: first
// component with |v| > 1e-8 is positive. Within numerically degenerate
// clusters only the spanned subspace is meaningful.
struct SpectralBasis {
  Vector eigenvalues;
  Matrix eigenvectors;  // columns, same order
  int split = 1;        // q, 1 <= q < c

  Vector leading() const { return eigenvectors.col(0); }                              // f1
  Matrix low_block() const { return eigenvectors.middleCols(1, split - 1); }          // X
  Matrix high_block() const {
    return eigenvectors.rightCols(eigenvectors.cols() - split);                       // Y
  }
};

SpectralBasis spectral_basis(const ReweightedGraph& rg, int q);
// Same decomposition applied to a raw symmetric matrix (used for the
// unweighted-adjacency comparison in the peripheral-compression diagnostic).
SpectralBasis symmetric_eigen_basis(const Matrix& sym, int q);

// |mu_{q+1}| / |mu_q| with mu_i = rho_a + rho_b * lambda_i sorted by
// non-increasing absolute value; the layer-wise contraction factor.
double decay_factor(const SpectralBasis& basis, double rho_a, double rho_b);

}  // namespace dclab
