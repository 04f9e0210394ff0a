#include "dclab/graph.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dclab {

std::vector<std::pair<int, int>> Graph::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int u = 0; u < vertex_count; ++u)
    for (int v = u + 1; v < vertex_count; ++v)
      if (adjacency(u, v) != 0.0) out.emplace_back(u, v);
  return out;
}

std::vector<std::vector<int>> Graph::neighbor_lists() const {
  std::vector<std::vector<int>> out(vertex_count);
  for (int u = 0; u < vertex_count; ++u)
    for (int v = 0; v < vertex_count; ++v)
      if (adjacency(u, v) != 0.0) out[u].push_back(v);
  return out;
}

Vector Graph::unweighted_degrees() const { return adjacency.rowwise().sum(); }

bool Graph::is_connected() const {
  if (vertex_count == 0) return false;
  std::vector<char> seen(vertex_count, 0);
  std::deque<int> queue{0};
  seen[0] = 1;
  int reached = 1;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    for (int v = 0; v < vertex_count; ++v) {
      if (!seen[v] && adjacency(u, v) != 0.0) {
        seen[v] = 1;
        ++reached;
        queue.push_back(v);
      }
    }
  }
  return reached == vertex_count;
}

namespace {

Graph finalize(Matrix adj, const std::string& what) {
  Graph g{static_cast<int>(adj.rows()), std::move(adj)};
  if (g.vertex_count < 2) throw InvalidInput(what + ": need at least 2 vertices");
  if (!g.is_connected()) throw InvalidInput(what + ": graph is not connected");
  return g;
}

}  // namespace

Graph grid_graph(int rows, int cols) {
  if (rows < 1 || cols < 1 || rows * cols < 2)
    throw InvalidInput("grid_graph: need rows*cols >= 2");
  const int c = rows * cols;
  Matrix adj = Matrix::Zero(c, c);
  auto id = [cols](int i, int j) { return i * cols + j; };
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      if (i + 1 < rows) adj(id(i, j), id(i + 1, j)) = adj(id(i + 1, j), id(i, j)) = 1.0;
      if (j + 1 < cols) adj(id(i, j), id(i, j + 1)) = adj(id(i, j + 1), id(i, j)) = 1.0;
    }
  }
  return finalize(std::move(adj), "grid_graph");
}

Graph ring_graph(int c) {
  if (c < 3) throw InvalidInput("ring_graph: need c >= 3");
  Matrix adj = Matrix::Zero(c, c);
  for (int i = 0; i < c; ++i) {
    int j = (i + 1) % c;
    adj(i, j) = adj(j, i) = 1.0;
  }
  return finalize(std::move(adj), "ring_graph");
}

Graph complete_graph(int c) {
  if (c < 2) throw InvalidInput("complete_graph: need c >= 2");
  Matrix adj = Matrix::Ones(c, c);
  adj.diagonal().setZero();
  return finalize(std::move(adj), "complete_graph");
}

Graph graph_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("graph_from_file: cannot open " + path);
  struct E {
    int u, v;
    double w;
  };
  std::vector<E> edges;
  int maxv = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    int u, v;
    if (!(ss >> u)) continue;  // blank or comment-only line
    if (!(ss >> v))
      throw InvalidInput("graph_from_file: " + path + ":" + std::to_string(lineno) +
                         ": expected 'u v [weight]'");
    double w = 1.0;
    ss >> w;
    if (u < 1 || v < 1 || u == v || w <= 0.0)
      throw InvalidInput("graph_from_file: " + path + ":" + std::to_string(lineno) +
                         ": bad edge");
    edges.push_back({u - 1, v - 1, w});
    maxv = std::max({maxv, u, v});
  }
  if (edges.empty()) throw InvalidInput("graph_from_file: " + path + ": no edges");
  Matrix adj = Matrix::Zero(maxv, maxv);
  for (const auto& e : edges) adj(e.u, e.v) = adj(e.v, e.u) = e.w;
  return finalize(std::move(adj), "graph_from_file(" + path + ")");
}

Graph graph_from_spec(const std::string& spec) {
  auto colon = spec.find(':');
  if (colon == std::string::npos)
    throw InvalidInput("graph spec must look like grid:4x4, ring:16, complete:8 or file:PATH");
  const std::string kind = spec.substr(0, colon);
  const std::string arg = spec.substr(colon + 1);
  if (kind == "grid") {
    auto x = arg.find('x');
    if (x == std::string::npos) throw InvalidInput("grid spec must be grid:RxC");
    return grid_graph(std::stoi(arg.substr(0, x)), std::stoi(arg.substr(x + 1)));
  }
  if (kind == "ring") return ring_graph(std::stoi(arg));
  if (kind == "complete") return complete_graph(std::stoi(arg));
  if (kind == "file") return graph_from_file(arg);
  throw InvalidInput("unknown graph kind '" + kind + "'");
}

StationaryMode stationary_mode_from_string(const std::string& s) {
  if (s == "walk") return StationaryMode::Walk;
  if (s == "perron") return StationaryMode::Perron;
  throw InvalidInput("stationary mode must be 'walk' or 'perron', got '" + s + "'");
}

namespace {

// Symmetric eigen-decomposition, eigenvalues sorted descending (signed),
// eigenvectors sign-fixed.
void sorted_symmetric_eigen(const Matrix& sym, Vector& values, Matrix& vectors) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success)
    throw NumericError("eigensolver failed to converge after iteration cap");
  const int c = static_cast<int>(sym.rows());
  std::vector<int> order(c);
  std::iota(order.begin(), order.end(), 0);
  const Vector& raw = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(),
                   [&raw](int a, int b) { return raw(a) > raw(b); });
  values.resize(c);
  vectors.resize(c, c);
  for (int i = 0; i < c; ++i) {
    values(i) = raw(order[i]);
    Vector v = solver.eigenvectors().col(order[i]);
    for (int j = 0; j < c; ++j) {
      if (std::abs(v(j)) > 1e-8) {
        if (v(j) < 0.0) v = -v;
        break;
      }
    }
    vectors.col(i) = v;
  }
  // residual sanity; SelfAdjointEigenSolver should always satisfy this
  double res = (sym * vectors - vectors * values.asDiagonal()).norm();
  if (!(res <= 1e-8 * std::max(1.0, sym.norm())))
    throw NumericError("eigensolver residual too large: " + std::to_string(res));
}

}  // namespace

Vector stationary_distribution(const Graph& g, StationaryMode mode) {
  if (!g.is_connected()) throw InvalidInput("stationary_distribution: graph not connected");
  Vector pi;
  if (mode == StationaryMode::Walk) {
    Vector deg = g.unweighted_degrees();
    pi = deg / deg.sum();
  } else {
    Vector values;
    Matrix vectors;
    sorted_symmetric_eigen(g.adjacency, values, vectors);
    Vector v = vectors.col(0);
    if (v.sum() < 0.0) v = -v;
    pi = v / v.sum();
  }
  if (pi.minCoeff() <= 0.0)
    throw NumericError("stationary_distribution: vector not strictly positive");
  return pi;
}

ReweightedGraph reweight(const Graph& g, const Vector& pi) {
  const int c = g.vertex_count;
  if (pi.size() != c) throw InvalidInput("reweight: pi dimension mismatch");
  if (pi.minCoeff() <= 0.0) throw InvalidInput("reweight: pi must be strictly positive");
  ReweightedGraph rg;
  rg.base = g;
  rg.pi = pi;
  rg.weights = g.adjacency.cwiseProduct(pi * pi.transpose());
  rg.degrees = rg.weights.rowwise().sum();
  if (rg.degrees.minCoeff() <= 0.0)
    throw InvalidInput("reweight: isolated vertex after reweighting");
  Vector dinv = rg.degrees.cwiseSqrt().cwiseInverse();
  rg.normalized = dinv.asDiagonal() * rg.weights * dinv.asDiagonal();
  return rg;
}

SpectralBasis symmetric_eigen_basis(const Matrix& sym, int q) {
  const int c = static_cast<int>(sym.rows());
  if (q < 1 || q >= c) throw InvalidInput("spectral_basis: need 1 <= q < c");
  SpectralBasis basis;
  sorted_symmetric_eigen(sym, basis.eigenvalues, basis.eigenvectors);
  basis.split = q;
  return basis;
}

SpectralBasis spectral_basis(const ReweightedGraph& rg, int q) {
  return symmetric_eigen_basis(rg.normalized, q);
}

double decay_factor(const SpectralBasis& basis, double rho_a, double rho_b) {
  if (rho_a < 0.0 || rho_b < 0.0) throw InvalidInput("decay_factor: weights must be >= 0");
  const int c = static_cast<int>(basis.eigenvalues.size());
  std::vector<double> mu(c);
  for (int i = 0; i < c; ++i) mu[i] = std::abs(rho_a + rho_b * basis.eigenvalues(i));
  std::sort(mu.begin(), mu.end(), std::greater<>());
  const int q = basis.split;
  if (mu[q - 1] == 0.0) throw NumericError("decay_factor: |mu_q| = 0, ratio undefined");
  return mu[q] / mu[q - 1];
}

}  // namespace dclab
