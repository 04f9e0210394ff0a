#include "dclab/diagnostics.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

#include "dclab/sequence.hpp"

namespace dclab {

namespace {

constexpr double kRadToDeg = 57.295779513082320876798154814105;

Matrix orthonormal_columns(const Matrix& m) {
  Eigen::HouseholderQR<Matrix> qr(m);
  return qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
}

double angle_between_deg(const Vector& a, const Vector& b) {
  double cosv = std::abs(a.dot(b)) / (a.norm() * b.norm());
  return std::acos(std::clamp(cosv, 0.0, 1.0)) * kRadToDeg;
}

}  // namespace

std::vector<double> principal_angles(const Matrix& a, const Matrix& b) {
  Matrix qa = orthonormal_columns(a);
  Matrix qb = orthonormal_columns(b);
  Eigen::JacobiSVD<Matrix> svd(qa.transpose() * qb);
  std::vector<double> angles;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    angles.push_back(std::acos(std::clamp(svd.singularValues()(i), -1.0, 1.0)));
  std::sort(angles.begin(), angles.end(), std::greater<>());  // largest first
  return angles;
}

LatentSnapshot snapshot_from_trace(const RepresentationTrace& trace,
                                   const TokenSequence& seq, int layer) {
  if (layer < 0 || layer > trace.layer_count)
    throw InvalidInput("snapshot_from_trace: layer out of range");
  const Matrix& v = trace.v[layer];
  if (v.size() == 0)
    throw InvalidInput("snapshot_from_trace: layer " + std::to_string(layer) +
                       " was not retained");
  FrequencyTable freq(seq);
  const int c = seq.vocab_size;
  LatentSnapshot snap;
  snap.layer = layer;
  snap.latents.resize(trace.dim, c);
  for (int x = 0; x < c; ++x)
    snap.latents.col(x) = v.row(freq.last_occurrence(x)).transpose();
  if (!snap.latents.allFinite())
    throw NumericError("snapshot_from_trace: non-finite entries");
  return snap;
}

GoodnessReport goodness(const Matrix& positions, const Matrix& latents,
                        const TokenSequence& seq) {
  const int n = seq.length();
  if (positions.rows() != n || positions.cols() != latents.rows())
    throw InvalidInput("goodness: dimension mismatch");
  GoodnessReport report;
  std::vector<double> err(n);
  for (int k = 0; k < n; ++k) {
    err[k] = (positions.row(k).transpose() - latents.col(seq.tokens[k])).norm();
    report.gamma_hat =
        std::max(report.gamma_hat, std::sqrt(static_cast<double>(k + 1)) * err[k]);
  }
  for (int j = 0; j < 6; ++j) {
    const int lo = n >> (j + 1);
    const int hi = n >> j;
    double acc = 0.0;
    for (int k = lo; k < hi; ++k) acc += err[k];
    report.decade_means[j] = hi > lo ? acc / (hi - lo) : 0.0;
  }
  return report;
}

double subspace_ratio(const LatentSnapshot& snap, const ReweightedGraph& rg,
                      const SpectralBasis& basis) {
  Matrix weighted = snap.latents * rg.sqrt_degrees().asDiagonal();
  const double denom = (weighted * basis.low_block()).norm();
  if (denom < 1e-12)
    throw NumericError("subspace_ratio: low-frequency mass below 1e-12");
  return (weighted * basis.high_block()).norm() / denom;
}

double projection_evolution_check(const Vector& z, const MixtureWeights& rho,
                                  const ReweightedGraph& rg, const Matrix& subspace,
                                  double sink_term) {
  const int c = rg.vertex_count();
  if (z.size() != c || subspace.rows() != c)
    throw InvalidInput("projection_evolution_check: dimension mismatch");
  Vector sqrt_d = rg.sqrt_degrees();
  double ortho = (subspace.transpose() * sqrt_d).norm();
  if (ortho > 1e-10 * sqrt_d.norm())
    throw InvalidInput("projection_evolution_check: U not orthogonal to D^{1/2}1");
  Vector walked = rg.weights * z;
  walked.array() /= rg.degrees.array();
  Vector znew = rho.a * z + rho.b * walked +
                (rho.o * rg.pi.dot(z) + rho.t * sink_term) * Vector::Ones(c);
  Vector lhs = subspace.transpose() * (sqrt_d.asDiagonal() * znew);
  Vector rhs = subspace.transpose() *
               (rho.a * Matrix::Identity(c, c) + rho.b * rg.normalized) *
               (sqrt_d.asDiagonal() * z);
  return (lhs - rhs).norm();
}

EnergyReport energy(const LatentSnapshot& snap, const ReweightedGraph& rg,
                    const SpectralBasis& basis, EnergyMode mode) {
  const int c = rg.vertex_count();
  EnergyReport report;
  auto brute_total = [&](const Matrix& z) {
    double acc = 0.0;
    for (int x = 0; x < c; ++x)
      for (int y = 0; y < c; ++y)
        acc += rg.weights(x, y) * (z.col(x) - z.col(y)).squaredNorm();
    return acc;
  };
  auto spectral_components = [&](const Matrix& z) {
    Matrix weighted = z * rg.sqrt_degrees().asDiagonal();
    Vector e(c);
    for (int i = 0; i < c; ++i)
      e(i) = 2.0 * (1.0 - basis.eigenvalues(i)) *
             (weighted * basis.eigenvectors.col(i)).squaredNorm();
    return e;
  };
  const Matrix& z = snap.latents;
  const double fro = z.norm();
  if (mode == EnergyMode::Brute) {
    report.total = brute_total(z);
    if (fro > 0.0) report.normalized_total = brute_total(z / fro);
    return report;
  }
  report.components = spectral_components(z);
  report.total = report.components.sum();
  if (report.total > 0.0)
    report.low_share = (report.components(1) + report.components(2)) / report.total;
  if (fro > 0.0) {
    report.normalized_components = spectral_components(z / fro);
    report.normalized_total = report.normalized_components.sum();
  } else {
    report.normalized_components = Vector::Zero(c);
  }
  return report;
}

PcaAlignment pca_align(const LatentSnapshot& snap, const SpectralBasis& basis) {
  const int c = static_cast<int>(snap.latents.cols());
  const int m = basis.split - 1;  // components [2, q]
  if (m < 1) throw InvalidInput("pca_align: need q >= 2");
  PcaAlignment out;
  out.eigen_coords = basis.low_block();

  // dominant token-space direction of the uncentered snapshot, to document
  // what the centering step is about to remove
  if (snap.latents.norm() > 0.0) {
    Eigen::JacobiSVD<Matrix> svd(snap.latents, Eigen::ComputeThinV);
    Vector top = svd.matrixV().col(0);
    out.removed_angle_to_ones_deg = angle_between_deg(top, Vector::Ones(c));
    out.removed_angle_to_f1_deg = angle_between_deg(top, basis.leading());
  }

  out.removed_mean = snap.latents.rowwise().mean();
  Matrix centered = snap.latents.colwise() - out.removed_mean;

  Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double tol = 1e-12 * std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  out.rank = std::min(rank, m);

  if (out.rank == 0) {
    out.scores = Matrix::Zero(c, 0);
    out.aligned = out.scores;
    return out;
  }
  Matrix directions = svd.matrixV().leftCols(out.rank);  // token-space, c x rank
  out.scores = directions * sv.head(out.rank).asDiagonal();
  {
    std::vector<double> rad = principal_angles(directions, out.eigen_coords);
    for (double r : rad) out.angles_deg.push_back(r * kRadToDeg);
  }

  // optimal rotation of the PCA frame onto the eigenvector frame
  if (out.rank == m) {
    Eigen::JacobiSVD<Matrix> pro(directions.transpose() * out.eigen_coords,
                                 Eigen::ComputeFullU | Eigen::ComputeFullV);
    Matrix rot = pro.matrixU() * pro.matrixV().transpose();
    out.aligned = out.scores * rot;
  } else {
    out.aligned = out.scores;
  }

  // degree-weighted variant: weighted centering and sqrt(d)-scaled samples
  {
    Vector w = Vector::Zero(c);
    // reconstruct degrees from the basis: f1 = sqrt(d)/|sqrt(d)| is not
    // enough to recover scale, but angles only need direction; use f1^2.
    for (int x = 0; x < c; ++x) w(x) = basis.leading()(x) * basis.leading()(x);
    const double wsum = w.sum();
    Vector mean = snap.latents * w / wsum;
    Matrix cw = snap.latents.colwise() - mean;
    for (int x = 0; x < c; ++x) cw.col(x) *= std::sqrt(w(x));
    Eigen::JacobiSVD<Matrix> wsvd(cw, Eigen::ComputeThinV);
    int wrank = 0;
    const Vector& wsv = wsvd.singularValues();
    const double wtol = 1e-12 * std::max(1.0, wsv.size() > 0 ? wsv(0) : 0.0);
    for (int i = 0; i < wsv.size(); ++i)
      if (wsv(i) > wtol) ++wrank;
    wrank = std::min(wrank, m);
    if (wrank >= 1) {
      std::vector<double> rad =
          principal_angles(wsvd.matrixV().leftCols(wrank), out.eigen_coords);
      for (double r : rad) out.weighted_angles_deg.push_back(r * kRadToDeg);
    }
  }
  return out;
}

SpectralBasis unweighted_normalized_basis(const Graph& g, int q) {
  Vector dinv = g.unweighted_degrees().cwiseSqrt().cwiseInverse();
  Matrix op = dinv.asDiagonal() * g.adjacency * dinv.asDiagonal();
  return symmetric_eigen_basis(op, q);
}

CompressionResult peripheral_compression(const SpectralBasis& m_basis,
                                         const SpectralBasis& adjacency_basis,
                                         const Graph& g) {
  const int c = g.vertex_count;
  if (m_basis.eigenvectors.rows() != c || adjacency_basis.eigenvectors.rows() != c)
    throw InvalidInput("peripheral_compression: basis/graph size mismatch");
  if (c < 4) throw InvalidInput("peripheral_compression: graph too small");
  Vector deg = g.unweighted_degrees();
  const double dmin = deg.minCoeff();
  const double dmax = deg.maxCoeff();
  std::vector<int> corners, centers;
  for (int x = 0; x < c; ++x) {
    if (deg(x) == dmin) corners.push_back(x);
    if (deg(x) == dmax) centers.push_back(x);
  }
  auto ratio = [&](const SpectralBasis& basis) {
    auto radius = [&](int x) {
      double a = basis.eigenvectors(x, 1);
      double b = basis.eigenvectors(x, 2);
      return std::sqrt(a * a + b * b);
    };
    double corner = 0.0, center = 0.0;
    for (int x : corners) corner += radius(x);
    for (int x : centers) center += radius(x);
    corner /= corners.size();
    center /= centers.size();
    if (center <= 0.0)
      throw NumericError("peripheral_compression: zero central radius");
    return corner / center;
  };
  return {ratio(m_basis), ratio(adjacency_basis)};
}

std::vector<double> noise_robustness_curve(const SpectralBasis& clean_basis,
                                           const std::vector<LatentSnapshot>& snaps) {
  std::vector<double> curve;
  curve.reserve(snaps.size());
  for (const auto& snap : snaps) {
    PcaAlignment a = pca_align(snap, clean_basis);
    double worst = 0.0;
    for (double deg : a.angles_deg) worst = std::max(worst, deg);
    curve.push_back(worst);
  }
  return curve;
}

}  // namespace dclab
