#pragma once

#include <array>
#include <string>
#include <vector>

#include "dclab/forward.hpp"

namespace dclab {

// Per-word latent representations pulled out of a trace: column x is the
// representation at the last occurrence of word x (Thm-5.1-style snapshot).
struct LatentSnapshot {
  Matrix latents;        // d x c
  int layer = 0;         // which v[layer] it came from
  std::string rule = "last_occurrence";

  double max_norm() const {  // N = max_x |z_x|
    double m = 0.0;
    for (int x = 0; x < latents.cols(); ++x) m = std::max(m, latents.col(x).norm());
    return m;
  }
};

LatentSnapshot snapshot_from_trace(const RepresentationTrace& trace,
                                   const TokenSequence& seq, int layer);

struct GoodnessReport {
  double gamma_hat = 0.0;               // max_k sqrt(k) |v_k - z_{x_k}|
  std::array<double, 6> decade_means{}; // mean error over k in (n/2^{j+1}, n/2^j]
};

GoodnessReport goodness(const Matrix& positions, const Matrix& latents,
                        const TokenSequence& seq);

// |Z D^{1/2} Y|_F / |Z D^{1/2} X|_F; throws when the denominator collapses
// (the representation lost all low-frequency mass).
double subspace_ratio(const LatentSnapshot& snap, const ReweightedGraph& rg,
                      const SpectralBasis& basis);

// Lemma-B.3-style identity: the orthogonal-to-D^{1/2}1 projection of the
// updated latent equals (rho_a I + rho_b M) applied to the old projection.
// Returns the deviation norm; throws if U is not orthogonal to D^{1/2}1.
double projection_evolution_check(const Vector& z, const MixtureWeights& rho,
                                  const ReweightedGraph& rg, const Matrix& subspace,
                                  double sink_term = 1.0);

enum class EnergyMode { Brute, Spectral };

struct EnergyReport {
  double total = 0.0;
  Vector components;             // spectral mode only: e_i = 2(1-lambda_i)|Z D^{1/2} u_i|^2
  double normalized_total = 0.0; // same quantities with Z scaled to unit Frobenius
  Vector normalized_components;
  double low_share = 0.0;        // (e_2 + e_3) / total, spectral mode
};

EnergyReport energy(const LatentSnapshot& snap, const ReweightedGraph& rg,
                    const SpectralBasis& basis, EnergyMode mode);

struct PcaAlignment {
  std::vector<double> angles_deg;          // principal angles, PCA vs u_2..u_q
  std::vector<double> weighted_angles_deg; // degree-weighted PCA variant
  Matrix scores;                           // c x (q-1) plain PCA coordinates
  Matrix aligned;                          // scores rotated onto the eigen block
  Matrix eigen_coords;                     // c x (q-1), columns u_2..u_q
  Vector removed_mean;                     // the mean column subtracted before PCA
  double removed_angle_to_ones_deg = 90.0; // dominant uncentered direction vs 1
  double removed_angle_to_f1_deg = 90.0;   // ... vs the computed top eigenvector
  int rank = 0;
};

PcaAlignment pca_align(const LatentSnapshot& snap, const SpectralBasis& basis);

struct CompressionResult {
  double reweighted_ratio = 0.0;  // corner/center mean radius, eigenvectors of M
  double original_ratio = 0.0;    // same for the original-graph operator
};

// Embeds vertices at (u_2, u_3) for both operators; corner set = minimum
// degree vertices, center set = maximum degree vertices (for a grid these
// are the corners and the interior). The original-graph comparator should
// be the unweighted normalized adjacency (see unweighted_normalized_basis):
// the raw-adjacency pair of the 4x4 grid degenerates (corner and interior
// nodes land at identical radii), which makes it useless as a reference.
CompressionResult peripheral_compression(const SpectralBasis& m_basis,
                                         const SpectralBasis& original_basis,
                                         const Graph& g);

// Spectral pair of Dt^{-1/2} Wt Dt^{-1/2} for the unweighted graph; the
// pi-free member of the same operator family as M.
SpectralBasis unweighted_normalized_basis(const Graph& g, int q);

// Per-layer largest principal angle between plain-PCA(top q-1) of each
// snapshot and span(u_2..u_q) of the clean basis.
std::vector<double> noise_robustness_curve(const SpectralBasis& clean_basis,
                                           const std::vector<LatentSnapshot>& snaps);

// Principal angles (radians) between the column spans of two matrices.
std::vector<double> principal_angles(const Matrix& a, const Matrix& b);

}  // namespace dclab
