#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dclab/attention.hpp"

namespace dclab {

enum class SigmaKind { Identity, Linear, ScaledTanh, Composed };

// Neuron-wise transformation applied between attention layers. Linear maps
// must be square and non-singular (the condition number is computed at
// construction). scaled_tanh(s) is x -> s * tanh(x / s), elementwise.
class Sigma {
public:
  Sigma() : kind_(SigmaKind::Identity) {}

  static Sigma identity() { return Sigma(); }
  static Sigma linear(Matrix m);
  static Sigma scaled_tanh(double scale);
  static Sigma composed(std::vector<Sigma> parts);

  SigmaKind kind() const { return kind_; }
  int dim() const { return dim_; }  // 0 when dimension-agnostic
  double condition_number() const { return condition_; }
  double tanh_scale() const { return scale_; }
  const Matrix& matrix() const { return matrix_; }
  bool is_identity() const;

  Vector apply(const Vector& v) const;
  // positions-by-representation layout (n x d rows)
  Matrix apply_rows(const Matrix& v) const;
  // latent layout (d x c columns)
  Matrix apply_cols(const Matrix& z) const;

private:
  SigmaKind kind_;
  Matrix matrix_;
  double scale_ = 1.0;
  double condition_ = 1.0;
  int dim_ = 0;
  std::vector<Sigma> parts_;
};

struct LayerSpec {
  MixtureWeights rho;
  Sigma sigma;
  bool residual = false;
};

struct ForwardOptions {
  // retain only every stride-th layer's matrices (first and last always kept);
  // 1 keeps everything
  int retain_stride = 1;
};

// Full forward trace. v[0] is the embedded input; layer l consumed v[l] and
// produced u[l] and v[l+1]. With retain_stride > 1 skipped slots are empty
// matrices; layer_kept tells which survived.
struct RepresentationTrace {
  std::vector<Matrix> v;   // layer_count + 1 entries, each n x d
  std::vector<Matrix> u;   // layer_count entries
  Matrix embeddings;       // c x d, row x = b_x
  int layer_count = 0;
  int dim = 0;
  std::vector<uint8_t> v_kept;

  const Matrix& final_v() const { return v.back(); }
};

enum class EmbeddingScheme { Gaussian, Orthogonal };

// Gaussian: iid entries with variance 1/d. Orthogonal: rows of a random
// orthogonal matrix (needs d >= c). Deterministic in the seed.
Matrix init_embeddings(int c, int d, EmbeddingScheme scheme, uint64_t seed);
Matrix load_embeddings_csv(const std::string& path);

RepresentationTrace forward(const TokenSequence& seq,
                            const std::vector<LayerSpec>& layers,
                            const std::vector<const AttentionMap*>& maps,
                            const Matrix& embeddings,
                            const ForwardOptions& options = {});

// One attention application U = A V, rows computed independently from the
// sparse representation (plus prefix sums for the uniform base part).
Matrix apply_attention(const AttentionMap& map, const Matrix& v);

// Exact latent-space update: column x of the result is
//   rho_a z_x + rho_b sum_y (w_{x,y}/d_x) z_y + rho_o sum_y pi_y z_y + rho_t v1,
// then sigma column-wise; residual adds Z before sigma.
Matrix latent_recursion(const Matrix& latents, const MixtureWeights& rho,
                        const ReweightedGraph& rg, const Sigma& sigma,
                        const Vector& v1, bool residual = false);

struct GreatMappingBounds {
  double low = 0.0;
  double high = 0.0;
  int skipped = 0;
};

// Sampled bounds on |sigma(Z) D^{1/2} U| / |Z D^{1/2} U| (Frobenius) over
// gaussian latent matrices Z.
GreatMappingBounds great_mapping_bounds(const Sigma& sigma, const ReweightedGraph& rg,
                                        const Matrix& subspace, int dim, int samples,
                                        uint64_t seed);
// Same ratio evaluated at the given iterates.
GreatMappingBounds great_mapping_bounds_at(const Sigma& sigma, const ReweightedGraph& rg,
                                           const Matrix& subspace,
                                           const std::vector<Matrix>& latents);

// Binary trace container with a JSON sidecar {n, d, L, layer offsets}.
void write_trace(const RepresentationTrace& trace, const std::string& bin_path,
                 const std::string& sidecar_path);

}  // namespace dclab
