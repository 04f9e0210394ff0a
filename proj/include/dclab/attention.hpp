#pragma once

#include <string>
#include <vector>

#include "dclab/sequence.hpp"

namespace dclab {

enum class AttnType { A, B, O, T, Mixture, Custom };

std::string attn_type_name(AttnType t);

struct MixtureWeights {
  double a = 0.0, b = 0.0, o = 0.0, t = 0.0;
  double sum() const { return a + b + o + t; }
};

// Lower-triangular row-stochastic map. Row k (0-based) is the uniform base
// weight applied to every column 0..k plus explicit sparse entries; the two
// parts add. Typed maps from construct_typed put, for each admissible token
// y, total mass F_{y,k}/R_k spread uniformly over y's occurrences, which
// makes every explicit entry of a row equal to 1/R_k. The O-type is pure
// base (1/k per column). Rows k < c are self-attention.
class AttentionMap {
public:
  AttentionMap() = default;
  AttentionMap(int n, AttnType type) : n_(n), type_(type), base_(n, 0.0), offsets_(n + 1, 0) {}

  int size() const { return n_; }
  AttnType type() const { return type_; }
  const MixtureWeights& mixture() const { return rho_; }

  double row_base(int k) const { return base_[k]; }
  int row_entry_count(int k) const { return static_cast<int>(offsets_[k + 1] - offsets_[k]); }
  const int32_t* row_cols(int k) const { return cols_.data() + offsets_[k]; }
  const double* row_weights(int k) const { return weights_.data() + offsets_[k]; }
  double row_sum(int k) const;
  int64_t entry_count() const { return static_cast<int64_t>(cols_.size()); }

  // declared reflected function; empty when the map carries none
  const std::vector<std::vector<int32_t>>& support() const { return support_; }

  // construction helpers (rows must be appended in order)
  void begin_rows(int64_t expected_entries);
  void append_row(double base, const int32_t* cols, const double* weights, int count);
  void set_support(std::vector<std::vector<int32_t>> f) { support_ = std::move(f); }
  void set_mixture(const MixtureWeights& rho) { rho_ = rho; }

private:
  int n_ = 0;
  AttnType type_ = AttnType::Custom;
  MixtureWeights rho_;
  std::vector<double> base_;
  std::vector<int64_t> offsets_;
  std::vector<int32_t> cols_;
  std::vector<double> weights_;
  std::vector<std::vector<int32_t>> support_;
};

// Admissible-set builders for the four structured types.
std::vector<std::vector<int32_t>> support_self(int c);                    // f_A
std::vector<std::vector<int32_t>> support_neighbors(const Graph& g);      // f_B
std::vector<std::vector<int32_t>> support_all(int c);                     // f_O

AttentionMap construct_typed(const TokenSequence& seq, const Graph& g, AttnType type);
// Appendix-E style singleton map: f maps every token to exactly one token.
AttentionMap construct_singleton(const TokenSequence& seq, const Graph& g,
                                 const std::vector<int32_t>& f);
// Entrywise convex combination of the four typed maps (tags A, B, O, T).
AttentionMap mix(const AttentionMap& a, const AttentionMap& b, const AttentionMap& o,
                 const AttentionMap& t, const MixtureWeights& rho);
// Single-pass equivalent of construct_typed x4 + mix, for long sequences.
AttentionMap construct_mixture(const TokenSequence& seq, const Graph& g,
                               const MixtureWeights& rho);

struct AttentionValidity {
  bool valid = false;
  double worst_row_sum_error = 0.0;
};
AttentionValidity verify_attention(const AttentionMap& map);

// psi-hat: max over rows k and prefixes j <= k of (k/j) * sum_{i<=j} a_{k,i}
double niceness(const AttentionMap& map);

// max over rows k > c and y in f(x_k) of
//   sqrt(k) * |sum_j a_{k,j} 1{x_j=y} - F_{y,k} / sum_{y' in f(x_k)} F_{y',k}|
double balance_deviation(const AttentionMap& map, const TokenSequence& seq,
                         const std::vector<std::vector<int32_t>>& f);

// Column x of the result is the pi-weighted average of latent columns over
// f(x); empty f(x) maps to the zero column; latents are d x c.
Matrix reflected_latent_image(const std::vector<std::vector<int32_t>>& f,
                              const Matrix& latents, const Vector& pi);

// JSON-lines export: header record {n, type, rho}, then one record
// {row, col, weight} per nonzero (1-based, weights round-trip bit-exactly).
void write_attention_jsonl(const AttentionMap& map, const std::string& path);
AttentionMap read_attention_jsonl(const std::string& path);

}  // namespace dclab
