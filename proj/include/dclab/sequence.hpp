#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dclab/graph.hpp"

namespace dclab {

// Token stream produced by the data-generating process: the first c
// positions traverse the vocabulary (token k at position k), the rest is a
// random walk on the base graph, optionally corrupted by uniform jumps.
// Tokens and positions are 0-based internally; serialized forms are 1-based.
struct TokenSequence {
  int vocab_size = 0;                 // c
  double epsilon = 0.0;
  uint64_t seed = 0;
  std::vector<int32_t> tokens;        // values in [0, c)
  std::vector<uint8_t> noise_flags;   // 1 where a uniform jump produced the token

  int length() const { return static_cast<int>(tokens.size()); }
};

// Preconditions: n > 10c, 0 <= epsilon < 1. Position c is sampled from pi;
// later steps move to a neighbor with probability proportional to the
// adjacency row, or (with probability epsilon) jump uniformly over [c].
TokenSequence generate_sequence(const ReweightedGraph& rg, int n, double epsilon,
                                uint64_t seed);

void save_sequence_json(const TokenSequence& seq, const std::string& path);
TokenSequence load_sequence_json(const std::string& path);

// Per-token sorted occurrence positions; F_{x,k} queries in O(log n).
class FrequencyTable {
public:
  explicit FrequencyTable(const TokenSequence& seq);

  // number of occurrences of `token` among the first `prefix` positions
  int count(int token, int prefix) const;
  // 0-based position of the last occurrence (every token occurs: traversal)
  int last_occurrence(int token) const { return last_[token]; }
  const std::vector<int32_t>& occurrences(int token) const { return positions_[token]; }
  int vocab_size() const { return static_cast<int>(positions_.size()); }

private:
  std::vector<std::vector<int32_t>> positions_;
  std::vector<int32_t> last_;
};

struct ConcentrationReport {
  // max over prefixes k in (c, n] and singletons y of
  //   sqrt(k) * |F_{y,k}/k - pi_y| / log n
  double max_scaled_deviation = 0.0;
  struct SetStat {
    std::vector<int> members;
    double worst = 0.0;
  };
  std::vector<SetStat> per_set_worst;   // random subsets S of [c], same statistic
  double overall_set_worst = 0.0;
};

ConcentrationReport concentration_report(const TokenSequence& seq, const Vector& pi,
                                         int subset_count = 64,
                                         uint64_t subset_seed = 0x5eedull);

// true for token x iff x occurs at a 1-based position > ceil(n/2)
std::vector<bool> second_half_check(const TokenSequence& seq);

// For each window end k (1-based, k >= window), the number of non-edge
// transitions (x_j, x_{j+1}) with j in [k-window+1, k-1], restricted to the
// post-traversal region j > c.
std::vector<int> non_neighbor_counts(const TokenSequence& seq, const Graph& g, int window);

void write_position_count_csv(const std::vector<int>& counts, int window,
                              const std::string& path);

}  // namespace dclab
