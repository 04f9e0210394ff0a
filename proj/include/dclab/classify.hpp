#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dclab/attention.hpp"

namespace dclab {

// Externally exported attention weights, one record per nonzero. Positions
// and indices are 1-based on disk, 0-based here. Rows whose weights do not
// sum to 1 within the tolerance are flagged, not dropped.
struct AttentionDump {
  int n_layers = 0;
  int n_heads = 0;
  int n = 0;
  int c = 0;
  std::vector<int32_t> tokens;            // length n
  std::vector<int32_t> layer, head;       // per record
  std::vector<int32_t> query, key;        // per record, 0-based positions
  std::vector<double> weight;             // per record
  std::vector<int64_t> flagged_rows;      // (layer*H + head)*n + query ids

  size_t record_count() const { return weight.size(); }
};

// JSONL schema: header {"n_layers","n_heads","n","c","tokens":[...]} then
// records {"l","h","q","k","w"}; weights may be doubles or decimal strings;
// .gz files are transparently decompressed. Row-sum tolerance is 1e-3.
AttentionDump read_dump(const std::string& path);

// Exports a constructed map as a 1-layer/1-head dump (test/synthetic data).
void write_dump(const AttentionMap& map, const TokenSequence& seq,
                const std::string& path);

struct HeadFractions {
  int layer = 0, head = 0;
  double a = 0.0, b = 0.0, t = 0.0, other = 0.0;
  double mass = 0.0;  // total attention mass seen by this head
};

struct ClassificationReport {
  std::vector<HeadFractions> heads;
  HeadFractions global;            // mass-weighted totals
  std::string policy = "T>A>B";    // overlap resolution order
};

// Label precedence: T (key position 1) > A (same token) > B (graph
// neighbor) > other. Fractions are labeled mass over total mass.
ClassificationReport classify(const AttentionDump& dump, const Graph& g);

void emit_report_csv(const ClassificationReport& report, const std::string& path);
void emit_report_json(const ClassificationReport& report, const std::string& path);
ClassificationReport load_report_json(const std::string& path);

}  // namespace dclab
