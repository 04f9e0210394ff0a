#include "dclab/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "dclab/rng.hpp"

namespace dclab {

using nlohmann::json;

TokenSequence generate_sequence(const ReweightedGraph& rg, int n, double epsilon,
                                uint64_t seed) {
  const int c = rg.vertex_count();
  if (n <= 10 * c) throw InvalidInput("generate_sequence: need n > 10c");
  if (epsilon < 0.0 || epsilon >= 1.0)
    throw InvalidInput("generate_sequence: need 0 <= epsilon < 1");

  // per-row cumulative kernels over the base adjacency
  const Matrix& adj = rg.base.adjacency;
  std::vector<std::vector<double>> cum(c);
  std::vector<std::vector<int32_t>> nbr(c);
  for (int x = 0; x < c; ++x) {
    double acc = 0.0;
    for (int y = 0; y < c; ++y) {
      if (adj(x, y) > 0.0) {
        acc += adj(x, y);
        nbr[x].push_back(y);
        cum[x].push_back(acc);
      }
    }
    if (nbr[x].empty()) throw InvalidInput("generate_sequence: isolated vertex");
  }

  // cumulative stationary distribution for the initial draw
  std::vector<double> cpi(c);
  double acc = 0.0;
  for (int y = 0; y < c; ++y) {
    acc += rg.pi(y);
    cpi[y] = acc;
  }

  TokenSequence seq;
  seq.vocab_size = c;
  seq.epsilon = epsilon;
  seq.seed = seed;
  seq.tokens.resize(n);
  seq.noise_flags.assign(n, 0);

  Rng rng(seed);
  for (int k = 0; k < c; ++k) seq.tokens[k] = k;

  auto pick = [](const std::vector<double>& cumw, double r) {
    double target = r * cumw.back();
    auto it = std::upper_bound(cumw.begin(), cumw.end(), target);
    if (it == cumw.end()) --it;
    return static_cast<int>(it - cumw.begin());
  };

  seq.tokens[c] = pick(cpi, rng.uniform());
  for (int k = c + 1; k < n; ++k) {
    double jump = rng.uniform();
    if (jump < epsilon) {
      seq.tokens[k] = static_cast<int32_t>(rng.below(static_cast<uint32_t>(c)));
      seq.noise_flags[k] = 1;
    } else {
      int x = seq.tokens[k - 1];
      seq.tokens[k] = nbr[x][pick(cum[x], rng.uniform())];
    }
  }
  return seq;
}

void save_sequence_json(const TokenSequence& seq, const std::string& path) {
  json j;
  j["c"] = seq.vocab_size;
  j["n"] = seq.length();
  j["epsilon"] = seq.epsilon;
  j["seed"] = seq.seed;
  std::vector<int> toks(seq.tokens.begin(), seq.tokens.end());
  for (auto& t : toks) ++t;  // 1-based on disk
  j["tokens"] = toks;
  std::vector<bool> flags(seq.noise_flags.begin(), seq.noise_flags.end());
  j["noise_flags"] = flags;
  std::ofstream out(path);
  if (!out) throw InvalidInput("save_sequence_json: cannot write " + path);
  out << j.dump() << '\n';
}

TokenSequence load_sequence_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("load_sequence_json: cannot open " + path);
  json j = json::parse(in);
  TokenSequence seq;
  seq.vocab_size = j.at("c").get<int>();
  seq.epsilon = j.at("epsilon").get<double>();
  seq.seed = j.at("seed").get<uint64_t>();
  for (int t : j.at("tokens").get<std::vector<int>>()) {
    if (t < 1 || t > seq.vocab_size)
      throw InvalidInput("load_sequence_json: token out of range");
    seq.tokens.push_back(t - 1);
  }
  for (bool f : j.at("noise_flags").get<std::vector<bool>>())
    seq.noise_flags.push_back(f ? 1 : 0);
  if (seq.noise_flags.size() != seq.tokens.size())
    throw InvalidInput("load_sequence_json: tokens/noise_flags length mismatch");
  if (static_cast<int>(seq.tokens.size()) != j.at("n").get<int>())
    throw InvalidInput("load_sequence_json: n does not match tokens length");
  return seq;
}

FrequencyTable::FrequencyTable(const TokenSequence& seq)
    : positions_(seq.vocab_size), last_(seq.vocab_size, -1) {
  for (int k = 0; k < seq.length(); ++k) {
    int x = seq.tokens[k];
    positions_[x].push_back(k);
    last_[x] = k;
  }
}

int FrequencyTable::count(int token, int prefix) const {
  const auto& pos = positions_[token];
  return static_cast<int>(std::upper_bound(pos.begin(), pos.end(), prefix - 1) -
                          pos.begin());
}

ConcentrationReport concentration_report(const TokenSequence& seq, const Vector& pi,
                                         int subset_count, uint64_t subset_seed) {
  if (seq.epsilon != 0.0)
    throw InvalidInput("concentration_report: requires an epsilon = 0 sequence");
  const int c = seq.vocab_size;
  const int n = seq.length();
  const double logn = std::log(static_cast<double>(n));
  ConcentrationReport report;

  // running counts; statistic evaluated at every prefix k in (c, n]
  std::vector<int> cnt(c, 0);

  // random subsets, fixed by subset_seed
  Rng rng(subset_seed);
  std::vector<std::vector<char>> member(subset_count, std::vector<char>(c, 0));
  report.per_set_worst.resize(subset_count);
  std::vector<double> set_pi(subset_count, 0.0);
  for (int s = 0; s < subset_count; ++s) {
    for (int y = 0; y < c; ++y)
      if (rng.uniform() < 0.5) {
        member[s][y] = 1;
        report.per_set_worst[s].members.push_back(y);
        set_pi[s] += pi(y);
      }
  }
  std::vector<int> set_cnt(subset_count, 0);

  for (int k = 0; k < n; ++k) {
    int x = seq.tokens[k];
    ++cnt[x];
    for (int s = 0; s < subset_count; ++s)
      if (member[s][x]) ++set_cnt[s];
    const int prefix = k + 1;
    if (prefix <= c) continue;
    const double scale = std::sqrt(static_cast<double>(prefix)) / logn;
    for (int y = 0; y < c; ++y) {
      double dev = scale * std::abs(static_cast<double>(cnt[y]) / prefix - pi(y));
      if (dev > report.max_scaled_deviation) report.max_scaled_deviation = dev;
    }
    for (int s = 0; s < subset_count; ++s) {
      double dev =
          scale * std::abs(static_cast<double>(set_cnt[s]) / prefix - set_pi[s]);
      if (dev > report.per_set_worst[s].worst) report.per_set_worst[s].worst = dev;
    }
  }
  for (const auto& s : report.per_set_worst)
    report.overall_set_worst = std::max(report.overall_set_worst, s.worst);
  return report;
}

std::vector<bool> second_half_check(const TokenSequence& seq) {
  const int n = seq.length();
  const int half = (n + 1) / 2;  // 1-based ceil(n/2)
  std::vector<bool> out(seq.vocab_size, false);
  for (int k = half; k < n; ++k) out[seq.tokens[k]] = true;  // 1-based position k+1 > half
  return out;
}

std::vector<int> non_neighbor_counts(const TokenSequence& seq, const Graph& g,
                                     int window) {
  const int n = seq.length();
  const int c = seq.vocab_size;
  if (window < 2 || window > n)
    throw InvalidInput("non_neighbor_counts: need 2 <= window <= n");
  // bad[j] = 1 iff transition starting at 0-based j is a non-edge, j >= c
  std::vector<int> bad(n, 0);
  for (int j = c; j + 1 < n; ++j)
    bad[j] = g.adjacency(seq.tokens[j], seq.tokens[j + 1]) == 0.0 ? 1 : 0;
  std::vector<int> prefix(n + 1, 0);
  for (int j = 0; j < n; ++j) prefix[j + 1] = prefix[j] + bad[j];
  std::vector<int> out;
  out.reserve(n - window + 1);
  for (int k = window; k <= n; ++k) {
    // 1-based transitions j in [k-window+1, k-1]  ->  0-based [k-window, k-2]
    int lo = k - window;
    int hi = k - 2;
    out.push_back(hi >= lo ? prefix[hi + 1] - prefix[lo] : 0);
  }
  return out;
}

void write_position_count_csv(const std::vector<int>& counts, int window,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("write_position_count_csv: cannot write " + path);
  out << "position,count\n";
  for (size_t i = 0; i < counts.size(); ++i)
    out << (window + i) << ',' << counts[i] << '\n';
}

}  // namespace dclab
