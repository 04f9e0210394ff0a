#include "dclab/attention.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "dclab/threads.hpp"

namespace dclab {

using nlohmann::json;

std::string attn_type_name(AttnType t) {
  switch (t) {
    case AttnType::A: return "A";
    case AttnType::B: return "B";
    case AttnType::O: return "O";
    case AttnType::T: return "T";
    case AttnType::Mixture: return "mixture";
    case AttnType::Custom: return "custom";
  }
  return "custom";
}

namespace {

AttnType attn_type_from_name(const std::string& s) {
  if (s == "A") return AttnType::A;
  if (s == "B") return AttnType::B;
  if (s == "O") return AttnType::O;
  if (s == "T") return AttnType::T;
  if (s == "mixture") return AttnType::Mixture;
  return AttnType::Custom;
}

}  // namespace

double AttentionMap::row_sum(int k) const {
  double s = base_[k] * (k + 1);
  for (int64_t i = offsets_[k]; i < offsets_[k + 1]; ++i) s += weights_[i];
  return s;
}

void AttentionMap::begin_rows(int64_t expected_entries) {
  cols_.reserve(expected_entries);
  weights_.reserve(expected_entries);
  offsets_.assign(1, 0);
}

void AttentionMap::append_row(double base, const int32_t* cols, const double* weights,
                              int count) {
  const int k = static_cast<int>(offsets_.size()) - 1;
  base_[k] = base;
  for (int i = 0; i < count; ++i) {
    if (cols[i] > k) throw InvalidInput("attention row " + std::to_string(k + 1) +
                                        ": column above the diagonal");
    if (i > 0 && cols[i] <= cols[i - 1])
      throw InvalidInput("attention row " + std::to_string(k + 1) +
                         ": columns must be strictly ascending");
  }
  cols_.insert(cols_.end(), cols, cols + count);
  weights_.insert(weights_.end(), weights, weights + count);
  offsets_.push_back(static_cast<int64_t>(cols_.size()));
}

std::vector<std::vector<int32_t>> support_self(int c) {
  std::vector<std::vector<int32_t>> f(c);
  for (int x = 0; x < c; ++x) f[x] = {static_cast<int32_t>(x)};
  return f;
}

std::vector<std::vector<int32_t>> support_neighbors(const Graph& g) {
  std::vector<std::vector<int32_t>> f(g.vertex_count);
  auto lists = g.neighbor_lists();
  for (int x = 0; x < g.vertex_count; ++x)
    f[x].assign(lists[x].begin(), lists[x].end());
  return f;
}

std::vector<std::vector<int32_t>> support_all(int c) {
  std::vector<std::vector<int32_t>> f(c);
  for (int x = 0; x < c; ++x) {
    f[x].resize(c);
    for (int y = 0; y < c; ++y) f[x][y] = y;
  }
  return f;
}

namespace {

// Shared machinery for maps whose row k > c places weight 1/R_k on every
// occurrence of an admissible token. Rows below the traversal boundary are
// pure self-attention.
AttentionMap build_reflecting(const TokenSequence& seq,
                              std::vector<std::vector<int32_t>> support,
                              AttnType type) {
  const int n = seq.length();
  const int c = seq.vocab_size;
  FrequencyTable freq(seq);

  // pass 1: admissible-occurrence totals R_k via running counts
  std::vector<int64_t> row_nnz(n, 0);
  {
    std::vector<int32_t> cnt(c, 0);
    for (int k = 0; k < n; ++k) {
      ++cnt[seq.tokens[k]];
      if (k < c) {
        row_nnz[k] = 1;
        continue;
      }
      int64_t r = 0;
      for (int32_t y : support[seq.tokens[k]]) r += cnt[y];
      if (r == 0)
        throw InvalidInput("construct_typed: empty admissible set at row " +
                           std::to_string(k + 1));
      row_nnz[k] = r;
    }
  }

  AttentionMap map(n, type);
  int64_t total = 0;
  std::vector<int64_t> offsets(n + 1, 0);
  for (int k = 0; k < n; ++k) {
    offsets[k] = total;
    total += row_nnz[k];
  }
  offsets[n] = total;

  // pass 2: fill rows in parallel; each row merges the truncated occurrence
  // lists of its admissible tokens
  std::vector<int32_t> cols(total);
  std::vector<double> weights(total);
  parallel_for(0, n, [&](int k) {
    int64_t at = offsets[k];
    if (k < c) {
      cols[at] = k;
      weights[at] = 1.0;
      return;
    }
    const auto& adm = support[seq.tokens[k]];
    const double w = 1.0 / static_cast<double>(row_nnz[k]);
    // pointers into each admissible token's occurrence list
    int m = static_cast<int>(adm.size());
    std::vector<const int32_t*> cur(m), end(m);
    for (int i = 0; i < m; ++i) {
      const auto& occ = freq.occurrences(adm[i]);
      cur[i] = occ.data();
      end[i] = occ.data() + (std::upper_bound(occ.begin(), occ.end(), k) - occ.begin());
    }
    for (int64_t out = at; out < offsets[k + 1]; ++out) {
      int best = -1;
      int32_t bestcol = 0;
      for (int i = 0; i < m; ++i)
        if (cur[i] != end[i] && (best < 0 || *cur[i] < bestcol)) {
          best = i;
          bestcol = *cur[i];
        }
      cols[out] = bestcol;
      weights[out] = w;
      ++cur[best];
    }
  });

  map.begin_rows(total);
  for (int k = 0; k < n; ++k)
    map.append_row(0.0, cols.data() + offsets[k], weights.data() + offsets[k],
                   static_cast<int>(row_nnz[k]));
  map.set_support(std::move(support));
  return map;
}

}  // namespace

AttentionMap construct_typed(const TokenSequence& seq, const Graph& g, AttnType type) {
  const int n = seq.length();
  const int c = seq.vocab_size;
  if (g.vertex_count != c) throw InvalidInput("construct_typed: graph/sequence size mismatch");
  switch (type) {
    case AttnType::A:
      return build_reflecting(seq, support_self(c), AttnType::A);
    case AttnType::B:
      return build_reflecting(seq, support_neighbors(g), AttnType::B);
    case AttnType::O: {
      // uniform rows: pure base, no explicit entries
      AttentionMap map(n, AttnType::O);
      map.begin_rows(c);
      int32_t self_col = 0;
      double one = 1.0;
      for (int k = 0; k < n; ++k) {
        if (k < c) {
          self_col = k;
          map.append_row(0.0, &self_col, &one, 1);
        } else {
          map.append_row(1.0 / static_cast<double>(k + 1), nullptr, nullptr, 0);
        }
      }
      map.set_support(support_all(c));
      return map;
    }
    case AttnType::T: {
      AttentionMap map(n, AttnType::T);
      map.begin_rows(n);
      double one = 1.0;
      for (int k = 0; k < n; ++k) {
        int32_t col = k < c ? k : 0;
        map.append_row(0.0, &col, &one, 1);
      }
      return map;
    }
    default:
      throw InvalidInput("construct_typed: use construct_singleton/mix for this type");
  }
}

AttentionMap construct_singleton(const TokenSequence& seq, const Graph& g,
                                 const std::vector<int32_t>& f) {
  const int c = seq.vocab_size;
  if (g.vertex_count != c) throw InvalidInput("construct_singleton: size mismatch");
  if (static_cast<int>(f.size()) != c)
    throw InvalidInput("construct_singleton: f must map every token");
  std::vector<std::vector<int32_t>> support(c);
  for (int x = 0; x < c; ++x) {
    if (f[x] < 0 || f[x] >= c) throw InvalidInput("construct_singleton: f out of range");
    support[x] = {f[x]};
  }
  return build_reflecting(seq, std::move(support), AttnType::Custom);
}

AttentionMap mix(const AttentionMap& a, const AttentionMap& b, const AttentionMap& o,
                 const AttentionMap& t, const MixtureWeights& rho) {
  const AttentionMap* maps[4] = {&a, &b, &o, &t};
  const AttnType tags[4] = {AttnType::A, AttnType::B, AttnType::O, AttnType::T};
  const double ws[4] = {rho.a, rho.b, rho.o, rho.t};
  const int n = a.size();
  for (int i = 0; i < 4; ++i) {
    if (maps[i]->type() != tags[i])
      throw InvalidInput("mix: map " + std::to_string(i) + " carries tag " +
                         attn_type_name(maps[i]->type()) + ", expected " +
                         attn_type_name(tags[i]));
    if (maps[i]->size() != n) throw InvalidInput("mix: size mismatch");
    if (ws[i] < 0.0) throw InvalidInput("mix: negative weight");
  }
  if (std::abs(rho.sum() - 1.0) > 1e-12)
    throw InvalidInput("mix: weights must sum to 1");

  AttentionMap out(n, AttnType::Mixture);
  out.set_mixture(rho);
  int64_t expected = 0;
  for (int i = 0; i < 4; ++i) expected += maps[i]->entry_count();
  out.begin_rows(expected);

  std::vector<int32_t> mcols;
  std::vector<double> mweights;
  for (int k = 0; k < n; ++k) {
    double base = 0.0;
    for (int i = 0; i < 4; ++i) base += ws[i] * maps[i]->row_base(k);
    mcols.clear();
    mweights.clear();
    // 4-way ordered merge, weights summed on equal columns
    int idx[4] = {0, 0, 0, 0};
    for (;;) {
      int32_t next = INT32_MAX;
      for (int i = 0; i < 4; ++i)
        if (idx[i] < maps[i]->row_entry_count(k))
          next = std::min(next, maps[i]->row_cols(k)[idx[i]]);
      if (next == INT32_MAX) break;
      double w = 0.0;
      for (int i = 0; i < 4; ++i)
        while (idx[i] < maps[i]->row_entry_count(k) &&
               maps[i]->row_cols(k)[idx[i]] == next) {
          w += ws[i] * maps[i]->row_weights(k)[idx[i]];
          ++idx[i];
        }
      mcols.push_back(next);
      mweights.push_back(w);
    }
    out.append_row(base, mcols.data(), mweights.data(), static_cast<int>(mcols.size()));
  }
  return out;
}

AttentionMap construct_mixture(const TokenSequence& seq, const Graph& g,
                               const MixtureWeights& rho) {
  if (std::abs(rho.sum() - 1.0) > 1e-12)
    throw InvalidInput("construct_mixture: weights must sum to 1");
  const int n = seq.length();
  const int c = seq.vocab_size;
  if (g.vertex_count != c) throw InvalidInput("construct_mixture: size mismatch");
  FrequencyTable freq(seq);
  auto nbrs = support_neighbors(g);

  // pass 1: per-row counts for the A and B parts; T adds column 0 when not
  // already admissible there (token at position 0 is 0 by the traversal)
  std::vector<int32_t> cntA(n, 0);
  std::vector<int64_t> cntB(n, 0), row_nnz(n, 0);
  {
    std::vector<int32_t> cnt(c, 0);
    for (int k = 0; k < n; ++k) {
      int x = seq.tokens[k];
      ++cnt[x];
      if (k < c) {
        row_nnz[k] = 1;
        continue;
      }
      cntA[k] = cnt[x];
      int64_t rb = 0;
      for (int32_t y : nbrs[x]) rb += cnt[y];
      cntB[k] = rb;
      // column 0 already appears in the merged occurrence stream iff the
      // first token is x itself or one of its neighbors
      const int tok0 = seq.tokens[0];
      bool col0_covered = (x == tok0) || g.adjacency(tok0, x) != 0.0;
      row_nnz[k] = cntA[k] + rb + (col0_covered ? 0 : 1);
    }
  }

  int64_t total = 0;
  std::vector<int64_t> offsets(n + 1, 0);
  for (int k = 0; k < n; ++k) {
    offsets[k] = total;
    total += row_nnz[k];
  }
  offsets[n] = total;

  std::vector<int32_t> cols(total);
  std::vector<double> weights(total);
  parallel_for(0, n, [&](int k) {
    int64_t at = offsets[k];
    if (k < c) {
      cols[at] = k;
      weights[at] = 1.0;
      return;
    }
    const int x = seq.tokens[k];
    const double wA = rho.a * (1.0 / static_cast<double>(cntA[k]));
    const double wB = cntB[k] > 0 ? rho.b * (1.0 / static_cast<double>(cntB[k])) : 0.0;
    // merge self occurrences with neighbor occurrences (disjoint token sets)
    const auto& self_occ = freq.occurrences(x);
    int selfn = static_cast<int>(std::upper_bound(self_occ.begin(), self_occ.end(), k) -
                                 self_occ.begin());
    int m = static_cast<int>(nbrs[x].size());
    std::vector<const int32_t*> cur(m + 1), end(m + 1);
    std::vector<double> wof(m + 1);
    cur[0] = self_occ.data();
    end[0] = self_occ.data() + selfn;
    wof[0] = wA;
    for (int i = 0; i < m; ++i) {
      const auto& occ = freq.occurrences(nbrs[x][i]);
      cur[i + 1] = occ.data();
      end[i + 1] =
          occ.data() + (std::upper_bound(occ.begin(), occ.end(), k) - occ.begin());
      wof[i + 1] = wB;
    }
    int64_t out = at;
    bool t_pending = rho.t >= 0.0;  // column 0 always gets the T mass
    for (;;) {
      int best = -1;
      int32_t bestcol = 0;
      for (int i = 0; i <= m; ++i)
        if (cur[i] != end[i] && (best < 0 || *cur[i] < bestcol)) {
          best = i;
          bestcol = *cur[i];
        }
      if (best < 0) break;
      double w = wof[best];
      if (t_pending && bestcol == 0) {
        w += rho.t;
        t_pending = false;
      } else if (t_pending && bestcol > 0) {
        cols[out] = 0;
        weights[out] = rho.t;
        ++out;
        t_pending = false;
      }
      cols[out] = bestcol;
      weights[out] = w;
      ++out;
      ++cur[best];
    }
    if (t_pending) {
      cols[out] = 0;
      weights[out] = rho.t;
      ++out;
    }
  });

  AttentionMap map(n, AttnType::Mixture);
  map.set_mixture(rho);
  map.begin_rows(total);
  for (int k = 0; k < n; ++k) {
    // expressions ordered exactly as in mix() so the two paths agree bitwise
    double base = k < c ? 0.0 : rho.o * (1.0 / static_cast<double>(k + 1));
    if (k < c) weights[offsets[k]] = ((rho.a + rho.b) + rho.o) + rho.t;
    map.append_row(base, cols.data() + offsets[k], weights.data() + offsets[k],
                   static_cast<int>(row_nnz[k]));
  }
  return map;
}

AttentionValidity verify_attention(const AttentionMap& map) {
  AttentionValidity v;
  bool nonneg = true;
  double worst = 0.0;
  for (int k = 0; k < map.size(); ++k) {
    if (map.row_base(k) < 0.0) nonneg = false;
    const double* w = map.row_weights(k);
    for (int i = 0; i < map.row_entry_count(k); ++i)
      if (w[i] < 0.0) nonneg = false;
    worst = std::max(worst, std::abs(map.row_sum(k) - 1.0));
  }
  v.worst_row_sum_error = worst;
  v.valid = nonneg && worst <= 1e-9;
  return v;
}

double niceness(const AttentionMap& map) {
  double psi = 0.0;
  for (int k = 0; k < map.size(); ++k) {
    const double kk = static_cast<double>(k + 1);
    const double base = map.row_base(k);
    double prefix = 0.0;
    // candidates: j = 1, each entry column, j = k
    double row_best = base > 0.0 ? kk * base : 0.0;  // j = 1 with no entry there
    const int32_t* cols = map.row_cols(k);
    const double* ws = map.row_weights(k);
    for (int i = 0; i < map.row_entry_count(k); ++i) {
      prefix += ws[i];
      const double j = static_cast<double>(cols[i] + 1);
      row_best = std::max(row_best, kk * (base * j + prefix) / j);
    }
    row_best = std::max(row_best, base * kk + prefix);  // j = k
    psi = std::max(psi, row_best);
  }
  return psi;
}

double balance_deviation(const AttentionMap& map, const TokenSequence& seq,
                         const std::vector<std::vector<int32_t>>& f) {
  const int n = map.size();
  const int c = seq.vocab_size;
  if (seq.length() != n) throw InvalidInput("balance_deviation: sequence/map size mismatch");
  FrequencyTable freq(seq);
  std::vector<double> mass(c, 0.0);
  std::vector<int32_t> touched;
  double worst = 0.0;
  for (int k = c; k < n; ++k) {
    const auto& adm = f[seq.tokens[k]];
    if (adm.empty()) continue;
    int64_t r = 0;
    for (int32_t y : adm) r += freq.count(y, k + 1);
    if (r == 0) continue;
    touched.clear();
    const int32_t* cols = map.row_cols(k);
    const double* ws = map.row_weights(k);
    for (int i = 0; i < map.row_entry_count(k); ++i) {
      int y = seq.tokens[cols[i]];
      if (mass[y] == 0.0) touched.push_back(y);
      mass[y] += ws[i];
    }
    const double base = map.row_base(k);
    const double scale = std::sqrt(static_cast<double>(k + 1));
    for (int32_t y : adm) {
      double got = mass[y] + base * freq.count(y, k + 1);
      double want = static_cast<double>(freq.count(y, k + 1)) / static_cast<double>(r);
      worst = std::max(worst, scale * std::abs(got - want));
    }
    for (int32_t y : touched) mass[y] = 0.0;
  }
  return worst;
}

Matrix reflected_latent_image(const std::vector<std::vector<int32_t>>& f,
                              const Matrix& latents, const Vector& pi) {
  const int c = static_cast<int>(latents.cols());
  if (static_cast<int>(f.size()) != c || pi.size() != c)
    throw InvalidInput("reflected_latent_image: dimension mismatch");
  Matrix out = Matrix::Zero(latents.rows(), c);
  for (int x = 0; x < c; ++x) {
    double total = 0.0;
    for (int32_t y : f[x]) total += pi(y);
    if (total == 0.0) continue;  // empty f(x): zero column
    Vector acc = Vector::Zero(latents.rows());
    for (int32_t y : f[x]) acc += pi(y) * latents.col(y);
    out.col(x) = acc / total;
  }
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void write_attention_jsonl(const AttentionMap& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("write_attention_jsonl: cannot write " + path);
  json header;
  header["n"] = map.size();
  header["type"] = attn_type_name(map.type());
  const auto& rho = map.mixture();
  header["rho"] = {rho.a, rho.b, rho.o, rho.t};
  out << header.dump() << '\n';
  std::string line;
  for (int k = 0; k < map.size(); ++k) {
    const double base = map.row_base(k);
    const int32_t* cols = map.row_cols(k);
    const double* ws = map.row_weights(k);
    const int cnt = map.row_entry_count(k);
    auto emit = [&](int col, double w) {
      line.clear();
      line += "{\"row\":";
      line += std::to_string(k + 1);
      line += ",\"col\":";
      line += std::to_string(col + 1);
      line += ",\"weight\":";
      line += format_double(w);
      line += "}\n";
      out << line;
    };
    if (base == 0.0) {
      for (int i = 0; i < cnt; ++i) emit(cols[i], ws[i]);
    } else {
      int i = 0;
      for (int col = 0; col <= k; ++col) {
        double w = base;
        if (i < cnt && cols[i] == col) w += ws[i++];
        emit(col, w);
      }
    }
  }
}

AttentionMap read_attention_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("read_attention_jsonl: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw InvalidInput("read_attention_jsonl: empty file " + path);
  json header = json::parse(line);
  const int n = header.at("n").get<int>();
  AttentionMap map(n, attn_type_from_name(header.at("type").get<std::string>()));
  if (header.contains("rho")) {
    auto r = header["rho"].get<std::vector<double>>();
    if (r.size() == 4) map.set_mixture({r[0], r[1], r[2], r[3]});
  }
  std::vector<std::vector<int32_t>> cols(n);
  std::vector<std::vector<double>> ws(n);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.contains("row") || !rec.contains("col") ||
        !rec.contains("weight"))
      throw InvalidInput("read_attention_jsonl: malformed record at line " +
                         std::to_string(lineno));
    int row = rec["row"].get<int>() - 1;
    int col = rec["col"].get<int>() - 1;
    if (row < 0 || row >= n || col < 0 || col > row)
      throw InvalidInput("read_attention_jsonl: indices out of range at line " +
                         std::to_string(lineno));
    cols[row].push_back(col);
    ws[row].push_back(rec["weight"].get<double>());
  }
  int64_t total = 0;
  for (const auto& cv : cols) total += static_cast<int64_t>(cv.size());
  map.begin_rows(total);
  for (int k = 0; k < n; ++k)
    map.append_row(0.0, cols[k].data(), ws[k].data(), static_cast<int>(cols[k].size()));
  return map;
}

}  // namespace dclab
