#include "dclab/classify.hpp"

#include <zlib.h>

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "dclab/io.hpp"

namespace dclab {

using nlohmann::json;

namespace {

bool has_gz_suffix(const std::string& path) {
  return path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

// line reader over plain or gzip files
class LineSource {
public:
  explicit LineSource(const std::string& path) : gz_(has_gz_suffix(path)) {
    if (gz_) {
      gzfile_ = gzopen(path.c_str(), "rb");
      if (!gzfile_) throw InvalidInput("read_dump: cannot open " + path);
      gzbuffer(gzfile_, 1 << 18);
    } else {
      file_.open(path, std::ios::binary);
      if (!file_) throw InvalidInput("read_dump: cannot open " + path);
    }
  }
  ~LineSource() {
    if (gzfile_) gzclose(gzfile_);
  }
  bool next(std::string& line) {
    if (!gz_) return static_cast<bool>(std::getline(file_, line));
    line.clear();
    char buf[1 << 14];
    for (;;) {
      if (gzgets(gzfile_, buf, sizeof(buf)) == nullptr) return !line.empty();
      line += buf;
      if (!line.empty() && line.back() == '\n') {
        line.pop_back();
        return true;
      }
    }
  }

private:
  bool gz_ = false;
  std::ifstream file_;
  gzFile gzfile_ = nullptr;
};

struct RawRecord {
  int32_t l, h, q, k;
  double w;
};

// fast path for the flat {"l":..,"h":..,"q":..,"k":..,"w":..} records;
// returns false when the line needs the full JSON parser
bool scan_record(const std::string& line, RawRecord& rec) {
  const char* p = line.c_str();
  const char* end = p + line.size();
  auto skip_ws = [&] { while (p < end && (*p == ' ' || *p == '\t')) ++p; };
  skip_ws();
  if (p >= end || *p != '{') return false;
  ++p;
  int seen = 0;
  for (;;) {
    skip_ws();
    if (p >= end) return false;
    if (*p == '}') return seen == 31;  // all five fields present
    if (*p != '"' || p + 2 >= end || p[2] != '"') return false;
    char key = p[1];
    p += 3;
    skip_ws();
    if (p >= end || *p != ':') return false;
    ++p;
    skip_ws();
    bool quoted = p < end && *p == '"';
    if (quoted) ++p;
    const char* vstart = p;
    while (p < end && *p != ',' && *p != '}' && *p != '"' && *p != ' ') ++p;
    double val;
    auto res = std::from_chars(vstart, p, val);
    if (res.ec != std::errc() || res.ptr != p) return false;
    if (quoted) {
      if (p >= end || *p != '"') return false;
      ++p;
    }
    switch (key) {
      case 'l': rec.l = static_cast<int32_t>(val); seen |= 1; break;
      case 'h': rec.h = static_cast<int32_t>(val); seen |= 2; break;
      case 'q': rec.q = static_cast<int32_t>(val); seen |= 4; break;
      case 'k': rec.k = static_cast<int32_t>(val); seen |= 8; break;
      case 'w': rec.w = val; seen |= 16; break;
      default: return false;
    }
    skip_ws();
    if (p < end && *p == ',') { ++p; continue; }
    if (p < end && *p == '}') return seen == 31;
    return false;
  }
}

bool parse_record_fallback(const std::string& line, RawRecord& rec) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return false;
  for (const char* key : {"l", "h", "q", "k", "w"})
    if (!j.contains(key)) return false;
  auto as_double = [&](const json& v) -> double {
    if (v.is_string()) return std::stod(v.get<std::string>());
    return v.get<double>();
  };
  rec.l = static_cast<int32_t>(as_double(j["l"]));
  rec.h = static_cast<int32_t>(as_double(j["h"]));
  rec.q = static_cast<int32_t>(as_double(j["q"]));
  rec.k = static_cast<int32_t>(as_double(j["k"]));
  rec.w = as_double(j["w"]);
  return true;
}

}  // namespace

AttentionDump read_dump(const std::string& path) {
  LineSource src(path);
  std::string line;
  int lineno = 0;
  // header
  do {
    if (!src.next(line)) throw InvalidInput("read_dump: " + path + " is empty");
    ++lineno;
  } while (line.empty());
  json header = json::parse(line, nullptr, false);
  if (header.is_discarded() || !header.is_object())
    throw InvalidInput("read_dump: malformed header at line 1");
  AttentionDump dump;
  try {
    dump.n_layers = header.at("n_layers").get<int>();
    dump.n_heads = header.at("n_heads").get<int>();
    dump.n = header.at("n").get<int>();
    dump.c = header.at("c").get<int>();
    if (!header.contains("tokens")) throw std::out_of_range("tokens");
    for (int t : header["tokens"].get<std::vector<int>>()) {
      if (t < 1 || t > dump.c)
        throw InvalidInput("read_dump: header token out of range");
      dump.tokens.push_back(t - 1);
    }
  } catch (const std::out_of_range&) {
    throw InvalidInput("read_dump: header is missing the token sequence or sizes");
  }
  if (static_cast<int>(dump.tokens.size()) != dump.n)
    throw InvalidInput("read_dump: header token count does not match n");

  // row sums for the flagging pass
  std::map<int64_t, double> row_sum;
  while (src.next(line)) {
    ++lineno;
    if (line.empty()) continue;
    RawRecord rec;
    if (!scan_record(line, rec) && !parse_record_fallback(line, rec))
      throw InvalidInput("read_dump: malformed record at line " + std::to_string(lineno));
    if (rec.l < 1 || rec.l > dump.n_layers || rec.h < 1 || rec.h > dump.n_heads)
      throw InvalidInput("read_dump: layer/head out of range at line " +
                         std::to_string(lineno));
    if (rec.q < 1 || rec.q > dump.n || rec.k < 1 || rec.k > dump.n)
      throw InvalidInput("read_dump: position out of range at line " +
                         std::to_string(lineno));
    if (rec.k > rec.q)
      throw InvalidInput("read_dump: key above the diagonal at line " +
                         std::to_string(lineno));
    if (rec.w < 0.0)
      throw InvalidInput("read_dump: negative weight at line " + std::to_string(lineno));
    dump.layer.push_back(rec.l - 1);
    dump.head.push_back(rec.h - 1);
    dump.query.push_back(rec.q - 1);
    dump.key.push_back(rec.k - 1);
    dump.weight.push_back(rec.w);
    int64_t id = (static_cast<int64_t>(rec.l - 1) * dump.n_heads + (rec.h - 1)) *
                     dump.n + (rec.q - 1);
    row_sum[id] += rec.w;
  }
  for (const auto& [id, sum] : row_sum)
    if (std::abs(sum - 1.0) > 1e-3) dump.flagged_rows.push_back(id);
  return dump;
}

void write_dump(const AttentionMap& map, const TokenSequence& seq,
                const std::string& path) {
  if (map.size() != seq.length()) throw InvalidInput("write_dump: size mismatch");
  const bool gz = has_gz_suffix(path);
  gzFile gzf = nullptr;
  std::ofstream file;
  if (gz) {
    gzf = gzopen(path.c_str(), "wb");
    if (!gzf) throw InvalidInput("write_dump: cannot write " + path);
    gzbuffer(gzf, 1 << 18);
  } else {
    file.open(path, std::ios::binary);
    if (!file) throw InvalidInput("write_dump: cannot write " + path);
  }
  auto put = [&](const std::string& s) {
    if (gz) {
      if (gzwrite(gzf, s.data(), static_cast<unsigned>(s.size())) !=
          static_cast<int>(s.size()))
        throw NumericError("write_dump: gzip write failed");
    } else {
      file << s;
    }
  };
  json header;
  header["n_layers"] = 1;
  header["n_heads"] = 1;
  header["n"] = map.size();
  header["c"] = seq.vocab_size;
  std::vector<int> toks(seq.tokens.begin(), seq.tokens.end());
  for (auto& t : toks) ++t;
  header["tokens"] = toks;
  put(header.dump() + "\n");

  std::string line;
  for (int k = 0; k < map.size(); ++k) {
    const double base = map.row_base(k);
    const int32_t* cols = map.row_cols(k);
    const double* ws = map.row_weights(k);
    const int cnt = map.row_entry_count(k);
    auto emit = [&](int col, double w) {
      line = "{\"l\":1,\"h\":1,\"q\":";
      line += std::to_string(k + 1);
      line += ",\"k\":";
      line += std::to_string(col + 1);
      line += ",\"w\":";
      line += format_double(w);
      line += "}\n";
      put(line);
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
  if (gz) gzclose(gzf);
}

ClassificationReport classify(const AttentionDump& dump, const Graph& g) {
  if (g.vertex_count != dump.c)
    throw InvalidInput("classify: graph size does not match dump vocabulary");
  const int H = dump.n_heads;
  std::vector<HeadFractions> heads(static_cast<size_t>(dump.n_layers) * H);
  for (int l = 0; l < dump.n_layers; ++l)
    for (int h = 0; h < H; ++h) {
      heads[l * H + h].layer = l;
      heads[l * H + h].head = h;
    }
  for (size_t i = 0; i < dump.record_count(); ++i) {
    const int q = dump.query[i];
    const int k = dump.key[i];
    if (q >= dump.n || k >= dump.n)
      throw InvalidInput("classify: position out of range");
    const int xq = dump.tokens[q];
    const int xk = dump.tokens[k];
    auto& acc = heads[dump.layer[i] * H + dump.head[i]];
    const double w = dump.weight[i];
    acc.mass += w;
    if (k == 0)
      acc.t += w;
    else if (xk == xq)
      acc.a += w;
    else if (g.adjacency(xq, xk) != 0.0)
      acc.b += w;
    else
      acc.other += w;
  }
  ClassificationReport report;
  HeadFractions& global = report.global;
  global.layer = -1;
  global.head = -1;
  for (auto& h : heads) {
    global.a += h.a;
    global.b += h.b;
    global.t += h.t;
    global.other += h.other;
    global.mass += h.mass;
    if (h.mass > 0.0) {
      h.a /= h.mass;
      h.b /= h.mass;
      h.t /= h.mass;
      h.other /= h.mass;
    }
    report.heads.push_back(h);
  }
  if (global.mass > 0.0) {
    global.a /= global.mass;
    global.b /= global.mass;
    global.t /= global.mass;
    global.other /= global.mass;
  }
  return report;
}

void emit_report_csv(const ClassificationReport& report, const std::string& path) {
  std::vector<std::string> header{"layer", "head", "frac_A", "frac_B", "frac_T",
                                  "frac_other"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& h : report.heads)
    rows.push_back({std::to_string(h.layer + 1), std::to_string(h.head + 1),
                    format_double(h.a), format_double(h.b), format_double(h.t),
                    format_double(h.other)});
  rows.push_back({"all", "all", format_double(report.global.a),
                  format_double(report.global.b), format_double(report.global.t),
                  format_double(report.global.other)});
  write_csv(path, header, rows);
}

void emit_report_json(const ClassificationReport& report, const std::string& path) {
  json j;
  j["policy"] = report.policy;
  j["heads"] = json::array();
  for (const auto& h : report.heads)
    j["heads"].push_back({{"layer", h.layer + 1},
                          {"head", h.head + 1},
                          {"frac_A", h.a},
                          {"frac_B", h.b},
                          {"frac_T", h.t},
                          {"frac_other", h.other},
                          {"mass", h.mass}});
  j["global"] = {{"frac_A", report.global.a},
                 {"frac_B", report.global.b},
                 {"frac_T", report.global.t},
                 {"frac_other", report.global.other},
                 {"mass", report.global.mass}};
  std::ofstream out(path);
  if (!out) throw InvalidInput("emit_report_json: cannot write " + path);
  out << j.dump(2) << '\n';
}

ClassificationReport load_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("load_report_json: cannot open " + path);
  json j = json::parse(in);
  ClassificationReport report;
  report.policy = j.at("policy").get<std::string>();
  for (const auto& h : j.at("heads")) {
    HeadFractions f;
    f.layer = h.at("layer").get<int>() - 1;
    f.head = h.at("head").get<int>() - 1;
    f.a = h.at("frac_A").get<double>();
    f.b = h.at("frac_B").get<double>();
    f.t = h.at("frac_T").get<double>();
    f.other = h.at("frac_other").get<double>();
    f.mass = h.at("mass").get<double>();
    report.heads.push_back(f);
  }
  const auto& g = j.at("global");
  report.global.a = g.at("frac_A").get<double>();
  report.global.b = g.at("frac_B").get<double>();
  report.global.t = g.at("frac_T").get<double>();
  report.global.other = g.at("frac_other").get<double>();
  report.global.mass = g.at("mass").get<double>();
  return report;
}

}  // namespace dclab
