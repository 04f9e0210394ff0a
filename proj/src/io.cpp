#include "dclab/io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dclab {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("write_csv: cannot write " + path);
  for (size_t i = 0; i < header.size(); ++i)
    out << header[i] << (i + 1 < header.size() ? ',' : '\n');
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw InvalidInput("write_csv: row width does not match header");
    for (size_t i = 0; i < row.size(); ++i)
      out << row[i] << (i + 1 < row.size() ? ',' : '\n');
  }
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("read_csv: cannot open " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != table.header.size())
        throw InvalidInput("read_csv: ragged row in " + path);
      table.rows.push_back(std::move(cells));
    }
  }
  if (first) throw InvalidInput("read_csv: " + path + " has no header row");
  return table;
}

void write_spectra_csv(const SpectralBasis& basis, const std::string& path) {
  const int c = static_cast<int>(basis.eigenvalues.size());
  std::vector<std::string> header{"index", "eigenvalue"};
  for (int j = 0; j < c; ++j) header.push_back("component_" + std::to_string(j + 1));
  std::vector<std::vector<std::string>> rows;
  for (int i = 0; i < c; ++i) {
    std::vector<std::string> row{std::to_string(i + 1),
                                 format_double(basis.eigenvalues(i))};
    for (int j = 0; j < c; ++j) row.push_back(format_double(basis.eigenvectors(j, i)));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

// ---------------- SHA-256 ----------------

namespace {

struct Sha256 {
  uint32_t state[8] = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                       0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
  uint64_t bits = 0;
  uint8_t buf[64];
  size_t fill = 0;

  static uint32_t rotr(uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

  void block(const uint8_t* p) {
    static const uint32_t K[64] = {
        0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1,
        0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3,
        0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
        0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
        0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
        0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
        0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
        0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
        0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
        0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
        0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};
    uint32_t w[64];
    for (int i = 0; i < 16; ++i)
      w[i] = (uint32_t(p[4 * i]) << 24) | (uint32_t(p[4 * i + 1]) << 16) |
             (uint32_t(p[4 * i + 2]) << 8) | uint32_t(p[4 * i + 3]);
    for (int i = 16; i < 64; ++i) {
      uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
      uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
      w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    uint32_t a = state[0], b = state[1], cc = state[2], d = state[3];
    uint32_t e = state[4], f = state[5], g = state[6], h = state[7];
    for (int i = 0; i < 64; ++i) {
      uint32_t S1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
      uint32_t ch = (e & f) ^ (~e & g);
      uint32_t t1 = h + S1 + ch + K[i] + w[i];
      uint32_t S0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
      uint32_t maj = (a & b) ^ (a & cc) ^ (b & cc);
      uint32_t t2 = S0 + maj;
      h = g; g = f; f = e; e = d + t1;
      d = cc; cc = b; b = a; a = t1 + t2;
    }
    state[0] += a; state[1] += b; state[2] += cc; state[3] += d;
    state[4] += e; state[5] += f; state[6] += g; state[7] += h;
  }

  void update(const uint8_t* p, size_t len) {
    bits += uint64_t(len) * 8;
    while (len > 0) {
      size_t take = std::min(len, sizeof(buf) - fill);
      std::memcpy(buf + fill, p, take);
      fill += take;
      p += take;
      len -= take;
      if (fill == 64) {
        block(buf);
        fill = 0;
      }
    }
  }

  std::string finish() {
    uint8_t pad = 0x80;
    uint64_t total = bits;
    update(&pad, 1);
    uint8_t zero = 0;
    while (fill != 56) update(&zero, 1);
    uint8_t lenb[8];
    for (int i = 0; i < 8; ++i) lenb[i] = uint8_t(total >> (56 - 8 * i));
    update(lenb, 8);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (uint32_t s : state)
      for (int i = 3; i >= 0; --i) {
        uint8_t byte = uint8_t(s >> (8 * i));
        out.push_back(hex[byte >> 4]);
        out.push_back(hex[byte & 0xf]);
      }
    return out;
  }
};

}  // namespace

std::string sha256_hex(const void* data, size_t len) {
  Sha256 h;
  h.update(static_cast<const uint8_t*>(data), len);
  return h.finish();
}

std::string sha256_file_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("sha256_file_hex: cannot open " + path);
  Sha256 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h.update(reinterpret_cast<const uint8_t*>(buf), static_cast<size_t>(in.gcount()));
  }
  return h.finish();
}

}  // namespace dclab
