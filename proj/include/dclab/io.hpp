#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dclab/common.hpp"
#include "dclab/graph.hpp"

namespace dclab {

// --- tiny CSV layer: every artifact CSV has a header row and must be
// readable back by this loader (round-trip contract) ---
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
CsvTable read_csv(const std::string& path);

std::string format_double(double v);  // shortest round-trip representation

// spectra CSV: index,eigenvalue,component_1..component_c
void write_spectra_csv(const SpectralBasis& basis, const std::string& path);

// --- hashing (manifests) ---
std::string sha256_hex(const void* data, size_t len);
std::string sha256_file_hex(const std::string& path);

}  // namespace dclab
