#pragma once

#include <map>
#include <string>
#include <vector>

#include "dclab/classify.hpp"
#include "dclab/diagnostics.hpp"

namespace dclab {

// Full experiment description; see configs/grid16.json for the canonical
// shape. Layer specs may be given as an explicit list or as
// {"count": L, "rho": [...], "sigma": ..., "residual": ...}.
struct ExperimentConfig {
  std::string graph_spec;                   // grid:4x4 | ring:16 | complete:8 | file:...
  StationaryMode stationary = StationaryMode::Walk;
  int n = 0;
  double epsilon = 0.0;
  std::string embedding_scheme = "gaussian";  // gaussian | orthogonal | file:PATH
  int dim = 64;
  std::vector<LayerSpec> layers;
  int q = 2;
  uint64_t seed = 0;
  std::string out_dir = ".";
  std::vector<std::string> emit;            // subset of the emit vocabulary
  int noise_window = 500;                   // Fig.-4-style sliding window
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);

// Stage-seed streams recorded in the manifest.
enum class Stage : uint64_t { Sequence = 0, Embeddings = 1, Subsets = 2 };

struct RunResult {
  std::string manifest_path;
  std::map<std::string, std::string> file_hashes;  // name -> sha256
};

// generate -> construct attention -> forward -> requested diagnostics.
// Writes every artifact plus manifest.json into out_dir; identical
// (config, seed) produce identical hashes regardless of the thread count.
RunResult run_experiment(const ExperimentConfig& config);

}  // namespace dclab
