#include "dclab/experiment.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>

#include <nlohmann/json.hpp>

#include "dclab/io.hpp"
#include "dclab/rng.hpp"

namespace dclab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Sigma sigma_from_json(const json& spec, const std::string& where) {
  if (spec.is_string()) {
    const std::string s = spec.get<std::string>();
    if (s == "identity") return Sigma::identity();
    throw InvalidInput(where + ": unknown sigma '" + s + "'");
  }
  if (!spec.is_object()) throw InvalidInput(where + ": sigma must be a string or object");
  const std::string kind = spec.value("kind", "");
  if (kind == "identity") return Sigma::identity();
  if (kind == "scaled_tanh") {
    if (!spec.contains("scale")) throw InvalidInput(where + ": scaled_tanh needs scale");
    return Sigma::scaled_tanh(spec["scale"].get<double>());
  }
  if (kind == "linear") {
    if (spec.contains("file")) {
      Matrix m = load_embeddings_csv(spec["file"].get<std::string>());
      return Sigma::linear(std::move(m));
    }
    if (!spec.contains("matrix")) throw InvalidInput(where + ": linear needs matrix or file");
    auto rows = spec["matrix"].get<std::vector<std::vector<double>>>();
    const int d = static_cast<int>(rows.size());
    Matrix m(d, d);
    for (int i = 0; i < d; ++i) {
      if (static_cast<int>(rows[i].size()) != d)
        throw InvalidInput(where + ": linear matrix must be square");
      for (int j = 0; j < d; ++j) m(i, j) = rows[i][j];
    }
    return Sigma::linear(std::move(m));
  }
  if (kind == "composed") {
    std::vector<Sigma> parts;
    int idx = 0;
    for (const auto& p : spec.at("parts"))
      parts.push_back(sigma_from_json(p, where + ".parts[" + std::to_string(idx++) + "]"));
    return Sigma::composed(std::move(parts));
  }
  throw InvalidInput(where + ": unknown sigma kind '" + kind + "'");
}

MixtureWeights rho_from_json(const json& spec, const std::string& where) {
  auto v = spec.get<std::vector<double>>();
  if (v.size() != 4) throw InvalidInput(where + ": rho must have 4 entries [A,B,O,T]");
  MixtureWeights rho{v[0], v[1], v[2], v[3]};
  for (double w : {rho.a, rho.b, rho.o, rho.t})
    if (w < 0.0) throw InvalidInput(where + ": rho entries must be non-negative");
  if (std::abs(rho.sum() - 1.0) > 1e-12)
    throw InvalidInput(where + ": rho sums to " + format_double(rho.sum()) +
                       ", expected 1");
  return rho;
}

const std::vector<std::string> kEmitVocabulary = {
    "spectra", "trace", "snapshot", "convergence", "energy", "pca", "noise", "classify"};

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw InvalidInput("config: not valid JSON");
  ExperimentConfig cfg;
  try {
    cfg.graph_spec = j.at("graph").get<std::string>();
  } catch (...) {
    throw InvalidInput("config.graph: required (e.g. \"grid:4x4\")");
  }
  cfg.stationary = stationary_mode_from_string(j.value("stationary_mode", "walk"));
  if (!j.contains("n")) throw InvalidInput("config.n: required");
  cfg.n = j["n"].get<int>();
  cfg.epsilon = j.value("epsilon", 0.0);
  if (cfg.epsilon < 0.0 || cfg.epsilon >= 1.0)
    throw InvalidInput("config.epsilon: need 0 <= epsilon < 1");
  if (j.contains("embedding")) {
    const auto& e = j["embedding"];
    cfg.embedding_scheme = e.value("scheme", "gaussian");
    cfg.dim = e.value("dim", 64);
  }
  if (cfg.dim < 2) throw InvalidInput("config.embedding.dim: need d >= 2");

  if (!j.contains("layers")) throw InvalidInput("config.layers: required");
  const auto& layers = j["layers"];
  auto parse_layer = [&](const json& spec, const std::string& where) {
    LayerSpec out;
    if (!spec.contains("rho")) throw InvalidInput(where + ".rho: required");
    out.rho = rho_from_json(spec["rho"], where + ".rho");
    out.sigma = spec.contains("sigma") ? sigma_from_json(spec["sigma"], where + ".sigma")
                                       : Sigma::identity();
    out.residual = spec.value("residual", false);
    return out;
  };
  if (layers.is_array()) {
    int idx = 0;
    for (const auto& spec : layers)
      cfg.layers.push_back(parse_layer(spec, "config.layers[" + std::to_string(idx++) + "]"));
  } else if (layers.is_object()) {
    const int count = layers.value("count", 0);
    if (count < 1) throw InvalidInput("config.layers.count: need >= 1");
    LayerSpec proto = parse_layer(layers, "config.layers");
    cfg.layers.assign(count, proto);
  } else {
    throw InvalidInput("config.layers: must be a list or {count, rho, ...}");
  }
  if (cfg.layers.empty()) throw InvalidInput("config.layers: need at least one layer");

  if (!j.contains("q")) throw InvalidInput("config.q: required");
  cfg.q = j["q"].get<int>();
  cfg.seed = j.value("seed", 0ull);
  cfg.out_dir = j.value("out_dir", ".");
  cfg.noise_window = j.value("noise_window", 500);
  if (!j.contains("emit")) throw InvalidInput("config.emit: required");
  for (const auto& e : j["emit"].get<std::vector<std::string>>()) {
    if (std::find(kEmitVocabulary.begin(), kEmitVocabulary.end(), e) ==
        kEmitVocabulary.end())
      throw InvalidInput("config.emit: unknown artifact '" + e + "'");
    cfg.emit.push_back(e);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return config_from_json_text(text);
}

namespace {

struct StageGuard {
  // wraps numeric errors with the stage name so the CLI can report it
  template <typename F>
  static auto run(const std::string& stage, F&& f) {
    try {
      return f();
    } catch (const NumericError& e) {
      throw NumericError(stage + ": " + e.what());
    }
  }
};

bool wants(const ExperimentConfig& cfg, const std::string& emit) {
  return std::find(cfg.emit.begin(), cfg.emit.end(), emit) != cfg.emit.end();
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
  const fs::path out_dir(cfg.out_dir);
  fs::create_directories(out_dir);

  // --- graph stage ---
  Graph g = StageGuard::run("graph", [&] { return graph_from_spec(cfg.graph_spec); });
  const int c = g.vertex_count;
  if (cfg.n <= 10 * c)
    throw InvalidInput("config.n: need n > 10c (c = " + std::to_string(c) + ")");
  if (cfg.q < 1 || cfg.q >= c) throw InvalidInput("config.q: need 1 <= q < c");
  Vector pi = StageGuard::run("stationary",
                              [&] { return stationary_distribution(g, cfg.stationary); });
  ReweightedGraph rg = reweight(g, pi);
  SpectralBasis basis =
      StageGuard::run("spectra", [&] { return spectral_basis(rg, cfg.q); });

  // --- sequence stage ---
  const uint64_t seq_seed = split_seed(cfg.seed, static_cast<uint64_t>(Stage::Sequence));
  TokenSequence seq = StageGuard::run(
      "generate", [&] { return generate_sequence(rg, cfg.n, cfg.epsilon, seq_seed); });

  // --- attention stage: one mixture map per distinct rho ---
  std::vector<const AttentionMap*> maps;
  std::vector<std::unique_ptr<AttentionMap>> owned;
  {
    std::map<std::array<double, 4>, const AttentionMap*> cache;
    for (const auto& layer : cfg.layers) {
      std::array<double, 4> key{layer.rho.a, layer.rho.b, layer.rho.o, layer.rho.t};
      auto it = cache.find(key);
      if (it == cache.end()) {
        owned.push_back(std::make_unique<AttentionMap>(StageGuard::run(
            "attention", [&] { return construct_mixture(seq, g, layer.rho); })));
        it = cache.emplace(key, owned.back().get()).first;
      }
      maps.push_back(it->second);
    }
  }

  // --- forward stage ---
  const uint64_t emb_seed = split_seed(cfg.seed, static_cast<uint64_t>(Stage::Embeddings));
  Matrix embeddings;
  if (cfg.embedding_scheme == "gaussian") {
    embeddings = init_embeddings(c, cfg.dim, EmbeddingScheme::Gaussian, emb_seed);
  } else if (cfg.embedding_scheme == "orthogonal") {
    embeddings = init_embeddings(c, cfg.dim, EmbeddingScheme::Orthogonal, emb_seed);
  } else if (cfg.embedding_scheme.rfind("file:", 0) == 0) {
    embeddings = load_embeddings_csv(cfg.embedding_scheme.substr(5));
    if (embeddings.rows() != c)
      throw InvalidInput("config.embedding: file row count != vocabulary size");
  } else {
    throw InvalidInput("config.embedding.scheme: unknown '" + cfg.embedding_scheme + "'");
  }
  RepresentationTrace trace = StageGuard::run(
      "forward", [&] { return forward(seq, cfg.layers, maps, embeddings); });
  const int L = trace.layer_count;

  std::vector<LatentSnapshot> snaps;
  for (int l = 0; l <= L; ++l) snaps.push_back(snapshot_from_trace(trace, seq, l));

  // --- emits ---
  std::vector<std::string> files;
  auto path_of = [&](const std::string& name) { return (out_dir / name).string(); };
  auto record = [&](const std::string& name) { files.push_back(name); };

  if (wants(cfg, "spectra")) {
    write_spectra_csv(basis, path_of("spectra.csv"));
    record("spectra.csv");
  }
  if (wants(cfg, "trace")) {
    write_trace(trace, path_of("trace.bin"), path_of("trace.json"));
    record("trace.bin");
    record("trace.json");
  }
  if (wants(cfg, "snapshot")) {
    std::vector<std::string> header{"token"};
    for (int jd = 0; jd < cfg.dim; ++jd) header.push_back("dim_" + std::to_string(jd + 1));
    std::vector<std::vector<std::string>> rows;
    const Matrix& z = snaps.back().latents;
    for (int x = 0; x < c; ++x) {
      std::vector<std::string> row{std::to_string(x + 1)};
      for (int jd = 0; jd < cfg.dim; ++jd) row.push_back(format_double(z(jd, x)));
      rows.push_back(std::move(row));
    }
    write_csv(path_of("snapshot.csv"), header, rows);
    record("snapshot.csv");
  }
  if (wants(cfg, "convergence")) {
    GoodnessReport good = goodness(trace.final_v(), snaps.back().latents, seq);
    json jc;
    jc["gamma_hat"] = good.gamma_hat;
    jc["decade_means"] = good.decade_means;
    std::vector<double> ratios;
    for (const auto& snap : snaps) ratios.push_back(subspace_ratio(snap, rg, basis));
    jc["subspace_ratios"] = ratios;
    PcaAlignment align = pca_align(snaps.back(), basis);
    jc["principal_angles_deg"] = align.angles_deg;
    jc["weighted_principal_angles_deg"] = align.weighted_angles_deg;
    std::ofstream out(path_of("convergence.json"));
    out << jc.dump(2) << '\n';
    record("convergence.json");
  }
  if (wants(cfg, "energy")) {
    std::vector<std::vector<std::string>> rows;
    for (int l = 0; l <= L; ++l) {
      EnergyReport er = energy(snaps[l], rg, basis, EnergyMode::Spectral);
      for (int i = 0; i < c; ++i)
        rows.push_back({std::to_string(l), std::to_string(i + 1),
                        format_double(er.normalized_components(i))});
    }
    write_csv(path_of("energy.csv"), {"layer", "component", "normalized_energy"}, rows);
    record("energy.csv");
  }
  if (wants(cfg, "pca")) {
    PcaAlignment align = pca_align(snaps.back(), basis);
    const int m = cfg.q - 1;  // components [2, q]
    std::vector<std::string> pca_header{"token"};
    std::vector<std::string> eig_header{"token"};
    for (int i = 0; i < m; ++i) {
      pca_header.push_back("pc" + std::to_string(i + 1));
      eig_header.push_back("eig" + std::to_string(i + 2));
    }
    std::vector<std::vector<std::string>> rows;
    for (int x = 0; x < c; ++x) {
      std::vector<std::string> row{std::to_string(x + 1)};
      for (int i = 0; i < m; ++i)
        row.push_back(i < align.rank ? format_double(align.scores(x, i)) : "0");
      rows.push_back(std::move(row));
    }
    write_csv(path_of("pca.csv"), pca_header, rows);
    record("pca.csv");
    rows.clear();
    for (int x = 0; x < c; ++x) {
      std::vector<std::string> row{std::to_string(x + 1)};
      for (int i = 0; i < m; ++i) row.push_back(format_double(align.eigen_coords(x, i)));
      rows.push_back(std::move(row));
    }
    write_csv(path_of("eig.csv"), eig_header, rows);
    record("eig.csv");
  }
  if (wants(cfg, "noise")) {
    std::vector<double> curve = noise_robustness_curve(basis, snaps);
    std::vector<std::vector<std::string>> rows;
    for (size_t l = 0; l < curve.size(); ++l)
      rows.push_back({std::to_string(l), format_double(curve[l])});
    write_csv(path_of("alignment.csv"), {"layer", "angle_deg"}, rows);
    record("alignment.csv");
    auto counts = non_neighbor_counts(seq, g, cfg.noise_window);
    write_position_count_csv(counts, cfg.noise_window, path_of("nonneighbor.csv"));
    record("nonneighbor.csv");
  }
  if (wants(cfg, "classify")) {
    write_dump(*maps.front(), seq, path_of("dump.jsonl.gz"));
    record("dump.jsonl.gz");
    AttentionDump dump = read_dump(path_of("dump.jsonl.gz"));
    ClassificationReport report = classify(dump, g);
    emit_report_csv(report, path_of("classify.csv"));
    record("classify.csv");
  }

  // --- manifest ---
  json manifest;
  manifest["artifact_version"] = kArtifactVersion;
  manifest["seed"] = cfg.seed;
  manifest["stage_seeds"] = {{"sequence", seq_seed}, {"embeddings", emb_seed}};
  manifest["graph"] = cfg.graph_spec;
  manifest["n"] = cfg.n;
  manifest["epsilon"] = cfg.epsilon;
  manifest["q"] = cfg.q;
  manifest["layer_count"] = L;
  json file_list = json::array();
  RunResult result;
  std::sort(files.begin(), files.end());
  for (const auto& name : files) {
    const std::string hash = sha256_file_hex(path_of(name));
    file_list.push_back({{"name", name},
                         {"sha256", hash},
                         {"bytes", fs::file_size(path_of(name))}});
    result.file_hashes[name] = hash;
  }
  manifest["files"] = file_list;
  result.manifest_path = path_of("manifest.json");
  std::ofstream out(result.manifest_path);
  out << manifest.dump(2) << '\n';
  return result;
}

}  // namespace dclab
