#include <CLI11.hpp>

#include <iostream>

#include <nlohmann/json.hpp>

#include "dclab/experiment.hpp"
#include "dclab/io.hpp"
#include "dclab/threads.hpp"

namespace {

using namespace dclab;

struct CommonFlags {
  std::string graph = "grid:4x4";
  std::string mode = "walk";
  int n = 8192;
  double epsilon = 0.0;
  int layer_count = 8;
  std::vector<double> rho = {0.25, 0.5, 0.2, 0.05};
  std::string sigma = "identity";
  int q = 3;
  uint64_t seed = 0;
  int dim = 64;
  std::string out = ".";
  std::string format = "csv";
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_layers = true) {
  cmd->add_option("--graph", f.graph, "graph spec: grid:RxC | ring:C | complete:C | file:PATH");
  cmd->add_option("--mode", f.mode, "stationary mode: walk | perron");
  cmd->add_option("--n", f.n, "sequence length");
  cmd->add_option("--epsilon", f.epsilon, "uniform-jump noise probability");
  if (with_layers) {
    cmd->add_option("--layers", f.layer_count, "number of layers");
    cmd->add_option("--rho", f.rho, "mixture weights a,b,o,t")->delimiter(',')->expected(4);
    cmd->add_option("--sigma", f.sigma, "neuron-wise map: identity | scaled_tanh:S");
    cmd->add_option("--d", f.dim, "embedding dimension");
  }
  cmd->add_option("--q", f.q, "spectral split index");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--out", f.out, "output file or directory");
  cmd->add_option("--format", f.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--threads", f.threads, "worker threads (default: DCLAB_THREADS or hardware)");
}

ExperimentConfig config_from_flags(const CommonFlags& f,
                                   const std::vector<std::string>& emit) {
  nlohmann::json j;
  j["graph"] = f.graph;
  j["stationary_mode"] = f.mode;
  j["n"] = f.n;
  j["epsilon"] = f.epsilon;
  j["q"] = f.q;
  j["seed"] = f.seed;
  j["embedding"] = {{"scheme", "gaussian"}, {"dim", f.dim}};
  nlohmann::json sigma = "identity";
  if (f.sigma.rfind("scaled_tanh:", 0) == 0)
    sigma = {{"kind", "scaled_tanh"}, {"scale", std::stod(f.sigma.substr(12))}};
  else if (f.sigma != "identity")
    throw InvalidInput("--sigma: unknown '" + f.sigma + "'");
  j["layers"] = {{"count", f.layer_count},
                 {"rho", f.rho},
                 {"sigma", sigma},
                 {"residual", false}};
  j["emit"] = emit;
  ExperimentConfig cfg = config_from_json_text(j.dump());
  cfg.out_dir = f.out;
  return cfg;
}

int apply_threads(int threads) {
  if (threads > 0) set_thread_count(threads);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dclab: double-convergence laboratory for graph random walks "
               "through simplified transformer layers"};
  app.require_subcommand(1);

  CommonFlags spectra_f, generate_f, forward_f, diagnose_f, denoise_f, run_f;
  std::string classify_dump, classify_graph = "grid:4x4", classify_out = "report.csv";
  std::string classify_format = "csv";
  std::string config_path;
  int classify_threads = 0;

  auto* spectra = app.add_subcommand("spectra", "emit eigenvalues/vectors of M as CSV");
  add_common(spectra, spectra_f, false);

  auto* generate = app.add_subcommand("generate", "generate a token sequence (JSON)");
  add_common(generate, generate_f, false);

  auto* fwd = app.add_subcommand("forward", "run the forward process; emit trace + snapshot");
  add_common(fwd, forward_f);

  auto* diagnose = app.add_subcommand(
      "diagnose", "run the pipeline; emit convergence/energy/pca diagnostics");
  add_common(diagnose, diagnose_f);

  denoise_f.epsilon = 0.01;
  auto* denoise = app.add_subcommand(
      "denoise", "noise robustness: alignment curve + non-neighbor counts");
  add_common(denoise, denoise_f);

  auto* classify_cmd = app.add_subcommand("classify", "classify an attention dump");
  classify_cmd->add_option("--dump", classify_dump, "JSONL dump (.gz accepted)")->required();
  classify_cmd->add_option("--graph", classify_graph, "graph spec");
  classify_cmd->add_option("--out", classify_out, "report path");
  classify_cmd->add_option("--format", classify_format, "csv | json")
      ->check(CLI::IsMember({"csv", "json"}));
  classify_cmd->add_option("--threads", classify_threads, "worker threads");

  auto* run = app.add_subcommand("run", "run a full experiment from a config file");
  run->add_option("--config", config_path, "experiment config JSON")->required();
  run->add_option("--out", run_f.out, "output directory override");
  run->add_option("--threads", run_f.threads, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (spectra->parsed()) {
      apply_threads(spectra_f.threads);
      Graph g = graph_from_spec(spectra_f.graph);
      Vector pi = stationary_distribution(g, stationary_mode_from_string(spectra_f.mode));
      SpectralBasis basis = spectral_basis(reweight(g, pi), spectra_f.q);
      std::string out = spectra_f.out == "." ? "spectra.csv" : spectra_f.out;
      write_spectra_csv(basis, out);
      std::cout << "wrote " << out << '\n';
    } else if (generate->parsed()) {
      apply_threads(generate_f.threads);
      Graph g = graph_from_spec(generate_f.graph);
      Vector pi = stationary_distribution(g, stationary_mode_from_string(generate_f.mode));
      TokenSequence seq = generate_sequence(reweight(g, pi), generate_f.n,
                                            generate_f.epsilon, generate_f.seed);
      std::string out = generate_f.out == "." ? "sequence.json" : generate_f.out;
      save_sequence_json(seq, out);
      std::cout << "wrote " << out << '\n';
    } else if (fwd->parsed()) {
      apply_threads(forward_f.threads);
      auto cfg = config_from_flags(forward_f, {"trace", "snapshot"});
      RunResult r = run_experiment(cfg);
      std::cout << "wrote " << r.manifest_path << '\n';
    } else if (diagnose->parsed()) {
      apply_threads(diagnose_f.threads);
      auto cfg = config_from_flags(diagnose_f,
                                   {"spectra", "convergence", "energy", "pca"});
      RunResult r = run_experiment(cfg);
      std::cout << "wrote " << r.manifest_path << '\n';
    } else if (denoise->parsed()) {
      apply_threads(denoise_f.threads);
      auto cfg = config_from_flags(denoise_f, {"noise"});
      RunResult r = run_experiment(cfg);
      std::cout << "wrote " << r.manifest_path << '\n';
    } else if (classify_cmd->parsed()) {
      apply_threads(classify_threads);
      AttentionDump dump = read_dump(classify_dump);
      Graph g = graph_from_spec(classify_graph);
      ClassificationReport report = classify(dump, g);
      if (classify_format == "csv")
        emit_report_csv(report, classify_out);
      else
        emit_report_json(report, classify_out);
      std::cout << "wrote " << classify_out << '\n';
    } else if (run->parsed()) {
      apply_threads(run_f.threads);
      ExperimentConfig cfg = load_config(config_path);
      if (run_f.out != ".") cfg.out_dir = run_f.out;
      RunResult r = run_experiment(cfg);
      std::cout << "wrote " << r.manifest_path << '\n';
    }
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
