// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Thresholds are pinned here, not calibrated at run time.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "dclab/experiment.hpp"
#include "dclab/io.hpp"
#include "dclab/rng.hpp"
#include "dclab/threads.hpp"

using namespace dclab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Graph random_connected_graph(Rng& rng, int c) {
  Matrix adj = Matrix::Zero(c, c);
  for (int v = 1; v < c; ++v) {
    int u = static_cast<int>(rng.below(static_cast<uint32_t>(v)));
    adj(u, v) = adj(v, u) = 1.0;
  }
  for (int u = 0; u < c; ++u)
    for (int v = u + 1; v < c; ++v)
      if (adj(u, v) == 0.0 && rng.uniform() < 0.3) adj(u, v) = adj(v, u) = 1.0;
  return Graph{c, std::move(adj)};
}

Matrix random_latents(Rng& rng, int d, int c) {
  Matrix z(d, c);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < c; ++j) z(i, j) = rng.normal();
  return z;
}

ReweightedGraph walk_reweighted(const Graph& g) {
  return reweight(g, stationary_distribution(g, StationaryMode::Walk));
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << v;
  return ss.str();
}

// ---------- criterion 1 ----------
Outcome projection_identity() {
  Rng rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int c = 4 + static_cast<int>(rng.below(9));  // 4..12
    Graph g = random_connected_graph(rng, c);
    ReweightedGraph rg = walk_reweighted(g);
    SpectralBasis basis = spectral_basis(rg, std::max(1, c / 3));
    Matrix u = basis.eigenvectors.rightCols(c - 1);
    Vector z(c);
    for (int i = 0; i < c; ++i) z(i) = rng.normal();
    double a = rng.uniform(), b = rng.uniform(), o = rng.uniform(), t = rng.uniform();
    const double s = a + b + o + t;
    MixtureWeights rho{a / s, b / s, o / s, t / s};
    double dev = projection_evolution_check(z, rho, rg, u, rng.normal());
    worst = std::max(worst, dev / std::max(1.0, z.norm()));
  }
  return {worst <= 1e-10, "max scaled deviation " + fmt(worst) + " (1000 trials)"};
}

// ---------- criterion 2 ----------
Outcome energy_identity() {
  Rng rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int c = 4 + static_cast<int>(rng.below(9));
    Graph g = random_connected_graph(rng, c);
    ReweightedGraph rg = walk_reweighted(g);
    SpectralBasis basis = spectral_basis(rg, 1);
    LatentSnapshot snap{random_latents(rng, 6, c), 0, "synthetic"};
    EnergyReport brute = energy(snap, rg, basis, EnergyMode::Brute);
    EnergyReport spectral = energy(snap, rg, basis, EnergyMode::Spectral);
    worst = std::max(worst, std::abs(brute.total - spectral.total) / brute.total);
  }
  return {worst <= 1e-8, "max relative gap " + fmt(worst) + " (200 pairs)"};
}

// ---------- criterion 3 ----------
Outcome context_wise_convergence() {
  Graph g = grid_graph(4, 4);
  ReweightedGraph rg = walk_reweighted(g);
  const int n = 8192;
  int ok = 0;
  std::vector<double> ratios;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    TokenSequence seq = generate_sequence(rg, n, 0.0, seed);
    Rng zr(5000 + seed);
    Matrix z = random_latents(zr, 16, 16);
    Matrix v(n, 16);
    for (int k = 0; k < n; ++k) v.row(k) = z.col(seq.tokens[k]).transpose();
    AttentionMap b = construct_typed(seq, g, AttnType::B);
    Matrix u = apply_attention(b, v);
    Matrix target = reflected_latent_image(b.support(), z, rg.pi);
    GoodnessReport report = goodness(u, target, seq);
    const double ratio = report.decade_means[0] / report.decade_means[2];
    ratios.push_back(ratio);
    if (ratio <= 0.7) ++ok;
  }
  double worst = *std::max_element(ratios.begin(), ratios.end());
  return {ok >= 19, std::to_string(ok) + "/20 seeds with ratio <= 0.7 (worst " +
                        fmt(worst) + ")"};
}

// ---------- criterion 4 ----------
Outcome singleton_bound() {
  Graph g = grid_graph(4, 4);
  ReweightedGraph rg = walk_reweighted(g);
  const int n = 8192, c = 16, d = 16;
  TokenSequence seq = generate_sequence(rg, n, 0.0, 404);
  std::vector<int32_t> f(c);
  for (int x = 0; x < c; ++x) f[x] = (x + 1) % c;  // shift map
  AttentionMap map = construct_singleton(seq, g, f);
  const double psi = niceness(map);

  Rng rng(405);
  Matrix z = random_latents(rng, d, c);
  const double gamma = 0.5;
  Matrix v(n, d);
  for (int k = 0; k < n; ++k) {
    Vector dir(d);
    for (int i = 0; i < d; ++i) dir(i) = rng.normal();
    dir.normalize();
    v.row(k) = (z.col(seq.tokens[k]) + gamma / std::sqrt(k + 1.0) * dir).transpose();
  }
  double measured_gamma = 0.0, bigN = 0.0;
  for (int k = 0; k < n; ++k)
    measured_gamma = std::max(measured_gamma,
                              std::sqrt(k + 1.0) *
                                  (v.row(k).transpose() - z.col(seq.tokens[k])).norm());
  for (int x = 0; x < c; ++x) bigN = std::max(bigN, z.col(x).norm());

  Matrix u = apply_attention(map, v);
  const double bound = 2.0 * measured_gamma * psi + c * (measured_gamma + 2.0 * bigN);
  int violations = 0;
  double worst = 0.0;
  for (int k = c; k < n; ++k) {
    double err = std::sqrt(k + 1.0) * (u.row(k).transpose() - z.col(f[seq.tokens[k]])).norm();
    worst = std::max(worst, err);
    if (err > bound) ++violations;
  }
  return {violations == 0, "0 required violations, got " + std::to_string(violations) +
                               "; worst sqrt(k)-error " + fmt(worst) + " vs bound " +
                               fmt(bound) + " (psi-hat " + fmt(psi) + ")"};
}

// ---------- criterion 5 ----------
Outcome layer_contraction() {
  Graph g = grid_graph(4, 4);
  ReweightedGraph rg = walk_reweighted(g);
  SpectralBasis basis = spectral_basis(rg, 3);
  const double df = decay_factor(basis, 0.25, 0.5);
  // |mu| sorted for the Cor-B.4 delta
  std::vector<double> mu;
  for (int i = 0; i < 16; ++i) mu.push_back(std::abs(0.25 + 0.5 * basis.eigenvalues(i)));
  std::sort(mu.begin(), mu.end(), std::greater<>());
  const double delta = mu[2] / mu[3];

  Rng rng(505);
  Matrix z = random_latents(rng, 8, 16);
  Vector v1 = random_latents(rng, 8, 1).col(0);
  MixtureWeights rho{0.25, 0.5, 0.25, 0.0};
  Vector sd = rg.sqrt_degrees();
  auto part = [&](const Matrix& zz, const Matrix& block) {
    return (zz * sd.asDiagonal() * block).norm();
  };
  bool ok = true;
  std::string why;
  double prev_ratio = part(z, basis.high_block()) / part(z, basis.low_block());
  for (int step = 1; step <= 12; ++step) {
    Matrix znext = latent_recursion(z, rho, rg, Sigma::identity(), v1);
    const double ratio =
        part(znext, basis.high_block()) / part(znext, basis.low_block());
    if (ratio / prev_ratio > df + 0.02) {
      ok = false;
      why = "step " + std::to_string(step) + " ratio " + fmt(ratio / prev_ratio);
    }
    const double growth_x = part(znext, basis.low_block()) / part(z, basis.low_block());
    const double growth_y = part(znext, basis.high_block()) / part(z, basis.high_block());
    if (growth_x < delta * growth_y - 1e-9) {
      ok = false;
      why = "Cor B.4 violated at step " + std::to_string(step);
    }
    z = std::move(znext);
    prev_ratio = ratio;
  }
  if (why.empty())
    why = "12 steps, per-step ratio <= decay_factor " + fmt(df) + " + 0.02";
  return {ok, why};
}

// shared run for criteria 6, 8 and 12
struct Criterion6Run {
  RunResult first, second;
  std::vector<double> plain_angles, weighted_angles;
  std::vector<double> normalized_totals, low_pairs;
};

Criterion6Run run_criterion6(const std::string& config_path) {
  Criterion6Run out;
  const int saved_threads = thread_count();
  ExperimentConfig cfg = load_config(config_path);
  cfg.out_dir = "acceptance_run1";
  set_thread_count(1);
  out.first = run_experiment(cfg);

  // recompute the diagnostics in-process for criteria 6 and 8
  Graph g = graph_from_spec(cfg.graph_spec);
  ReweightedGraph rg = walk_reweighted(g);
  SpectralBasis basis = spectral_basis(rg, cfg.q);
  TokenSequence seq = generate_sequence(
      rg, cfg.n, cfg.epsilon, split_seed(cfg.seed, static_cast<uint64_t>(Stage::Sequence)));
  Matrix emb = init_embeddings(g.vertex_count, cfg.dim, EmbeddingScheme::Gaussian,
                               split_seed(cfg.seed, static_cast<uint64_t>(Stage::Embeddings)));
  AttentionMap m = construct_mixture(seq, g, cfg.layers.front().rho);
  std::vector<const AttentionMap*> maps(cfg.layers.size(), &m);
  RepresentationTrace trace = forward(seq, cfg.layers, maps, emb);
  for (int l = 0; l <= trace.layer_count; ++l) {
    LatentSnapshot snap = snapshot_from_trace(trace, seq, l);
    EnergyReport er = energy(snap, rg, basis, EnergyMode::Spectral);
    out.normalized_totals.push_back(er.normalized_total);
    out.low_pairs.push_back(er.normalized_components(1) + er.normalized_components(2));
  }
  PcaAlignment align =
      pca_align(snapshot_from_trace(trace, seq, trace.layer_count), basis);
  out.plain_angles = align.angles_deg;
  out.weighted_angles = align.weighted_angles_deg;

  cfg.out_dir = "acceptance_run2";
  set_thread_count(3);
  out.second = run_experiment(cfg);
  set_thread_count(saved_threads);
  return out;
}

Outcome eigenvector_alignment(const Criterion6Run& run) {
  const double a1 = run.plain_angles.at(0);
  const double a2 = run.plain_angles.at(1);
  const bool pass = a1 < 5.0 && a2 < 5.0;
  std::string detail = "PCA vs span{u2,u3} angles " + fmt(a1) + ", " + fmt(a2) +
                       " deg (threshold 5)";
  if (!pass)
    detail += "; structural floor of the unweighted comparison is 13.89 deg "
              "(degree-weighted PCA measures " +
              fmt(run.weighted_angles.at(0)) + ", " + fmt(run.weighted_angles.at(1)) +
              " deg)";
  return {pass, detail};
}

Outcome energy_evolution(const Criterion6Run& run) {
  bool ok = true;
  std::string why;
  for (size_t l = 0; l + 1 < run.normalized_totals.size(); ++l) {
    if (run.normalized_totals[l + 1] > run.normalized_totals[l] + 1e-3) {
      ok = false;
      why = "total energy rose at layer " + std::to_string(l + 1);
    }
    if (run.low_pairs[l + 1] < run.low_pairs[l] - 1e-3) {
      ok = false;
      why = "e2+e3 dropped at layer " + std::to_string(l + 1);
    }
  }
  if (why.empty())
    why = "normalized total " + fmt(run.normalized_totals.front()) + " -> " +
          fmt(run.normalized_totals.back()) + ", e2+e3 " + fmt(run.low_pairs.front()) +
          " -> " + fmt(run.low_pairs.back());
  return {ok, why};
}

Outcome determinism(const Criterion6Run& run) {
  const bool pass = run.first.file_hashes == run.second.file_hashes &&
                    !run.first.file_hashes.empty();
  return {pass, "1-thread vs 3-thread manifests " +
                    std::string(pass ? "identical" : "DIFFER") + " (" +
                    std::to_string(run.first.file_hashes.size()) + " artifacts)"};
}

// ---------- criterion 7 ----------
Outcome peripheral() {
  // original-graph reference: unweighted normalized adjacency (the raw
  // adjacency pair degenerates at 4x4; see the decisions log)
  Graph g = grid_graph(4, 4);
  ReweightedGraph rg = walk_reweighted(g);
  CompressionResult grid = peripheral_compression(
      spectral_basis(rg, 3), unweighted_normalized_basis(g, 3), g);
  if (!(grid.reweighted_ratio < grid.original_ratio))
    return {false, "grid ratios not ordered: " + fmt(grid.reweighted_ratio) + " vs " +
                       fmt(grid.original_ratio)};
  for (const Graph& control : {ring_graph(8), grid_graph(2, 2)}) {
    ReweightedGraph rc = walk_reweighted(control);
    CompressionResult r = peripheral_compression(
        spectral_basis(rc, 2), unweighted_normalized_basis(control, 2), control);
    if (std::abs(r.reweighted_ratio - 1.0) > 1e-9 ||
        std::abs(r.original_ratio - 1.0) > 1e-9)
      return {false, "vertex-transitive control not at unit ratio"};
  }
  return {true, "grid " + fmt(grid.reweighted_ratio) + " < " + fmt(grid.original_ratio) +
                    "; controls at 1 within 1e-9"};
}

// ---------- criterion 9 ----------
Outcome concentration_events() {
  Graph g = grid_graph(4, 4);
  ReweightedGraph rg = walk_reweighted(g);
  const double calibrated = 0.25;  // pinned from the reference ensemble
  int stat_ok = 0, half_ok = 0;
  double worst = 0.0;
  for (uint64_t seed = 1; seed <= 100; ++seed) {
    TokenSequence seq = generate_sequence(rg, 8192, 0.0, seed);
    ConcentrationReport report = concentration_report(seq, rg.pi, 64, 9);
    worst = std::max(worst, report.max_scaled_deviation);
    if (report.max_scaled_deviation <= calibrated) ++stat_ok;
    auto half = second_half_check(seq);
    if (std::all_of(half.begin(), half.end(), [](bool b) { return b; })) ++half_ok;
  }
  const bool pass = stat_ok >= 99 && half_ok >= 99;
  return {pass, "statistic <= 0.25 in " + std::to_string(stat_ok) +
                    "/100 (max " + fmt(worst) + "), second-half in " +
                    std::to_string(half_ok) + "/100"};
}

// ---------- criterion 10 ----------
Outcome noise_robustness() {
  Graph g = grid_graph(4, 4);
  ReweightedGraph rg = walk_reweighted(g);
  SpectralBasis basis = spectral_basis(rg, 3);
  const int n = 16384, L = 8;
  MixtureWeights rho{0.25, 0.5, 0.2, 0.05};

  auto run = [&](double epsilon, uint64_t seed) {
    TokenSequence seq = generate_sequence(rg, n, epsilon, seed);
    Matrix emb = init_embeddings(16, 64, EmbeddingScheme::Gaussian, seed + 7);
    AttentionMap m = construct_mixture(seq, g, rho);
    std::vector<LayerSpec> layers(L, {rho, Sigma::identity(), false});
    std::vector<const AttentionMap*> maps(L, &m);
    RepresentationTrace trace = forward(seq, layers, maps, emb);
    LatentSnapshot snap = snapshot_from_trace(trace, seq, L);
    double angle = pca_align(snap, basis).angles_deg.at(0);
    return std::make_pair(std::move(seq), angle);
  };

  auto [noisy_seq, noisy_angle] = run(0.01, 1000);
  auto [clean_seq, clean_angle] = run(0.0, 1000);

  // exact binomial band around the measured per-transition non-edge rate
  auto counts = non_neighbor_counts(noisy_seq, g, 500);
  int total = 0;
  for (int j = 16; j + 1 < n; ++j)
    if (g.adjacency(noisy_seq.tokens[j], noisy_seq.tokens[j + 1]) == 0.0) ++total;
  const double p = static_cast<double>(total) / (n - 17);
  const double mean = 499.0 * p;
  const double sigma = std::sqrt(499.0 * p * (1.0 - p));
  int outside = 0;
  for (int count : counts)
    if (count < mean - 4 * sigma || count > mean + 4 * sigma) ++outside;

  const double gap = std::abs(noisy_angle - clean_angle);
  const bool pass = outside == 0 && gap <= 10.0;
  return {pass, "windows outside 4-sigma band: " + std::to_string(outside) +
                    "; final-layer angle gap " + fmt(gap) + " deg (noisy " +
                    fmt(noisy_angle) + ", clean " + fmt(clean_angle) + ")"};
}

// ---------- criterion 11 ----------
Outcome classifier_recovery(const std::string& golden_path) {
  Graph g = grid_graph(4, 4);
  ReweightedGraph rg = walk_reweighted(g);
  TokenSequence seq = generate_sequence(rg, 4096, 0.0, 1111);
  MixtureWeights rho{0.3, 0.4, 0.2, 0.1};
  AttentionMap m = construct_mixture(seq, g, rho);
  write_dump(m, seq, "acceptance_dump.jsonl.gz");
  AttentionDump dump = read_dump("acceptance_dump.jsonl.gz");
  ClassificationReport report = classify(dump, g);

  // exact labeling oracle straight off the map
  double oa = 0, ob = 0, ot = 0, oo = 0, mass = 0;
  for (int k = 0; k < m.size(); ++k) {
    auto add = [&](int col, double w) {
      mass += w;
      int xq = seq.tokens[k], xk = seq.tokens[col];
      if (col == 0) ot += w;
      else if (xk == xq) oa += w;
      else if (g.adjacency(xq, xk) != 0.0) ob += w;
      else oo += w;
    };
    if (m.row_base(k) != 0.0)
      for (int j = 0; j <= k; ++j) add(j, m.row_base(k));
    for (int i = 0; i < m.row_entry_count(k); ++i)
      add(m.row_cols(k)[i], m.row_weights(k)[i]);
  }
  oa /= mass;
  ob /= mass;
  ot /= mass;

  const double da = std::abs(report.global.a - oa);
  const double db = std::abs(report.global.b - ob);
  const double dt = std::abs(report.global.t - ot);
  bool pass = da <= 0.02 && db <= 0.02 && dt <= 0.02;

  emit_report_csv(report, "acceptance_classify.csv");
  std::string golden_note;
  std::ifstream golden(golden_path);
  if (golden) {
    std::ifstream got("acceptance_classify.csv");
    std::string sg((std::istreambuf_iterator<char>(golden)),
                   std::istreambuf_iterator<char>());
    std::string so((std::istreambuf_iterator<char>(got)),
                   std::istreambuf_iterator<char>());
    if (sg != so) {
      pass = false;
      golden_note = "; golden-file MISMATCH";
    } else {
      golden_note = "; golden file matches";
    }
  } else {
    pass = false;
    golden_note = "; golden file missing at " + golden_path;
  }
  fs::remove("acceptance_dump.jsonl.gz");
  fs::remove("acceptance_classify.csv");
  return {pass, "A/B/T vs oracle gaps " + fmt(da) + "/" + fmt(db) + "/" + fmt(dt) +
                    " (recovered " + fmt(report.global.a) + "/" + fmt(report.global.b) +
                    "/" + fmt(report.global.t) + ")" + golden_note};
}

}  // namespace

int main(int argc, char** argv) {
  std::string source_dir = ".";
  if (argc > 1) source_dir = argv[1];
  const std::string config_path = source_dir + "/configs/grid16.json";
  const std::string golden_path = source_dir + "/tests/data/golden_classify.csv";

  int failures = 0;
  auto report = [&](int index, const std::string& name, const Outcome& outcome,
                    double seconds) {
    if (!outcome.pass) ++failures;
    std::printf("%s criterion %2d: %-28s %s [%.1fs]\n",
                outcome.pass ? "PASS" : "FAIL", index, name.c_str(),
                outcome.detail.c_str(), seconds);
    std::fflush(stdout);
  };
  auto timed = [&](int index, const std::string& name,
                   const std::function<Outcome()>& fn) {
    auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = fn();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report(index, name, outcome, seconds);
  };

  timed(1, "projection identity", projection_identity);
  timed(2, "energy identity", energy_identity);
  timed(3, "context-wise convergence", context_wise_convergence);
  timed(4, "singleton reflecting bound", singleton_bound);
  timed(5, "layer-wise contraction", layer_contraction);

  Criterion6Run shared;
  bool shared_ok = true;
  {
    auto start = std::chrono::steady_clock::now();
    try {
      shared = run_criterion6(config_path);
    } catch (const std::exception& e) {
      shared_ok = false;
      double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                     start).count();
      Outcome bad{false, std::string("exception: ") + e.what()};
      report(6, "eigenvector alignment", bad, seconds);
      report(8, "energy evolution", bad, 0.0);
      report(12, "thread determinism", bad, 0.0);
    }
    if (shared_ok) {
      double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                     start).count();
      report(6, "eigenvector alignment", eigenvector_alignment(shared), seconds);
      report(8, "energy evolution", energy_evolution(shared), 0.0);
      report(12, "thread determinism", determinism(shared), 0.0);
    }
    fs::remove_all("acceptance_run1");
    fs::remove_all("acceptance_run2");
  }

  timed(7, "peripheral compression", peripheral);
  timed(9, "concentration events", concentration_events);
  timed(10, "noise robustness", noise_robustness);
  timed(11, "classifier recovery",
        [&] { return classifier_recovery(golden_path); });

  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
