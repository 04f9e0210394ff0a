#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dclab/experiment.hpp"
#include "dclab/threads.hpp"

namespace py = pybind11;
using namespace dclab;

namespace {

std::vector<std::vector<int32_t>> support_for(const AttentionMap& map) {
  if (map.support().empty())
    throw InvalidInput("attention map carries no declared function");
  return map.support();
}

}  // namespace

PYBIND11_MODULE(dclab, m) {
  m.doc() = "Double-convergence laboratory: graph random walks through "
            "simplified transformer layers, with spectral diagnostics.";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_RuntimeError);

  py::class_<Graph>(m, "Graph")
      .def_readonly("vertex_count", &Graph::vertex_count)
      .def_readonly("adjacency", &Graph::adjacency)
      .def("edges", &Graph::edges)
      .def("is_connected", &Graph::is_connected);

  m.def("grid_graph", &grid_graph, py::arg("rows"), py::arg("cols"));
  m.def("ring_graph", &ring_graph, py::arg("c"));
  m.def("complete_graph", &complete_graph, py::arg("c"));
  m.def("graph_from_file", &graph_from_file, py::arg("path"));
  m.def("graph_from_spec", &graph_from_spec, py::arg("spec"));

  py::enum_<StationaryMode>(m, "StationaryMode")
      .value("walk", StationaryMode::Walk)
      .value("perron", StationaryMode::Perron);
  m.def("stationary_distribution", &stationary_distribution, py::arg("graph"),
        py::arg("mode") = StationaryMode::Walk);

  py::class_<ReweightedGraph>(m, "ReweightedGraph")
      .def_readonly("pi", &ReweightedGraph::pi)
      .def_readonly("weights", &ReweightedGraph::weights)
      .def_readonly("degrees", &ReweightedGraph::degrees)
      .def_readonly("normalized", &ReweightedGraph::normalized);
  m.def("reweight", &reweight, py::arg("graph"), py::arg("pi"));

  py::class_<SpectralBasis>(m, "SpectralBasis")
      .def_readonly("eigenvalues", &SpectralBasis::eigenvalues)
      .def_readonly("eigenvectors", &SpectralBasis::eigenvectors)
      .def_readonly("split", &SpectralBasis::split)
      .def("low_block", &SpectralBasis::low_block)
      .def("high_block", &SpectralBasis::high_block);
  m.def("spectral_basis", &spectral_basis, py::arg("rg"), py::arg("q"));
  m.def("decay_factor", &decay_factor, py::arg("basis"), py::arg("rho_a"),
        py::arg("rho_b"));

  py::class_<TokenSequence>(m, "TokenSequence")
      .def_readonly("vocab_size", &TokenSequence::vocab_size)
      .def_readonly("epsilon", &TokenSequence::epsilon)
      .def_readonly("seed", &TokenSequence::seed)
      .def_readonly("tokens", &TokenSequence::tokens)
      .def_readonly("noise_flags", &TokenSequence::noise_flags)
      .def("length", &TokenSequence::length);
  m.def("generate_sequence", &generate_sequence, py::arg("rg"), py::arg("n"),
        py::arg("epsilon"), py::arg("seed"));
  m.def("save_sequence_json", &save_sequence_json);
  m.def("load_sequence_json", &load_sequence_json);
  m.def("second_half_check", &second_half_check);
  m.def("non_neighbor_counts", &non_neighbor_counts, py::arg("seq"), py::arg("graph"),
        py::arg("window"));

  py::enum_<AttnType>(m, "AttnType")
      .value("A", AttnType::A)
      .value("B", AttnType::B)
      .value("O", AttnType::O)
      .value("T", AttnType::T)
      .value("mixture", AttnType::Mixture)
      .value("custom", AttnType::Custom);

  py::class_<MixtureWeights>(m, "MixtureWeights")
      .def(py::init([](double a, double b, double o, double t) {
             return MixtureWeights{a, b, o, t};
           }),
           py::arg("a"), py::arg("b"), py::arg("o"), py::arg("t"))
      .def_readonly("a", &MixtureWeights::a)
      .def_readonly("b", &MixtureWeights::b)
      .def_readonly("o", &MixtureWeights::o)
      .def_readonly("t", &MixtureWeights::t);

  py::class_<AttentionMap>(m, "AttentionMap")
      .def("size", &AttentionMap::size)
      .def_property_readonly("type", &AttentionMap::type)
      .def("row_sum", &AttentionMap::row_sum)
      .def("entry_count", &AttentionMap::entry_count);
  m.def("construct_typed", &construct_typed, py::arg("seq"), py::arg("graph"),
        py::arg("type"));
  m.def("construct_singleton", &construct_singleton);
  m.def("construct_mixture", &construct_mixture);
  m.def("mix", &mix);
  m.def("verify_attention", [](const AttentionMap& map) {
    auto v = verify_attention(map);
    return py::make_tuple(v.valid, v.worst_row_sum_error);
  });
  m.def("niceness", &niceness);
  m.def("balance_deviation",
        [](const AttentionMap& map, const TokenSequence& seq) {
          return balance_deviation(map, seq, support_for(map));
        });
  m.def("reflected_latent_image", &reflected_latent_image);
  m.def("write_attention_jsonl", &write_attention_jsonl);
  m.def("read_attention_jsonl", &read_attention_jsonl);

  py::class_<Sigma>(m, "Sigma")
      .def_static("identity", &Sigma::identity)
      .def_static("linear", &Sigma::linear)
      .def_static("scaled_tanh", &Sigma::scaled_tanh)
      .def("condition_number", &Sigma::condition_number);

  py::class_<LayerSpec>(m, "LayerSpec")
      .def(py::init([](const MixtureWeights& rho, const Sigma& sigma, bool residual) {
             return LayerSpec{rho, sigma, residual};
           }),
           py::arg("rho"), py::arg("sigma") = Sigma::identity(),
           py::arg("residual") = false);

  py::class_<RepresentationTrace>(m, "RepresentationTrace")
      .def_readonly("layer_count", &RepresentationTrace::layer_count)
      .def_readonly("dim", &RepresentationTrace::dim)
      .def("v", [](const RepresentationTrace& t, int l) { return t.v.at(l); })
      .def("u", [](const RepresentationTrace& t, int l) { return t.u.at(l); });

  py::enum_<EmbeddingScheme>(m, "EmbeddingScheme")
      .value("gaussian", EmbeddingScheme::Gaussian)
      .value("orthogonal", EmbeddingScheme::Orthogonal);
  m.def("init_embeddings", &init_embeddings, py::arg("c"), py::arg("d"),
        py::arg("scheme"), py::arg("seed"));

  m.def(
      "forward",
      [](const TokenSequence& seq, const std::vector<LayerSpec>& layers,
         const std::vector<const AttentionMap*>& maps, const Matrix& embeddings) {
        return forward(seq, layers, maps, embeddings);
      },
      py::arg("seq"), py::arg("layers"), py::arg("maps"), py::arg("embeddings"));
  m.def("apply_attention", &apply_attention);
  m.def("latent_recursion", &latent_recursion, py::arg("latents"), py::arg("rho"),
        py::arg("rg"), py::arg("sigma"), py::arg("v1"), py::arg("residual") = false);

  py::class_<LatentSnapshot>(m, "LatentSnapshot")
      .def_readonly("latents", &LatentSnapshot::latents)
      .def_readonly("layer", &LatentSnapshot::layer)
      .def("max_norm", &LatentSnapshot::max_norm);
  m.def("snapshot_from_trace", &snapshot_from_trace);
  m.def("goodness", [](const Matrix& v, const Matrix& z, const TokenSequence& seq) {
    auto g = goodness(v, z, seq);
    return py::make_tuple(g.gamma_hat, g.decade_means);
  });
  m.def("subspace_ratio", &subspace_ratio);
  m.def("energy", [](const LatentSnapshot& snap, const ReweightedGraph& rg,
                     const SpectralBasis& basis) {
    auto e = energy(snap, rg, basis, EnergyMode::Spectral);
    return py::make_tuple(e.total, e.components, e.normalized_total,
                          e.normalized_components);
  });
  m.def("pca_align", [](const LatentSnapshot& snap, const SpectralBasis& basis) {
    auto a = pca_align(snap, basis);
    return py::make_tuple(a.angles_deg, a.weighted_angles_deg, a.scores, a.aligned);
  });
  m.def("peripheral_compression",
        [](const SpectralBasis& mb, const SpectralBasis& ab, const Graph& g) {
          auto r = peripheral_compression(mb, ab, g);
          return py::make_tuple(r.reweighted_ratio, r.original_ratio);
        });
  m.def("symmetric_eigen_basis", &symmetric_eigen_basis);

  m.def("read_dump", &read_dump);
  m.def("write_dump", &write_dump);
  py::class_<AttentionDump>(m, "AttentionDump")
      .def_readonly("n_layers", &AttentionDump::n_layers)
      .def_readonly("n_heads", &AttentionDump::n_heads)
      .def_readonly("n", &AttentionDump::n)
      .def_readonly("c", &AttentionDump::c)
      .def_readonly("flagged_rows", &AttentionDump::flagged_rows)
      .def("record_count", &AttentionDump::record_count);
  py::class_<ClassificationReport>(m, "ClassificationReport")
      .def_property_readonly("global_fractions",
                             [](const ClassificationReport& r) {
                               return py::make_tuple(r.global.a, r.global.b, r.global.t,
                                                     r.global.other);
                             })
      .def_readonly("policy", &ClassificationReport::policy);
  m.def("classify", &classify);
  m.def("emit_report_csv", &emit_report_csv);

  m.def("run_experiment", [](const std::string& config_path, const std::string& out) {
    ExperimentConfig cfg = load_config(config_path);
    if (!out.empty()) cfg.out_dir = out;
    auto r = run_experiment(cfg);
    return r.file_hashes;
  }, py::arg("config_path"), py::arg("out_dir") = std::string());
  m.def("set_thread_count", &set_thread_count);

  m.attr("__version__") = "0.1.0";
}
