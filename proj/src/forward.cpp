#include "dclab/forward.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dclab/rng.hpp"
#include "dclab/threads.hpp"

namespace dclab {

Sigma Sigma::linear(Matrix m) {
  if (m.rows() != m.cols() || m.rows() < 1)
    throw InvalidInput("Sigma::linear: matrix must be square");
  Eigen::JacobiSVD<Matrix> svd(m);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  if (smin <= 0.0 || !std::isfinite(smin))
    throw InvalidInput("Sigma::linear: matrix is singular");
  Sigma s;
  s.kind_ = SigmaKind::Linear;
  s.dim_ = static_cast<int>(m.rows());
  s.condition_ = smax / smin;
  s.matrix_ = std::move(m);
  return s;
}

Sigma Sigma::scaled_tanh(double scale) {
  if (scale <= 0.0) throw InvalidInput("Sigma::scaled_tanh: scale must be > 0");
  Sigma s;
  s.kind_ = SigmaKind::ScaledTanh;
  s.scale_ = scale;
  return s;
}

Sigma Sigma::composed(std::vector<Sigma> parts) {
  Sigma s;
  s.kind_ = SigmaKind::Composed;
  for (const auto& p : parts)
    if (p.dim_ > 0) {
      if (s.dim_ > 0 && s.dim_ != p.dim_)
        throw InvalidInput("Sigma::composed: parts disagree on dimension");
      s.dim_ = p.dim_;
    }
  s.parts_ = std::move(parts);
  return s;
}

bool Sigma::is_identity() const {
  if (kind_ == SigmaKind::Identity) return true;
  if (kind_ == SigmaKind::Composed) {
    for (const auto& p : parts_)
      if (!p.is_identity()) return false;
    return true;
  }
  return false;
}

Vector Sigma::apply(const Vector& v) const {
  switch (kind_) {
    case SigmaKind::Identity: return v;
    case SigmaKind::Linear: return matrix_ * v;
    case SigmaKind::ScaledTanh: return scale_ * (v / scale_).array().tanh();
    case SigmaKind::Composed: {
      Vector out = v;
      for (const auto& p : parts_) out = p.apply(out);
      return out;
    }
  }
  return v;
}

Matrix Sigma::apply_rows(const Matrix& v) const {
  switch (kind_) {
    case SigmaKind::Identity: return v;
    case SigmaKind::Linear: return v * matrix_.transpose();
    case SigmaKind::ScaledTanh: return scale_ * (v / scale_).array().tanh();
    case SigmaKind::Composed: {
      Matrix out = v;
      for (const auto& p : parts_) out = p.apply_rows(out);
      return out;
    }
  }
  return v;
}

Matrix Sigma::apply_cols(const Matrix& z) const {
  switch (kind_) {
    case SigmaKind::Identity: return z;
    case SigmaKind::Linear: return matrix_ * z;
    case SigmaKind::ScaledTanh: return scale_ * (z / scale_).array().tanh();
    case SigmaKind::Composed: {
      Matrix out = z;
      for (const auto& p : parts_) out = p.apply_cols(out);
      return out;
    }
  }
  return z;
}

Matrix init_embeddings(int c, int d, EmbeddingScheme scheme, uint64_t seed) {
  if (d < 2) throw InvalidInput("init_embeddings: need d >= 2");
  Rng rng(seed);
  if (scheme == EmbeddingScheme::Gaussian) {
    Matrix b(c, d);
    const double sd = 1.0 / std::sqrt(static_cast<double>(d));
    for (int i = 0; i < c; ++i)
      for (int j = 0; j < d; ++j) b(i, j) = sd * rng.normal();
    return b;
  }
  if (d < c) throw InvalidInput("init_embeddings: orthogonal scheme needs d >= c");
  Matrix g(d, c);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < c; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, c);
  // fix signs so the factorization is unique given the input
  Matrix r = q.transpose() * g;
  for (int j = 0; j < c; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q.transpose();  // c x d, orthonormal rows
}

Matrix load_embeddings_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("load_embeddings_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw InvalidInput("load_embeddings_csv: ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidInput("load_embeddings_csv: empty file " + path);
  Matrix b(rows.size(), rows.front().size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows.front().size(); ++j) b(i, j) = rows[i][j];
  return b;
}

Matrix apply_attention(const AttentionMap& map, const Matrix& v) {
  const int n = map.size();
  const int d = static_cast<int>(v.cols());
  if (v.rows() != n) throw InvalidInput("apply_attention: size mismatch");

  // prefix sums for the uniform base part, computed once and sequentially
  bool any_base = false;
  for (int k = 0; k < n && !any_base; ++k) any_base = map.row_base(k) != 0.0;
  Matrix prefix;
  if (any_base) {
    prefix.resize(n, d);
    prefix.row(0) = v.row(0);
    for (int k = 1; k < n; ++k) prefix.row(k) = prefix.row(k - 1) + v.row(k);
  }

  Matrix out(n, d);
  parallel_for(0, n, [&](int k) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d);
    const double base = map.row_base(k);
    if (base != 0.0) acc = base * prefix.row(k);
    const int32_t* cols = map.row_cols(k);
    const double* ws = map.row_weights(k);
    const int cnt = map.row_entry_count(k);
    for (int i = 0; i < cnt; ++i) acc += ws[i] * v.row(cols[i]);
    out.row(k) = acc;
  });
  return out;
}

RepresentationTrace forward(const TokenSequence& seq,
                            const std::vector<LayerSpec>& layers,
                            const std::vector<const AttentionMap*>& maps,
                            const Matrix& embeddings,
                            const ForwardOptions& options) {
  const int n = seq.length();
  const int c = seq.vocab_size;
  const int d = static_cast<int>(embeddings.cols());
  const int L = static_cast<int>(layers.size());
  if (static_cast<int>(maps.size()) != L)
    throw InvalidInput("forward: one attention map per layer required");
  if (embeddings.rows() != c) throw InvalidInput("forward: embeddings/vocab mismatch");
  for (const auto& spec : layers) {
    if (std::abs(spec.rho.sum() - 1.0) > 1e-12)
      throw InvalidInput("forward: layer mixture weights must sum to 1");
    if (spec.sigma.dim() > 0 && spec.sigma.dim() != d)
      throw InvalidInput("forward: sigma dimension mismatch");
  }
  for (const auto* m : maps)
    if (m == nullptr || m->size() != n) throw InvalidInput("forward: map size mismatch");

  RepresentationTrace trace;
  trace.layer_count = L;
  trace.dim = d;
  trace.embeddings = embeddings;
  trace.v.resize(L + 1);
  trace.u.resize(L);
  trace.v_kept.assign(L + 1, 0);

  const int stride = options.retain_stride < 1 ? 1 : options.retain_stride;
  auto keep_v = [&](int l) { return l == 0 || l == L || (l % stride) == 0; };

  Matrix v(n, d);
  for (int k = 0; k < n; ++k) v.row(k) = embeddings.row(seq.tokens[k]);

  for (int l = 0; l < L; ++l) {
    if (keep_v(l)) {
      trace.v[l] = v;
      trace.v_kept[l] = 1;
    }
    Matrix u = apply_attention(*maps[l], v);
    if (!u.allFinite())
      throw NumericError("forward: non-finite values after attention at layer " +
                         std::to_string(l + 1));
    Matrix next = layers[l].sigma.apply_rows(u);
    if (layers[l].residual) next += v;
    if (!next.allFinite())
      throw NumericError("forward: non-finite values after sigma at layer " +
                         std::to_string(l + 1));
    if (keep_v(l) || stride == 1) trace.u[l] = std::move(u);
    v = std::move(next);
  }
  trace.v[L] = std::move(v);
  trace.v_kept[L] = 1;
  return trace;
}

Matrix latent_recursion(const Matrix& latents, const MixtureWeights& rho,
                        const ReweightedGraph& rg, const Sigma& sigma,
                        const Vector& v1, bool residual) {
  const int c = rg.vertex_count();
  if (latents.cols() != c) throw InvalidInput("latent_recursion: latents must be d x c");
  if (v1.size() != latents.rows())
    throw InvalidInput("latent_recursion: v1 dimension mismatch");
  // columns: z'_x = rho_a z_x + rho_b (Z W D^{-1})_x + rho_o Z pi + rho_t v1
  Matrix walked = latents * rg.weights * rg.degrees.cwiseInverse().asDiagonal();
  Vector mixed = latents * rg.pi;
  Matrix out = rho.a * latents + rho.b * walked;
  out.colwise() += rho.o * mixed + rho.t * v1;
  if (residual) out += latents;  // Appendix-D form: residual enters before sigma
  return sigma.apply_cols(out);
}

GreatMappingBounds great_mapping_bounds_at(const Sigma& sigma, const ReweightedGraph& rg,
                                           const Matrix& subspace,
                                           const std::vector<Matrix>& latents) {
  GreatMappingBounds b;
  b.low = std::numeric_limits<double>::infinity();
  b.high = 0.0;
  Matrix weighted = rg.sqrt_degrees().asDiagonal() * subspace;  // D^{1/2} U
  for (const Matrix& z : latents) {
    const double denom = (z * weighted).norm();
    if (denom < 1e-12) {
      ++b.skipped;
      continue;
    }
    const double ratio = (sigma.apply_cols(z) * weighted).norm() / denom;
    b.low = std::min(b.low, ratio);
    b.high = std::max(b.high, ratio);
  }
  if (!std::isfinite(b.low)) b.low = 0.0;
  return b;
}

GreatMappingBounds great_mapping_bounds(const Sigma& sigma, const ReweightedGraph& rg,
                                        const Matrix& subspace, int dim, int samples,
                                        uint64_t seed) {
  if (samples < 1) throw InvalidInput("great_mapping_bounds: need samples >= 1");
  const int c = rg.vertex_count();
  Rng rng(seed);
  std::vector<Matrix> zs;
  zs.reserve(samples);
  for (int s = 0; s < samples; ++s) {
    Matrix z(dim, c);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < c; ++j) z(i, j) = rng.normal();
    zs.push_back(std::move(z));
  }
  return great_mapping_bounds_at(sigma, rg, subspace, zs);
}

void write_trace(const RepresentationTrace& trace, const std::string& bin_path,
                 const std::string& sidecar_path) {
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw InvalidInput("write_trace: cannot write " + bin_path);
  nlohmann::json layers = nlohmann::json::array();
  int64_t offset = 0;
  auto dump = [&](const std::string& name, const Matrix& m) {
    if (m.size() == 0) return;
    // row-major doubles
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) {
        double x = m(i, j);
        bin.write(reinterpret_cast<const char*>(&x), sizeof(double));
      }
    layers.push_back({{"name", name},
                      {"offset_bytes", offset},
                      {"rows", m.rows()},
                      {"cols", m.cols()}});
    offset += static_cast<int64_t>(m.size()) * 8;
  };
  for (int l = 0; l <= trace.layer_count; ++l)
    dump("V" + std::to_string(l + 1), trace.v[l]);
  for (int l = 0; l < trace.layer_count; ++l)
    dump("U" + std::to_string(l + 1), trace.u[l]);

  nlohmann::json side;
  side["n"] = trace.v.back().rows();
  side["d"] = trace.dim;
  side["L"] = trace.layer_count;
  side["layers"] = layers;
  std::ofstream meta(sidecar_path);
  if (!meta) throw InvalidInput("write_trace: cannot write " + sidecar_path);
  meta << side.dump(2) << '\n';
}

}  // namespace dclab
