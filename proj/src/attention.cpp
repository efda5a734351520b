#include "splatba/attention.hpp"

#include <algorithm>
#include <cmath>

#include "splatba/errors.hpp"
#include "splatba/io.hpp"
#include "splatba/kernels.hpp"

namespace splatba {

namespace {

// rows x dim times dim x dim, each output entry a sequential dot product so a
// row's result depends on nothing but that row.
std::vector<double> project_rows(const std::vector<double>& x, std::size_t rows, int dim,
                                 const std::vector<double>& w) {
  std::vector<double> wt(w.size());
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) wt[static_cast<std::size_t>(j) * dim + i] = w[static_cast<std::size_t>(i) * dim + j];
  const auto& k = kernels::active();
  std::vector<double> out(rows * dim);
  for (std::size_t r = 0; r < rows; ++r)
    for (int j = 0; j < dim; ++j)
      out[r * dim + j] = k.dot(x.data() + r * dim, wt.data() + static_cast<std::size_t>(j) * dim, dim);
  return out;
}

}  // namespace

TokenSet::TokenSet(std::vector<ViewRole> r, int tpv, int d)
    : dim(d), tokens_per_view(tpv), roles(std::move(r)) {
  values.assign(token_count() * static_cast<std::size_t>(dim), 0.0);
}

AttentionMask build_attention_mask(const std::vector<ViewRole>& roles, int tokens_per_view) {
  if (tokens_per_view < 1) throw ArgumentError("attention mask: tokens_per_view must be >= 1");
  if (std::none_of(roles.begin(), roles.end(), [](ViewRole r) { return r == ViewRole::kContext; })) {
    throw ArgumentError("attention mask: at least one context view is required");
  }
  AttentionMask m;
  m.size = roles.size() * static_cast<std::size_t>(tokens_per_view);
  m.allowed.assign(m.size * m.size, 0);
  for (std::size_t q = 0; q < m.size; ++q) {
    const bool q_target = roles[q / tokens_per_view] == ViewRole::kTarget;
    for (std::size_t k = 0; k < m.size; ++k) {
      const bool k_context = roles[k / tokens_per_view] == ViewRole::kContext;
      m.allowed[q * m.size + k] = (q_target || k_context) ? 1 : 0;
    }
  }
  return m;
}

AttentionWeights AttentionWeights::random(int dim, int heads, int layers, Rng& rng) {
  if (dim < 1 || heads < 1 || dim % heads != 0) throw ArgumentError("attention: heads must divide dim");
  AttentionWeights w;
  w.dim = dim;
  w.heads = heads;
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
  const std::size_t n = static_cast<std::size_t>(dim) * dim;
  for (int l = 0; l < layers; ++l) {
    Layer layer;
    for (auto* m : {&layer.wq, &layer.wk, &layer.wv}) {
      m->resize(n);
      for (double& x : *m) x = rng.normal(0.0, sd);
    }
    w.layers.push_back(std::move(layer));
  }
  return w;
}

AttentionWeights AttentionWeights::identity(int dim, int layers) {
  AttentionWeights w;
  w.dim = dim;
  std::vector<double> eye(static_cast<std::size_t>(dim) * dim, 0.0);
  for (int i = 0; i < dim; ++i) eye[static_cast<std::size_t>(i) * dim + i] = 1.0;
  for (int l = 0; l < layers; ++l) w.layers.push_back({eye, eye, eye});
  return w;
}

TokenSet masked_multiview_attention(const TokenSet& tokens, const AttentionMask& mask,
                                    const AttentionWeights& weights) {
  const std::size_t n = tokens.token_count();
  const int dim = tokens.dim;
  if (mask.size != n || mask.allowed.size() != n * n) throw ArgumentError("attention: mask size mismatch");
  if (weights.dim != dim || weights.heads < 1 || dim % weights.heads != 0) {
    throw ArgumentError("attention: weights do not match the token dimension");
  }
  std::vector<std::vector<std::size_t>> keys(n);
  for (std::size_t q = 0; q < n; ++q) {
    for (std::size_t k = 0; k < n; ++k)
      if (mask.at(q, k)) keys[q].push_back(k);
    if (keys[q].empty()) throw ArgumentError("attention: query row " + std::to_string(q) + " has no allowed key");
  }
  for (double x : tokens.values)
    if (!std::isfinite(x)) throw ArgumentError("attention: non-finite token");

  const int hd = dim / weights.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const auto& kern = kernels::active();
  TokenSet out = tokens;
  std::vector<double> logits;
  for (const auto& layer : weights.layers) {
    const std::vector<double> Q = project_rows(out.values, n, dim, layer.wq);
    const std::vector<double> K = project_rows(out.values, n, dim, layer.wk);
    const std::vector<double> V = project_rows(out.values, n, dim, layer.wv);
    std::vector<double> next(n * dim, 0.0);
    for (std::size_t q = 0; q < n; ++q) {
      const auto& allowed = keys[q];
      for (int h = 0; h < weights.heads; ++h) {
        const std::size_t off = static_cast<std::size_t>(h) * hd;
        logits.resize(allowed.size());
        double peak = -INFINITY;
        for (std::size_t i = 0; i < allowed.size(); ++i) {
          logits[i] = scale * kern.dot(Q.data() + q * dim + off, K.data() + allowed[i] * dim + off, hd);
          peak = std::max(peak, logits[i]);
        }
        double total = 0.0;
        for (double& l : logits) {
          l = std::exp(l - peak);
          total += l;
        }
        double* dst = next.data() + q * dim + off;
        for (std::size_t i = 0; i < allowed.size(); ++i) {
          kern.axpy(logits[i] / total, V.data() + allowed[i] * dim + off, dst, hd);
        }
      }
    }
    out.values = std::move(next);
  }
  return out;
}

void write_mask_pgm(const std::filesystem::path& path, const AttentionMask& mask) {
  Image img(static_cast<int>(mask.size), static_cast<int>(mask.size), 1);
  for (std::size_t i = 0; i < mask.allowed.size(); ++i) img.data[i] = mask.allowed[i] ? 1.0 : 0.0;
  io::write_pgm(path, img);
}

}  // namespace splatba
