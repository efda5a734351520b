#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "splatba/rng.hpp"

namespace splatba {

enum class ViewRole : std::uint8_t { kContext, kTarget };

/// Tokens of V views concatenated view by view. Each view contributes
/// `tokens_per_view` rows: its camera token first, then its image tokens.
/// Row r lives at values[r * dim, (r + 1) * dim).
struct TokenSet {
  int dim = 0;
  int tokens_per_view = 0;
  std::vector<ViewRole> roles;
  std::vector<double> values;

  TokenSet() = default;
  TokenSet(std::vector<ViewRole> roles, int tokens_per_view, int dim);

  std::size_t view_count() const { return roles.size(); }
  std::size_t token_count() const { return roles.size() * static_cast<std::size_t>(tokens_per_view); }
  double* row(std::size_t r) { return values.data() + r * dim; }
  const double* row(std::size_t r) const { return values.data() + r * dim; }
  ViewRole role_of_token(std::size_t r) const { return roles[r / tokens_per_view]; }
};

/// Square query-by-key matrix; nonzero = attention allowed.
struct AttentionMask {
  std::size_t size = 0;
  std::vector<std::uint8_t> allowed;

  bool at(std::size_t query, std::size_t key) const { return allowed[query * size + key] != 0; }
};

/// Context queries see context keys only; target queries see every key.
/// Throws ArgumentError without a context view or with tokens_per_view < 1.
AttentionMask build_attention_mask(const std::vector<ViewRole>& roles, int tokens_per_view);

/// Fixed projection weights, one set per layer. Matrices are dim x dim,
/// row-major, applied as row-vector times matrix. Heads split the channels.
struct AttentionWeights {
  struct Layer {
    std::vector<double> wq, wk, wv;
  };
  int dim = 0;
  int heads = 1;
  std::vector<Layer> layers;

  /// Entries drawn from N(0, 1 / dim).
  static AttentionWeights random(int dim, int heads, int layers, Rng& rng);
  static AttentionWeights identity(int dim, int layers = 1);
};

/// Scaled dot-product attention whose softmax runs over the allowed keys only;
/// disallowed keys are never read. Throws ArgumentError on a size mismatch or
/// a query without allowed keys.
TokenSet masked_multiview_attention(const TokenSet& tokens, const AttentionMask& mask,
                                    const AttentionWeights& weights);

/// Mask as an 8-bit PGM: white = allowed.
void write_mask_pgm(const std::filesystem::path& path, const AttentionMask& mask);

}  // namespace splatba
