#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace refine::attn {

// 336 px image, 14 px patches -> 24 x 24 = 576 image features.
inline constexpr std::uint32_t kImagePx = 336;
inline constexpr std::uint32_t kPatchPx = 14;
inline constexpr std::uint32_t kGridSide = kImagePx / kPatchPx;
inline constexpr std::uint32_t kImageFeatures = kGridSide * kGridSide;

class AttentionError : public std::runtime_error {
 public:
  enum class Kind { dimension, non_finite, shape_mismatch, geometry, format, io };

  AttentionError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

enum class DumpLabel { initial, feedback };

struct Dims {
  std::uint32_t layers = 0;
  std::uint32_t heads = 0;
  std::uint32_t tokens = 0;
  std::uint32_t features = 0;

  std::size_t count() const noexcept {
    return std::size_t{layers} * heads * tokens * features;
  }
  bool operator==(const Dims&) const = default;
};

// Attention from generated tokens to image features, laid out
// [layer][head][token][feature].
struct AttentionDump {
  Dims dims;
  std::vector<float> weights;
  std::vector<std::string> tokens;
  DumpLabel label = DumpLabel::initial;

  std::size_t index(std::uint32_t l, std::uint32_t h, std::uint32_t t, std::uint32_t f) const noexcept {
    return ((std::size_t{l} * dims.heads + h) * dims.tokens + t) * dims.features + f;
  }
  float at(std::uint32_t l, std::uint32_t h, std::uint32_t t, std::uint32_t f) const noexcept {
    return weights[index(l, h, t, f)];
  }

  // Size consistency, finite non-negative weights, tokens.size() == T.
  void validate() const;
};

inline std::uint32_t feature_index(std::uint32_t row, std::uint32_t col) noexcept { return kGridSide * row + col; }
inline std::pair<std::uint32_t, std::uint32_t> grid_position(std::uint32_t feature) noexcept {
  return {feature / kGridSide, feature % kGridSide};
}

enum class ReductionOrder {
  layers_then_heads,  // top-k over layers per (head, token, feature), then heads
  heads_then_layers,  // top-k over heads per (layer, token, feature), then layers
};

struct PoolOptions {
  std::uint32_t k_layers = 3;
  std::uint32_t k_heads = 3;
  ReductionOrder order = ReductionOrder::layers_then_heads;
};

struct PooledMap {
  std::vector<double> grid;  // 576 values, row-major: grid[24 * r + c]
  std::uint32_t k_layers = 0;
  std::uint32_t k_heads = 0;
  std::uint32_t l_tokens = 0;

  double at(std::uint32_t row, std::uint32_t col) const { return grid[feature_index(row, col)]; }
  double max() const;
  void validate() const;
};

// Mean of the k largest values (k <= values.size()).
double top_k_mean(std::span<const double> values, std::size_t k);

// Layers and heads reduced; result is [token][feature].
std::vector<double> reduce_layers_heads(const AttentionDump& dump, const PoolOptions& opts);

// Full reduction for any feature count; returns one value per feature.
std::vector<double> pool_features(const AttentionDump& dump, const PoolOptions& opts, std::uint32_t l);

// Top-k mean over layers, then heads, then top-l mean over tokens, onto
// the 24 x 24 grid. Requires F == 576.
PooledMap pool(const AttentionDump& dump, std::uint32_t k, std::uint32_t l);
PooledMap pool(const AttentionDump& dump, const PoolOptions& opts, std::uint32_t l);

// Shorter of the two outputs.
std::uint32_t choose_l(const AttentionDump& initial, const AttentionDump& feedback);

// Nearest-rank quantile: the value at 1-based position ceil(q * N) of the
// ascending sort.
double nearest_rank_quantile(std::span<const double> values, double q);

// Every value at or above the q-quantile is raised to the grid maximum.
PooledMap quantile_clamp(const PooledMap& map, double q = 0.995);

struct GridCell {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  double value = 0.0;
};

struct CoverageStats {
  double mean_attention = 0.0;
  double coverage_at_tau = 0.0;  // fraction of cells >= tau
  std::vector<GridCell> top_cells;
};

CoverageStats coverage_stats(const PooledMap& map, double tau, std::size_t top_n = 5);

std::pair<CoverageStats, CoverageStats> compare_maps(const PooledMap& initial_map, const PooledMap& feedback_map,
                                                     double tau, std::size_t top_n = 5);

struct TokenSaliency {
  std::uint32_t token_index = 0;
  double saliency = 0.0;
};

// Per-token mean over features of the layer/head-reduced attention, sorted
// descending with ties broken by lower token index.
std::vector<TokenSaliency> token_saliency(const AttentionDump& dump, std::uint32_t k);
std::vector<TokenSaliency> token_saliency(const AttentionDump& dump, const PoolOptions& opts);

// Element-wise mean of several maps (pooling parameters of the first map
// are kept).
PooledMap average_maps(std::span<const PooledMap> maps);

}  // namespace refine::attn
