#include "refine/attention.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace refine::attn {

namespace {

void require(bool ok, AttentionError::Kind kind, const std::string& what) {
  if (!ok) throw AttentionError(kind, what);
}

void check_k(const AttentionDump& dump, const PoolOptions& opts) {
  require(opts.k_layers >= 1 && opts.k_layers <= dump.dims.layers, AttentionError::Kind::dimension,
          "k_layers=" + std::to_string(opts.k_layers) + " must be in [1, " + std::to_string(dump.dims.layers) + "]");
  require(opts.k_heads >= 1 && opts.k_heads <= dump.dims.heads, AttentionError::Kind::dimension,
          "k_heads=" + std::to_string(opts.k_heads) + " must be in [1, " + std::to_string(dump.dims.heads) + "]");
}

// Sum of the k largest entries of buf (buf is reordered).
double top_k_mean_inplace(std::vector<double>& buf, std::size_t k) {
  std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(k - 1), buf.end(), std::greater<>());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += buf[i];
  return sum / static_cast<double>(k);
}

}  // namespace

void AttentionDump::validate() const {
  require(dims.layers > 0 && dims.heads > 0 && dims.tokens > 0 && dims.features > 0, AttentionError::Kind::dimension,
          "all dump dimensions must be positive");
  require(weights.size() == dims.count(), AttentionError::Kind::dimension,
          "weight count " + std::to_string(weights.size()) + " != L*H*T*F = " + std::to_string(dims.count()));
  require(tokens.empty() || tokens.size() == dims.tokens, AttentionError::Kind::dimension,
          "token list length " + std::to_string(tokens.size()) + " != T = " + std::to_string(dims.tokens));
  for (float w : weights) {
    require(std::isfinite(w) && w >= 0.0f, AttentionError::Kind::non_finite,
            "attention weights must be finite and non-negative");
  }
}

double PooledMap::max() const { return grid.empty() ? 0.0 : *std::max_element(grid.begin(), grid.end()); }

void PooledMap::validate() const {
  require(grid.size() == kImageFeatures, AttentionError::Kind::geometry,
          "pooled map must have " + std::to_string(kImageFeatures) + " cells");
  for (double v : grid) {
    require(std::isfinite(v) && v >= 0.0, AttentionError::Kind::non_finite, "pooled values must be finite and >= 0");
  }
}

double top_k_mean(std::span<const double> values, std::size_t k) {
  require(k >= 1 && k <= values.size(), AttentionError::Kind::dimension, "top_k_mean: k out of range");
  std::vector<double> buf(values.begin(), values.end());
  return top_k_mean_inplace(buf, k);
}

std::vector<double> reduce_layers_heads(const AttentionDump& dump, const PoolOptions& opts) {
  dump.validate();
  check_k(dump, opts);
  const auto [L, H, T, F] = dump.dims;
  std::vector<double> out(std::size_t{T} * F);

  if (opts.order == ReductionOrder::layers_then_heads) {
    std::vector<double> per_head(std::size_t{H} * T * F);  // [h][t][f]
    std::vector<double> buf(L);
    for (std::uint32_t h = 0; h < H; ++h) {
      for (std::uint32_t t = 0; t < T; ++t) {
        for (std::uint32_t f = 0; f < F; ++f) {
          for (std::uint32_t l = 0; l < L; ++l) buf[l] = dump.at(l, h, t, f);
          per_head[(std::size_t{h} * T + t) * F + f] = top_k_mean_inplace(buf, opts.k_layers);
        }
      }
    }
    buf.resize(H);
    for (std::uint32_t t = 0; t < T; ++t) {
      for (std::uint32_t f = 0; f < F; ++f) {
        for (std::uint32_t h = 0; h < H; ++h) buf[h] = per_head[(std::size_t{h} * T + t) * F + f];
        out[std::size_t{t} * F + f] = top_k_mean_inplace(buf, opts.k_heads);
      }
    }
  } else {
    std::vector<double> per_layer(std::size_t{L} * T * F);  // [l][t][f]
    std::vector<double> buf(H);
    for (std::uint32_t l = 0; l < L; ++l) {
      for (std::uint32_t t = 0; t < T; ++t) {
        for (std::uint32_t f = 0; f < F; ++f) {
          for (std::uint32_t h = 0; h < H; ++h) buf[h] = dump.at(l, h, t, f);
          per_layer[(std::size_t{l} * T + t) * F + f] = top_k_mean_inplace(buf, opts.k_heads);
        }
      }
    }
    buf.resize(L);
    for (std::uint32_t t = 0; t < T; ++t) {
      for (std::uint32_t f = 0; f < F; ++f) {
        for (std::uint32_t l = 0; l < L; ++l) buf[l] = per_layer[(std::size_t{l} * T + t) * F + f];
        out[std::size_t{t} * F + f] = top_k_mean_inplace(buf, opts.k_layers);
      }
    }
  }
  return out;
}

std::vector<double> pool_features(const AttentionDump& dump, const PoolOptions& opts, std::uint32_t l) {
  require(l >= 1 && l <= dump.dims.tokens, AttentionError::Kind::dimension,
          "l=" + std::to_string(l) + " must be in [1, " + std::to_string(dump.dims.tokens) + "]");
  const auto reduced = reduce_layers_heads(dump, opts);
  const auto T = dump.dims.tokens;
  const auto F = dump.dims.features;
  std::vector<double> out(F);
  std::vector<double> buf(T);
  for (std::uint32_t f = 0; f < F; ++f) {
    for (std::uint32_t t = 0; t < T; ++t) buf[t] = reduced[std::size_t{t} * F + f];
    out[f] = top_k_mean_inplace(buf, l);
  }
  return out;
}

PooledMap pool(const AttentionDump& dump, std::uint32_t k, std::uint32_t l) {
  return pool(dump, PoolOptions{k, k, ReductionOrder::layers_then_heads}, l);
}

PooledMap pool(const AttentionDump& dump, const PoolOptions& opts, std::uint32_t l) {
  require(dump.dims.features == kImageFeatures, AttentionError::Kind::geometry,
          "dump has " + std::to_string(dump.dims.features) + " image features, expected " +
              std::to_string(kImageFeatures));
  return PooledMap{pool_features(dump, opts, l), opts.k_layers, opts.k_heads, l};
}

std::uint32_t choose_l(const AttentionDump& initial, const AttentionDump& feedback) {
  return std::min(initial.dims.tokens, feedback.dims.tokens);
}

double nearest_rank_quantile(std::span<const double> values, double q) {
  require(!values.empty(), AttentionError::Kind::dimension, "quantile of an empty set");
  require(q > 0.0 && q < 1.0, AttentionError::Kind::dimension, "quantile q must be in (0, 1)");
  const double n = static_cast<double>(values.size());
  double pos = q * n;
  // Snap products like 0.5 * 576 that land on an integer up to rounding.
  if (std::abs(pos - std::round(pos)) < 1e-9) pos = std::round(pos);
  const auto rank = static_cast<std::size_t>(std::ceil(pos));  // 1-based
  std::vector<double> sorted(values.begin(), values.end());
  const auto idx = std::clamp<std::size_t>(rank, 1, sorted.size()) - 1;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(idx), sorted.end());
  return sorted[idx];
}

PooledMap quantile_clamp(const PooledMap& map, double q) {
  const double threshold = nearest_rank_quantile(map.grid, q);
  const double top = map.max();
  PooledMap out = map;
  for (auto& v : out.grid) {
    if (v >= threshold) v = top;
  }
  return out;
}

CoverageStats coverage_stats(const PooledMap& map, double tau, std::size_t top_n) {
  CoverageStats s;
  const auto n = map.grid.size();
  require(n > 0, AttentionError::Kind::geometry, "empty pooled map");
  double sum = 0.0;
  std::size_t covered = 0;
  for (double v : map.grid) {
    sum += v;
    covered += v >= tau ? 1 : 0;
  }
  s.mean_attention = sum / static_cast<double>(n);
  s.coverage_at_tau = static_cast<double>(covered) / static_cast<double>(n);

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  const auto take = std::min(top_n, n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      return map.grid[a] != map.grid[b] ? map.grid[a] > map.grid[b] : a < b;
                    });
  for (std::size_t i = 0; i < take; ++i) {
    const auto [r, c] = grid_position(order[i]);
    s.top_cells.push_back({r, c, map.grid[order[i]]});
  }
  return s;
}

std::pair<CoverageStats, CoverageStats> compare_maps(const PooledMap& initial_map, const PooledMap& feedback_map,
                                                     double tau, std::size_t top_n) {
  require(initial_map.grid.size() == feedback_map.grid.size(), AttentionError::Kind::shape_mismatch,
          "compare_maps: grids differ in size");
  return {coverage_stats(initial_map, tau, top_n), coverage_stats(feedback_map, tau, top_n)};
}

std::vector<TokenSaliency> token_saliency(const AttentionDump& dump, std::uint32_t k) {
  return token_saliency(dump, PoolOptions{k, k, ReductionOrder::layers_then_heads});
}

std::vector<TokenSaliency> token_saliency(const AttentionDump& dump, const PoolOptions& opts) {
  const auto reduced = reduce_layers_heads(dump, opts);
  const auto T = dump.dims.tokens;
  const auto F = dump.dims.features;
  std::vector<TokenSaliency> out(T);
  for (std::uint32_t t = 0; t < T; ++t) {
    double sum = 0.0;
    for (std::uint32_t f = 0; f < F; ++f) sum += reduced[std::size_t{t} * F + f];
    out[t] = {t, sum / static_cast<double>(F)};
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const TokenSaliency& a, const TokenSaliency& b) { return a.saliency > b.saliency; });
  return out;
}

PooledMap average_maps(std::span<const PooledMap> maps) {
  require(!maps.empty(), AttentionError::Kind::dimension, "average_maps: no maps");
  PooledMap out = maps.front();
  for (std::size_t i = 1; i < maps.size(); ++i) {
    require(maps[i].grid.size() == out.grid.size(), AttentionError::Kind::shape_mismatch,
            "average_maps: grids differ in size");
    for (std::size_t c = 0; c < out.grid.size(); ++c) out.grid[c] += maps[i].grid[c];
  }
  for (auto& v : out.grid) v /= static_cast<double>(maps.size());
  return out;
}

}  // namespace refine::attn
