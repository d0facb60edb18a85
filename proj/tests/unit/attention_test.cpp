#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

#include "refine/attention.hpp"
#include "refine/attention_io.hpp"
#include "refine/heatmap.hpp"
#include "support/attention_oracle.hpp"
#include "support/temp_dir.hpp"

namespace refine::attn {
namespace {

PooledMap map_from(std::vector<double> grid) {
  PooledMap m;
  m.grid = std::move(grid);
  return m;
}

PooledMap ramp_map() {
  std::vector<double> g(kImageFeatures);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<double>(i + 1);
  return map_from(std::move(g));
}

TEST(Pool, SingleWeight) {
  AttentionDump d;
  d.dims = {1, 1, 1, kImageFeatures};
  d.weights.assign(kImageFeatures, 0.0f);
  d.weights[feature_index(3, 5)] = 0.7f;
  const auto m = pool(d, 1, 1);
  EXPECT_DOUBLE_EQ(m.at(3, 5), static_cast<double>(0.7f));
  EXPECT_DOUBLE_EQ(m.max(), static_cast<double>(0.7f));
}

TEST(Pool, TopOneIsTheMaximum) {
  std::mt19937_64 rng(1);
  const auto d = oracle::random_dump(rng, 3, 4, 5);
  const auto m = pool(d, 1, 1);
  for (std::uint32_t f = 0; f < kImageFeatures; ++f) {
    float mx = 0.0f;
    for (std::uint32_t l = 0; l < 3; ++l)
      for (std::uint32_t h = 0; h < 4; ++h)
        for (std::uint32_t t = 0; t < 5; ++t) mx = std::max(mx, d.at(l, h, t, f));
    EXPECT_EQ(m.grid[f], static_cast<double>(mx));
  }
}

TEST(Pool, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const auto d = oracle::random_dump(rng, 4, 4, 5);
    const auto m = pool(d, 3, 2);
    const auto want = oracle::pool(d, 3, 2);
    for (std::size_t f = 0; f < kImageFeatures; ++f) {
      ASSERT_TRUE(oracle::rel_close(m.grid[f], want[f])) << f << ": " << m.grid[f] << " vs " << want[f];
    }
    EXPECT_EQ(m.k_layers, 3u);
    EXPECT_EQ(m.l_tokens, 2u);
  }
}

TEST(Pool, OrdersAgreeWhenKIsOneOrFull) {
  std::mt19937_64 rng(11);
  const auto d = oracle::random_dump(rng, 3, 3, 4);
  for (std::uint32_t k : {1u, 3u}) {
    const auto a = pool(d, PoolOptions{k, k, ReductionOrder::layers_then_heads}, 2);
    const auto b = pool(d, PoolOptions{k, k, ReductionOrder::heads_then_layers}, 2);
    for (std::size_t f = 0; f < kImageFeatures; ++f) EXPECT_TRUE(oracle::rel_close(a.grid[f], b.grid[f], 1e-12));
  }
}

TEST(Pool, ScalingByPowerOfTwoScalesExactly) {
  std::mt19937_64 rng(13);
  const auto d = oracle::random_dump(rng, 3, 3, 4);
  auto scaled = d;
  for (auto& w : scaled.weights) w *= 4.0f;
  const auto a = pool(d, 2, 2);
  const auto b = pool(scaled, 2, 2);
  for (std::size_t f = 0; f < kImageFeatures; ++f) EXPECT_EQ(b.grid[f], 4.0 * a.grid[f]);
}

TEST(Pool, InvariantUnderLayerAndHeadPermutation) {
  std::mt19937_64 rng(17);
  const auto d = oracle::random_dump(rng, 4, 3, 3);
  auto perm = d;
  const std::uint32_t lp[] = {2, 0, 3, 1}, hp[] = {1, 2, 0};
  for (std::uint32_t l = 0; l < 4; ++l)
    for (std::uint32_t h = 0; h < 3; ++h)
      for (std::uint32_t t = 0; t < 3; ++t)
        for (std::uint32_t f = 0; f < kImageFeatures; ++f)
          perm.weights[perm.index(lp[l], hp[h], t, f)] = d.at(l, h, t, f);
  const auto a = pool(d, 2, 2);
  const auto b = pool(perm, 2, 2);
  for (std::size_t f = 0; f < kImageFeatures; ++f) EXPECT_TRUE(oracle::rel_close(a.grid[f], b.grid[f]));
}

TEST(Pool, DimensionErrors) {
  std::mt19937_64 rng(19);
  const auto d = oracle::random_dump(rng, 2, 2, 2);
  auto expect_kind = [](auto fn, AttentionError::Kind kind) {
    try {
      fn();
      FAIL();
    } catch (const AttentionError& e) {
      EXPECT_EQ(e.kind(), kind);
    }
  };
  expect_kind([&] { pool(d, 3, 1); }, AttentionError::Kind::dimension);
  expect_kind([&] { pool(d, 1, 3); }, AttentionError::Kind::dimension);
  expect_kind([&] { pool(d, 0, 1); }, AttentionError::Kind::dimension);
  const auto small = oracle::random_dump(rng, 1, 1, 1, 100);
  expect_kind([&] { pool(small, 1, 1); }, AttentionError::Kind::geometry);
  EXPECT_EQ(pool_features(small, PoolOptions{1, 1}, 1).size(), 100u);
  auto bad = d;
  bad.weights[0] = std::numeric_limits<float>::quiet_NaN();
  expect_kind([&] { pool(bad, 1, 1); }, AttentionError::Kind::non_finite);
  bad.weights[0] = -0.5f;
  expect_kind([&] { pool(bad, 1, 1); }, AttentionError::Kind::non_finite);
}

TEST(Pool, ChooseLIsShorterOutput) {
  AttentionDump a, b;
  a.dims = {1, 1, 7, kImageFeatures};
  b.dims = {1, 1, 4, kImageFeatures};
  EXPECT_EQ(choose_l(a, b), 4u);
  EXPECT_EQ(choose_l(b, a), 4u);
}

TEST(Geometry, FeatureIndexRoundTrip) {
  for (std::uint32_t f = 0; f < kImageFeatures; ++f) {
    const auto [r, c] = grid_position(f);
    EXPECT_LT(r, kGridSide);
    EXPECT_EQ(feature_index(r, c), f);
  }
  EXPECT_EQ(feature_index(1, 0), 24u);
}

TEST(Clamp, RampAnchor) {
  const auto m = ramp_map();
  const auto c = quantile_clamp(m, 0.995);
  std::size_t raised = 0;
  for (std::size_t i = 0; i < kImageFeatures; ++i) {
    if (i + 1 >= 574) {
      EXPECT_EQ(c.grid[i], 576.0);
    } else {
      EXPECT_EQ(c.grid[i], m.grid[i]);
    }
    raised += c.grid[i] == 576.0 ? 1 : 0;
  }
  EXPECT_EQ(raised, 3u);
  EXPECT_EQ(c.grid, oracle::clamp(m.grid, 995));
}

TEST(Clamp, MedianLeaves288DistinctValues) {
  const auto c = quantile_clamp(ramp_map(), 0.5);
  EXPECT_EQ(std::set<double>(c.grid.begin(), c.grid.end()).size(), 288u);
  EXPECT_EQ(c.grid[286], 287.0);
  EXPECT_EQ(c.grid[287], 576.0);
}

TEST(Clamp, MatchesOracleOnRandomGrids) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> q(1, 999);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> g(kImageFeatures);
    for (auto& v : g) v = u(rng);
    const int qt = q(rng);
    EXPECT_EQ(quantile_clamp(map_from(g), qt / 1000.0).grid, oracle::clamp(g, qt)) << qt;
  }
}

TEST(Clamp, ConstantGridUnchanged) {
  const auto m = map_from(std::vector<double>(kImageFeatures, 0.25));
  EXPECT_EQ(quantile_clamp(m).grid, m.grid);
}

TEST(Compare, CoverageAndMeans) {
  std::vector<double> a(kImageFeatures, 0.0), b(kImageFeatures, 0.0);
  for (std::size_t i = 0; i < 10; ++i) a[i] = 1.0;
  for (std::size_t i = 0; i < 50; ++i) b[i * 11] = 2.0;
  const auto [sa, sb] = compare_maps(map_from(a), map_from(b), 0.5, 3);
  EXPECT_DOUBLE_EQ(sa.coverage_at_tau, 10.0 / 576.0);
  EXPECT_DOUBLE_EQ(sb.coverage_at_tau, 50.0 / 576.0);
  EXPECT_DOUBLE_EQ(sa.mean_attention, 10.0 / 576.0);
  EXPECT_DOUBLE_EQ(sb.mean_attention, 100.0 / 576.0);
  ASSERT_EQ(sb.top_cells.size(), 3u);
  EXPECT_EQ(sb.top_cells[1].col, 11u);  // ties by lower feature index
  EXPECT_EQ(sb.top_cells[1].row, 0u);
  EXPECT_EQ(sb.top_cells[2].row, 0u);
  EXPECT_EQ(sb.top_cells[2].col, 22u);

  const auto [zero_tau, unused] = compare_maps(map_from(a), map_from(b), 0.0);
  EXPECT_DOUBLE_EQ(zero_tau.coverage_at_tau, 1.0);
  EXPECT_THROW(compare_maps(map_from(a), map_from({1.0}), 0.5), AttentionError);
}

TEST(Compare, MeanIsLinear) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> a(kImageFeatures), b(kImageFeatures), sum(kImageFeatures);
  for (std::size_t i = 0; i < kImageFeatures; ++i) {
    a[i] = u(rng);
    b[i] = u(rng);
    sum[i] = a[i] + b[i];
  }
  const double ma = coverage_stats(map_from(a), 0.5).mean_attention;
  const double mb = coverage_stats(map_from(b), 0.5).mean_attention;
  EXPECT_NEAR(coverage_stats(map_from(sum), 0.5).mean_attention, ma + mb, 1e-12);
}

TEST(Saliency, MatchesOracleAndBreaksTiesByIndex) {
  std::mt19937_64 rng(31);
  const auto d = oracle::random_dump(rng, 3, 3, 6);
  const auto got = token_saliency(d, 2);
  const auto want = oracle::saliency(d, 2);
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(got[i].token_index, want[i].first);
    EXPECT_TRUE(oracle::rel_close(got[i].saliency, want[i].second));
  }

  AttentionDump tie;
  tie.dims = {1, 1, 3, kImageFeatures};
  tie.weights.assign(tie.dims.count(), 0.1f);
  const auto s = token_saliency(tie, 1);
  EXPECT_EQ(s[0].token_index, 0u);
  EXPECT_EQ(s[1].token_index, 1u);
  EXPECT_EQ(s[2].token_index, 2u);
}

TEST(Average, ElementwiseMean) {
  const std::vector<PooledMap> maps = {map_from(std::vector<double>(kImageFeatures, 1.0)),
                                       map_from(std::vector<double>(kImageFeatures, 3.0))};
  const auto m = average_maps(maps);
  EXPECT_EQ(m.grid, std::vector<double>(kImageFeatures, 2.0));
}

TEST(DumpIO, RoundTripWithSidecar) {
  testing_support::TempDir dir;
  std::mt19937_64 rng(37);
  auto d = oracle::random_dump(rng, 2, 3, 4);
  d.tokens = {"A", " red", " pot", "."};
  d.label = DumpLabel::feedback;
  const auto path = dir / "q1_feedback.attn";
  write_dump(path, d);
  EXPECT_TRUE(std::filesystem::exists(dir / "q1_feedback.tokens.json"));
  const auto back = read_dump(path);
  EXPECT_EQ(back.dims, d.dims);
  EXPECT_EQ(back.weights, d.weights);
  EXPECT_EQ(back.tokens, d.tokens);
  EXPECT_EQ(back.label, DumpLabel::feedback);
}

TEST(DumpIO, HeaderLayoutIsLittleEndian) {
  AttentionDump d;
  d.dims = {1, 2, 3, 4};
  d.weights.assign(24, 1.0f);
  const auto bytes = encode_dump(d);
  ASSERT_EQ(bytes.size(), 4u + 2u + 16u + 24u * 4u);
  EXPECT_EQ(bytes.substr(0, 4), "ATTN");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 0u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 1u);   // L
  EXPECT_EQ(static_cast<unsigned char>(bytes[10]), 2u);  // H
  EXPECT_EQ(static_cast<unsigned char>(bytes[14]), 3u);  // T
  EXPECT_EQ(static_cast<unsigned char>(bytes[18]), 4u);  // F
  // 1.0f = 0x3f800000
  EXPECT_EQ(static_cast<unsigned char>(bytes[25]), 0x3fu);
  EXPECT_EQ(decode_dump(bytes).weights, d.weights);
}

TEST(DumpIO, RejectsBadInput) {
  AttentionDump d;
  d.dims = {1, 1, 1, 2};
  d.weights = {0.5f, 0.25f};
  auto bytes = encode_dump(d);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_dump(bad_magic), AttentionError);
  EXPECT_THROW(decode_dump(bytes.substr(0, bytes.size() - 1)), AttentionError);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(decode_dump(bad_version), AttentionError);
  EXPECT_THROW(read_dump("/nonexistent/file.attn"), AttentionError);
}

TEST(PooledMapIO, JsonRoundTrip) {
  testing_support::TempDir dir;
  auto m = ramp_map();
  m.k_layers = 3;
  m.k_heads = 3;
  m.l_tokens = 5;
  write_pooled_map(dir / "m.json", m);
  const auto back = read_pooled_map(dir / "m.json");
  EXPECT_EQ(back.grid, m.grid);
  EXPECT_EQ(back.l_tokens, 5u);
}

TEST(Heatmap, ConstantAndOneHot) {
  const auto flat = heatmap_image(map_from(std::vector<double>(kImageFeatures, 0.3)));
  EXPECT_EQ(flat.width, kImagePx);
  EXPECT_EQ(flat.height, kImagePx);
  for (auto p : flat.pixels) EXPECT_EQ(p, 255);

  std::vector<double> g(kImageFeatures, 0.0);
  g[feature_index(2, 7)] = 1.0;
  const auto img = heatmap_image(map_from(g));
  std::size_t lit = 0;
  for (std::uint32_t y = 0; y < kImagePx; ++y) {
    for (std::uint32_t x = 0; x < kImagePx; ++x) {
      const bool inside = y / kPatchPx == 2 && x / kPatchPx == 7;
      EXPECT_EQ(img.pixels[y * kImagePx + x], inside ? 255 : 0);
      lit += img.pixels[y * kImagePx + x] ? 1 : 0;
    }
  }
  EXPECT_EQ(lit, kPatchPx * kPatchPx);

  const auto zero = heatmap_image(map_from(std::vector<double>(kImageFeatures, 0.0)));
  for (auto p : zero.pixels) EXPECT_EQ(p, 0);
}

TEST(Heatmap, RenderIsByteStableAndReadable) {
  testing_support::TempDir dir;
  const auto m = ramp_map();
  render_heatmap(m, dir / "a.png");
  render_heatmap(m, dir / "b.png");
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(dir / "a.png"), slurp(dir / "b.png"));
  const auto back = read_png_gray(dir / "a.png");
  EXPECT_EQ(back.pixels, heatmap_image(m).pixels);
}

TEST(Heatmap, BlendWithUnderlay) {
  GrayImage heat{2, 1, {200, 0}};
  GrayImage under{1, 1, {100}};
  const auto out = blend(heat, under, 0.5);
  ASSERT_EQ(out.pixels.size(), 2u);
  EXPECT_EQ(out.pixels[0], 150);
  EXPECT_EQ(out.pixels[1], 50);
}

}  // namespace
}  // namespace refine::attn
