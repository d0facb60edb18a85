#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "refine/attention.hpp"

namespace refine::attn {

struct GrayImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, one byte per pixel
};

struct HeatmapOptions {
  double opacity = 0.6;  // heatmap weight when blending over an underlay
};

// 336 x 336 image, one 14 x 14 block per grid cell, intensity
// round(255 * v / max). An all-zero map renders black.
GrayImage heatmap_image(const PooledMap& map);

// Alpha-blends the heatmap over an underlay resized (nearest neighbour) to
// the heatmap size.
GrayImage blend(const GrayImage& heat, const GrayImage& underlay, double opacity);

std::string encode_png(const GrayImage& img);
GrayImage read_png_gray(const std::filesystem::path& path);

void render_heatmap(const PooledMap& map, const std::filesystem::path& out_path,
                    const std::optional<std::filesystem::path>& underlay = std::nullopt,
                    const HeatmapOptions& opts = {});

}  // namespace refine::attn
