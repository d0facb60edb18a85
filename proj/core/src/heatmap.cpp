#include "refine/heatmap.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace refine::attn {

GrayImage heatmap_image(const PooledMap& map) {
  map.validate();
  GrayImage img{kImagePx, kImagePx, std::vector<std::uint8_t>(std::size_t{kImagePx} * kImagePx, 0)};
  const double top = map.max();
  for (std::uint32_t y = 0; y < kImagePx; ++y) {
    for (std::uint32_t x = 0; x < kImagePx; ++x) {
      const double v = map.at(y / kPatchPx, x / kPatchPx);
      const double scaled = top > 0.0 ? 255.0 * v / top : 0.0;
      img.pixels[std::size_t{y} * kImagePx + x] = static_cast<std::uint8_t>(std::clamp(std::lround(scaled), 0L, 255L));
    }
  }
  return img;
}

GrayImage blend(const GrayImage& heat, const GrayImage& underlay, double opacity) {
  if (underlay.width == 0 || underlay.height == 0) {
    throw AttentionError(AttentionError::Kind::io, "underlay image is empty");
  }
  const double a = std::clamp(opacity, 0.0, 1.0);
  GrayImage out = heat;
  for (std::uint32_t y = 0; y < heat.height; ++y) {
    const auto uy = static_cast<std::uint32_t>(std::uint64_t{y} * underlay.height / heat.height);
    for (std::uint32_t x = 0; x < heat.width; ++x) {
      const auto ux = static_cast<std::uint32_t>(std::uint64_t{x} * underlay.width / heat.width);
      const double h = heat.pixels[std::size_t{y} * heat.width + x];
      const double u = underlay.pixels[std::size_t{uy} * underlay.width + ux];
      out.pixels[std::size_t{y} * heat.width + x] = static_cast<std::uint8_t>(std::lround(a * h + (1.0 - a) * u));
    }
  }
  return out;
}

std::string encode_png(const GrayImage& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = img.width;
  image.height = img.height;
  image.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), 0, nullptr)) {
    throw AttentionError(AttentionError::Kind::io, std::string("png sizing failed: ") + image.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels.data(), 0, nullptr)) {
    throw AttentionError(AttentionError::Kind::io, std::string("png encoding failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

GrayImage read_png_gray(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw AttentionError(AttentionError::Kind::io, "cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  GrayImage img{image.width, image.height, std::vector<std::uint8_t>(PNG_IMAGE_SIZE(image))};
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw AttentionError(AttentionError::Kind::io, "cannot decode PNG " + path.string() + ": " + image.message);
  }
  return img;
}

void render_heatmap(const PooledMap& map, const std::filesystem::path& out_path,
                    const std::optional<std::filesystem::path>& underlay, const HeatmapOptions& opts) {
  auto img = heatmap_image(map);
  if (underlay) img = blend(img, read_png_gray(*underlay), opts.opacity);
  const auto bytes = encode_png(img);
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw AttentionError(AttentionError::Kind::io, "cannot write " + out_path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw AttentionError(AttentionError::Kind::io, "write failed: " + out_path.string());
}

}  // namespace refine::attn
