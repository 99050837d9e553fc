#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "ela/codec.hpp"
#include "ela/image.hpp"
#include "ela/io.hpp"

namespace ela {

/// Per-sample |original - recompressed| of an RGB image at one JPEG quality.
struct ElaMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;
  QualityLevel quality;
  std::uint8_t max_error = 0;

  [[nodiscard]] RasterImage as_image() const { return RasterImage(width, height, data); }
  friend bool operator==(const ElaMap&, const ElaMap&) = default;
};

/// decode(encode_jpeg(img, q)); dimensions are preserved, including sizes that
/// are not a multiple of the 8x8 block.
inline RasterImage recompress(const RasterImage& img, QualityLevel quality) {
  auto out = decode_image(encode_jpeg(img, quality));
  require(out.width() == img.width() && out.height() == img.height(), ErrorCode::EncodeFailure,
          "JPEG round trip changed image dimensions");
  return out;
}

inline ElaMap difference_map(const RasterImage& original, const RasterImage& recompressed,
                             QualityLevel quality) {
  require(original.width() == recompressed.width() && original.height() == recompressed.height(),
          ErrorCode::ShapeMismatch, "difference of images with different sizes");
  ElaMap map{original.width(), original.height(), {}, quality, 0};
  map.data.resize(original.sample_count());
  const auto a = original.data();
  const auto b = recompressed.data();
  std::uint8_t peak = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto d = static_cast<std::uint8_t>(std::abs(int{a[i]} - int{b[i]}));
    map.data[i] = d;
    peak = std::max(peak, d);
  }
  map.max_error = peak;
  return map;
}

inline ElaMap compute_ela(const RasterImage& img, QualityLevel quality = QualityLevel{}) {
  return difference_map(img, recompress(img, quality), quality);
}

/// Stretches the map so its maximum becomes 255: s * 255 / max(max_error, 1),
/// rounded half up. An all-zero map stays all zero.
inline RasterImage enhance_ela(const ElaMap& ela) {
  const unsigned peak = std::max<unsigned>(ela.max_error, 1);
  std::vector<std::uint8_t> out(ela.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const unsigned scaled = (2u * ela.data[i] * 255u + peak) / (2u * peak);
    out[i] = static_cast<std::uint8_t>(std::min(scaled, 255u));
  }
  return RasterImage(ela.width, ela.height, std::move(out));
}

inline std::string ela_sidecar(const std::string& source, const ElaMap& ela, bool enhanced) {
  std::string text;
  text += "source=" + source + "\n";
  text += "quality=" + std::to_string(ela.quality.value()) + "\n";
  text += "codec=" + codec_id() + "\n";
  text += "max_error=" + std::to_string(ela.max_error) + "\n";
  text += "width=" + std::to_string(ela.width) + "\n";
  text += "height=" + std::to_string(ela.height) + "\n";
  text += "enhanced=" + std::string(enhanced ? "1" : "0") + "\n";
  return text;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& png_path) {
  auto p = png_path;
  p += ".txt";
  return p;
}

/// Writes the (optionally enhanced) map as PNG plus a `<png>.txt` sidecar.
/// Never JPEG: that would add compression error to the map itself.
inline void write_ela(const std::filesystem::path& png_path, const std::string& source,
                      const ElaMap& ela, bool enhanced = true) {
  const auto image = enhanced ? enhance_ela(ela) : ela.as_image();
  write_file_atomic(png_path, encode_png(image));
  write_text_atomic(sidecar_path(png_path), ela_sidecar(source, ela, enhanced));
}

}  // namespace ela
