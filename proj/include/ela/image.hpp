#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ela/error.hpp"

namespace ela {

/// JPEG quality on the libjpeg scale, 1..100.
class QualityLevel {
 public:
  static constexpr int kDefault = 95;

  constexpr QualityLevel() = default;
  explicit QualityLevel(int value) : value_(value) {
    require(value >= 1 && value <= 100, ErrorCode::InvalidArgument,
            "JPEG quality must be in [1, 100], got " + std::to_string(value));
  }

  [[nodiscard]] constexpr int value() const noexcept { return value_; }
  friend constexpr bool operator==(QualityLevel, QualityLevel) = default;

 private:
  int value_ = kDefault;
};

/// 8-bit interleaved RGB raster, row-major. Both sides are at least one JPEG
/// block (8 px).
class RasterImage {
 public:
  static constexpr int kChannels = 3;
  static constexpr int kMinSide = 8;

  RasterImage() = default;

  RasterImage(int width, int height, std::uint8_t fill = 0)
      : RasterImage(width, height,
                    std::vector<std::uint8_t>(checked_size(width, height), fill)) {}

  RasterImage(int width, int height, std::vector<std::uint8_t> data)
      : width_(width), height_(height), data_(std::move(data)) {
    require(data_.size() == checked_size(width, height), ErrorCode::ShapeMismatch,
            "raster data length does not equal width*height*3");
  }

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }
  [[nodiscard]] std::size_t sample_count() const noexcept { return data_.size(); }

  [[nodiscard]] std::span<const std::uint8_t> data() const noexcept { return data_; }
  [[nodiscard]] std::span<std::uint8_t> data() noexcept { return data_; }

  [[nodiscard]] std::uint8_t at(int x, int y, int c) const noexcept {
    return data_[index(x, y, c)];
  }
  std::uint8_t& at(int x, int y, int c) noexcept { return data_[index(x, y, c)]; }

  [[nodiscard]] std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * kChannels + static_cast<std::size_t>(c);
  }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  static std::size_t checked_size(int width, int height) {
    require(width >= kMinSide && height >= kMinSide, ErrorCode::ImageTooSmall,
            "image is " + std::to_string(width) + "x" + std::to_string(height) +
                ", both sides must be at least 8");
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * kChannels;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

}  // namespace ela
