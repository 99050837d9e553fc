#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "ela/codec.hpp"
#include "ela/io.hpp"

namespace ela::testing {

inline std::filesystem::path data_dir() { return ELA_TEST_DATA_DIR; }

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ela_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ignored;
    std::filesystem::remove_all(path_, ignored);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<RasterImage> natural_images() {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(data_dir() / "natural"))
    files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<RasterImage> out;
  for (const auto& f : files) out.push_back(decode_image(read_file(f)));
  return out;
}

inline RasterImage uniform_image(int w, int h, std::uint8_t value) { return RasterImage(w, h, value); }

}  // namespace ela::testing
