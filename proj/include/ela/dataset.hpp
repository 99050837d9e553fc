#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "ela/codec.hpp"
#include "ela/csv.hpp"
#include "ela/error_level.hpp"
#include "ela/io.hpp"
#include "ela/rng.hpp"

namespace ela {

/// Tampered is the positive class everywhere in the library.
enum class Label : std::uint8_t { Authentic = 0, Tampered = 1 };
enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

inline constexpr std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw Error(ErrorCode::Parse, "unknown split '" + std::string(s) + "'");
}

inline Label parse_label(std::string_view s) {
  if (s == "0") return Label::Authentic;
  if (s == "1") return Label::Tampered;
  throw Error(ErrorCode::Parse, "label must be 0 or 1, got '" + std::string(s) + "'");
}

inline int label_index(Label l) { return static_cast<int>(l); }

struct LabeledPath {
  std::string path;
  Label label = Label::Authentic;
  friend bool operator==(const LabeledPath&, const LabeledPath&) = default;
};

struct ImageRecord {
  std::string path;
  Label label = Label::Authentic;
  Split split = Split::Train;
  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct PreprocessSettings {
  QualityLevel quality;
  int target_width = 128;
  int target_height = 128;
  bool enhance = true;
  friend bool operator==(const PreprocessSettings&, const PreprocessSettings&) = default;
};

struct SplitRatios {
  double train = 0.8;
  double val = 0.2;
  double test = 0.0;

  [[nodiscard]] std::array<double, 3> as_array() const { return {train, val, test}; }
};

struct DatasetManifest {
  std::vector<ImageRecord> records;
  std::uint64_t seed = 42;
  PreprocessSettings settings;
  SplitRatios ratios;

  [[nodiscard]] std::vector<ImageRecord> in_split(Split s) const {
    std::vector<ImageRecord> out;
    for (const auto& r : records)
      if (r.split == s) out.push_back(r);
    return out;
  }
};

// ---- corpus scanning ---------------------------------------------------------

/// CASIA v2 convention: `Au/` holds authentic images, `Tp/` tampered ones.
struct CorpusLayout {
  std::string authentic_dir = "Au";
  std::string tampered_dir = "Tp";
};

struct SkippedFile {
  std::string path;
  std::string reason;
};

struct ScanResult {
  std::vector<LabeledPath> records;
  std::vector<SkippedFile> skipped;
};

inline bool has_image_extension(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".tif" || ext == ".tiff" ||
         ext == ".bmp";
}

/// Lists every decodable image under the two class directories, sorted by
/// path. Undecodable image files are reported in `skipped`, not fatal.
inline ScanResult scan_corpus(const std::filesystem::path& root, const CorpusLayout& layout = {}) {
  namespace fs = std::filesystem;
  require(fs::is_directory(root), ErrorCode::MissingDirectory, "corpus root not found: " + root.string());
  ScanResult result;
  for (const auto& [dir, label] : {std::pair{layout.authentic_dir, Label::Authentic},
                                   std::pair{layout.tampered_dir, Label::Tampered}}) {
    const auto class_dir = root / dir;
    require(fs::is_directory(class_dir), ErrorCode::MissingDirectory,
            "class directory not found: " + class_dir.string());
    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(class_dir))
      if (entry.is_regular_file() && has_image_extension(entry.path()))
        files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    std::size_t accepted = 0;
    for (auto& f : files) {
      try {
        (void)decode_image(read_file(f));
        result.records.push_back({std::move(f), label});
        ++accepted;
      } catch (const Error& e) {
        result.skipped.push_back({f, e.what()});
      }
    }
    require(accepted > 0, ErrorCode::EmptyCorpus, "no decodable images in " + class_dir.string());
  }
  std::sort(result.records.begin(), result.records.end(),
            [](const LabeledPath& a, const LabeledPath& b) { return a.path < b.path; });
  return result;
}

inline std::string format_records_csv(std::span<const LabeledPath> records) {
  std::string out = "path,label\n";
  for (const auto& r : records) out += csv::field(r.path) + "," + std::to_string(label_index(r.label)) + "\n";
  return out;
}

inline std::vector<LabeledPath> parse_records_csv(std::string_view text) {
  std::vector<LabeledPath> out;
  bool header = false;
  for (const auto& line : csv::lines(text)) {
    if (line.empty() || line.front() == '#') continue;
    const auto cells = csv::split_row(line);
    if (!header) {
      require(cells.size() >= 2 && cells[0] == "path" && cells[1] == "label", ErrorCode::Parse,
              "records CSV must start with header 'path,label'");
      header = true;
      continue;
    }
    require(cells.size() >= 2, ErrorCode::Parse, "records row needs path and label: " + line);
    out.push_back({cells[0], parse_label(cells[1])});
  }
  require(header, ErrorCode::Parse, "records CSV has no header");
  return out;
}

// ---- splitting ---------------------------------------------------------------

/// Largest-remainder apportionment of n items over the three ratios; ties in
/// the remainder go to the earlier split (train, val, test).
inline std::array<std::size_t, 3> apportion(std::size_t n, const SplitRatios& ratios) {
  const auto r = ratios.as_array();
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double raw = static_cast<double>(n) * r[i];
    const double whole = std::floor(raw + 1e-9);
    counts[i] = static_cast<std::size_t>(whole);
    remainder[i] = std::max(0.0, raw - whole);
    assigned += counts[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % 3]];
  return counts;
}

/// Stratified, seeded split. Each class is shuffled with one SplitMix64 stream
/// (authentic first, then tampered), then cut into train/val/test by
/// `apportion`. Records keep their input order in the manifest.
inline DatasetManifest split_manifest(std::span<const LabeledPath> records, const SplitRatios& ratios,
                                      std::uint64_t seed, const PreprocessSettings& settings = {}) {
  const auto r = ratios.as_array();
  require(std::all_of(r.begin(), r.end(), [](double v) { return v >= 0.0 && std::isfinite(v); }) &&
              ratios.train > 0.0,
          ErrorCode::InvalidArgument, "split ratios must be non-negative with a positive train share");
  require(std::abs(r[0] + r[1] + r[2] - 1.0) <= 1e-9, ErrorCode::InvalidArgument,
          "split ratios must sum to 1");

  DatasetManifest manifest;
  manifest.seed = seed;
  manifest.settings = settings;
  manifest.ratios = ratios;
  manifest.records.reserve(records.size());
  for (const auto& rec : records) manifest.records.push_back({rec.path, rec.label, Split::Train});

  SplitMix64 rng(seed);
  for (Label label : {Label::Authentic, Label::Tampered}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (records[i].label == label) members.push_back(i);
    require(members.size() >= 3, ErrorCode::TooFewExamples,
            "class " + std::to_string(label_index(label)) + " has " + std::to_string(members.size()) +
                " records, at least 3 are required");
    shuffle(std::span(members), rng);
    const auto counts = apportion(members.size(), ratios);
    require(counts[0] > 0, ErrorCode::TooFewExamples,
            "class " + std::to_string(label_index(label)) + " would have no training records");
    for (std::size_t k = 0; k < members.size(); ++k) {
      const Split s = k < counts[0] ? Split::Train : k < counts[0] + counts[1] ? Split::Val : Split::Test;
      manifest.records[members[k]].split = s;
    }
  }
  return manifest;
}

inline std::string format_manifest(const DatasetManifest& m) {
  std::string out;
  out += "# seed=" + std::to_string(m.seed) + "\n";
  out += "# quality=" + std::to_string(m.settings.quality.value()) + "\n";
  out += "# size=" + std::to_string(m.settings.target_width) + "x" +
         std::to_string(m.settings.target_height) + "\n";
  out += "# enhance=" + std::string(m.settings.enhance ? "1" : "0") + "\n";
  out += "# ratios=" + csv::shortest(m.ratios.train) + "," + csv::shortest(m.ratios.val) + "," +
         csv::shortest(m.ratios.test) + "\n";
  out += "# resize=bilinear\n";
  out += "# codec=" + codec_id() + "\n";
  out += "path,label,split\n";
  for (const auto& r : m.records)
    out += csv::field(r.path) + "," + std::to_string(label_index(r.label)) + "," +
           std::string(to_string(r.split)) + "\n";
  return out;
}

inline std::pair<int, int> parse_size(std::string_view s) {
  const auto x = s.find('x');
  require(x != std::string_view::npos, ErrorCode::Parse, "size must look like WxH");
  const auto w = csv::parse_int(s.substr(0, x));
  const auto h = csv::parse_int(s.substr(x + 1));
  require(w >= 1 && h >= 1 && w <= 8192 && h <= 8192, ErrorCode::InvalidArgument, "size out of range");
  return {static_cast<int>(w), static_cast<int>(h)};
}

inline DatasetManifest parse_manifest(std::string_view text) {
  DatasetManifest m;
  bool header = false;
  for (const auto& line : csv::lines(text)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto body = std::string_view(line).substr(1);
      const auto start = body.find_first_not_of(' ');
      if (start == std::string_view::npos) continue;
      const auto kv = body.substr(start);
      const auto eq = kv.find('=');
      if (eq == std::string_view::npos) continue;
      const auto key = kv.substr(0, eq);
      const auto value = kv.substr(eq + 1);
      if (key == "seed") {
        m.seed = static_cast<std::uint64_t>(std::stoull(std::string(value)));
      } else if (key == "quality") {
        m.settings.quality = QualityLevel(static_cast<int>(csv::parse_int(value)));
      } else if (key == "size") {
        std::tie(m.settings.target_width, m.settings.target_height) = parse_size(value);
      } else if (key == "enhance") {
        m.settings.enhance = value == "1" || value == "true";
      } else if (key == "ratios") {
        const auto cells = csv::split_row(value);
        require(cells.size() == 3, ErrorCode::Parse, "ratios need three values");
        m.ratios = {csv::parse_double(cells[0]), csv::parse_double(cells[1]), csv::parse_double(cells[2])};
      }
      continue;
    }
    const auto cells = csv::split_row(line);
    if (!header) {
      require(cells.size() == 3 && cells[0] == "path" && cells[1] == "label" && cells[2] == "split",
              ErrorCode::Parse, "manifest header must be 'path,label,split'");
      header = true;
      continue;
    }
    require(cells.size() == 3, ErrorCode::Parse, "manifest row needs three fields: " + line);
    m.records.push_back({cells[0], parse_label(cells[1]), parse_split(cells[2])});
  }
  require(header, ErrorCode::Parse, "manifest has no header row");
  return m;
}

// ---- preprocessing -----------------------------------------------------------

/// One network input: (height, width, 3) values in [0, 1] plus a one-hot label.
struct ExampleTensor {
  int width = 0;
  int height = 0;
  std::vector<float> data;
  std::array<float, 2> one_hot{1.0f, 0.0f};
};

/// Bilinear resize with half-pixel centres and edge clamping (the
/// OpenCV/PIL "align corners = false" convention).
inline std::vector<double> resize_bilinear(std::span<const double> src, int w, int h, int channels,
                                           int out_w, int out_h) {
  require(src.size() == static_cast<std::size_t>(w) * h * channels, ErrorCode::ShapeMismatch,
          "resize source has wrong length");
  std::vector<double> out(static_cast<std::size_t>(out_w) * out_h * channels);
  const double sx = static_cast<double>(w) / out_w;
  const double sy = static_cast<double>(h) / out_h;
  for (int oy = 0; oy < out_h; ++oy) {
    const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      for (int c = 0; c < channels; ++c) {
        auto at = [&](int x, int y) { return src[(static_cast<std::size_t>(y) * w + x) * channels + c]; };
        const double top = at(x0, y0) * (1 - wx) + at(x1, y0) * wx;
        const double bottom = at(x0, y1) * (1 - wx) + at(x1, y1) * wx;
        out[(static_cast<std::size_t>(oy) * out_w + ox) * channels + c] = top * (1 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

/// Everything after the ELA itself: optional enhancement, resize, scale to [0, 1].
inline ExampleTensor preprocess_ela(const ElaMap& ela, const PreprocessSettings& settings, Label label) {
  const auto raster = settings.enhance ? enhance_ela(ela) : ela.as_image();
  const auto samples = raster.data();
  std::vector<double> values(samples.begin(), samples.end());
  if (raster.width() != settings.target_width || raster.height() != settings.target_height)
    values = resize_bilinear(values, raster.width(), raster.height(), 3, settings.target_width,
                             settings.target_height);
  ExampleTensor t;
  t.width = settings.target_width;
  t.height = settings.target_height;
  t.data.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    t.data[i] = static_cast<float>(std::clamp(values[i] / 255.0, 0.0, 1.0));
  t.one_hot = label == Label::Tampered ? std::array{0.0f, 1.0f} : std::array{1.0f, 0.0f};
  return t;
}

inline ExampleTensor preprocess_image(const RasterImage& img, const PreprocessSettings& settings, Label label) {
  return preprocess_ela(compute_ela(img, settings.quality), settings, label);
}

inline ExampleTensor preprocess(const ImageRecord& record, const PreprocessSettings& settings) {
  return preprocess_image(decode_image(read_file(record.path)), settings, record.label);
}

/// Preprocesses records in order. With threads > 1 contiguous chunks run on
/// worker threads; the output order never depends on the thread count.
inline std::vector<ExampleTensor> preprocess_all(std::span<const ImageRecord> records,
                                                 const PreprocessSettings& settings, unsigned threads = 1) {
  std::vector<ExampleTensor> out(records.size());
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(records.size())));
  if (threads <= 1) {
    for (std::size_t i = 0; i < records.size(); ++i) out[i] = preprocess(records[i], settings);
    return out;
  }
  std::vector<std::future<void>> jobs;
  const std::size_t chunk = (records.size() + threads - 1) / threads;
  for (std::size_t begin = 0; begin < records.size(); begin += chunk) {
    const std::size_t end = std::min(records.size(), begin + chunk);
    jobs.push_back(std::async(std::launch::async, [&, begin, end] {
      for (std::size_t i = begin; i < end; ++i) out[i] = preprocess(records[i], settings);
    }));
  }
  for (auto& j : jobs) j.get();
  return out;
}

// ---- synthetic splices -------------------------------------------------------

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

/// Splice with an explicit donor offset. The base is recompressed at
/// `base_quality`; inside `rect` the pixels come from the base recompressed at
/// `donor_quality`, read at (x + dx, y + dy) with edge clamping.
inline RasterImage synth_splice_at(const RasterImage& base, const Rect& rect, QualityLevel donor_quality,
                                   QualityLevel base_quality, int dx, int dy) {
  require(rect.width >= 16 && rect.height >= 16, ErrorCode::InvalidArgument,
          "splice rectangle must be at least 16x16");
  require(rect.x >= 0 && rect.y >= 0 && rect.x + rect.width <= base.width() &&
              rect.y + rect.height <= base.height(),
          ErrorCode::RectOutOfBounds, "splice rectangle exceeds image bounds");
  auto out = recompress(base, base_quality);
  const auto donor = recompress(base, donor_quality);
  for (int y = rect.y; y < rect.y + rect.height; ++y) {
    const int sy = std::clamp(y + dy, 0, base.height() - 1);
    for (int x = rect.x; x < rect.x + rect.width; ++x) {
      const int sx = std::clamp(x + dx, 0, base.width() - 1);
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = donor.at(sx, sy, c);
    }
  }
  return out;
}

/// Seeded splice. Each donor offset component is drawn uniformly from
/// {-2, -1, 1, 2}, so the pasted blocks never sit on the base's 8x8 grid.
inline RasterImage synth_splice(const RasterImage& base, const Rect& rect, QualityLevel donor_quality,
                                QualityLevel base_quality, std::uint64_t seed) {
  static constexpr std::array<int, 4> kOffsets{-2, -1, 1, 2};
  SplitMix64 rng(seed);
  const int dx = kOffsets[rng.bounded(4)];
  const int dy = kOffsets[rng.bounded(4)];
  return synth_splice_at(base, rect, donor_quality, base_quality, dx, dy);
}

/// Colour saturation of synthetic scenes relative to uniformly drawn RGB;
/// 0.45 puts mean |channel - luma| near 20, the median of the natural-image
/// fixtures.
inline constexpr double kSceneSaturation = 0.45;

/// Procedural stand-in for a photograph: smooth illumination, a few flat
/// shapes with soft edges, multi-octave value noise and sensor grain.
inline RasterImage synth_scene(int width, int height, std::uint64_t seed) {
  SplitMix64 rng(seed);
  RasterImage img(width, height);
  std::array<double, 3> base{}, gx{}, gy{};
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(40, 200);
    gx[c] = rng.uniform(-60, 60) / width;
    gy[c] = rng.uniform(-60, 60) / height;
  }
  struct Blob {
    double cx, cy, rx, ry;
    std::array<double, 3> color;
    bool ellipse;
  };
  std::vector<Blob> blobs(static_cast<std::size_t>(rng.range(3, 7)));
  for (auto& b : blobs) {
    b.cx = rng.uniform(0, width);
    b.cy = rng.uniform(0, height);
    b.rx = rng.uniform(0.08, 0.35) * width;
    b.ry = rng.uniform(0.08, 0.35) * height;
    for (auto& v : b.color) v = rng.uniform(10, 245);
    b.ellipse = rng.bounded(2) == 0;
  }
  // value-noise lattices at three scales
  struct Lattice {
    int cell;
    int nx, ny;
    std::vector<double> v;
    double amp;
  };
  std::vector<Lattice> octaves;
  for (const auto& [cell, amp] : {std::pair{16, 18.0}, std::pair{6, 9.0}, std::pair{3, 5.0}}) {
    Lattice l{cell, width / cell + 2, height / cell + 2, {}, amp};
    l.v.resize(static_cast<std::size_t>(l.nx) * l.ny);
    for (auto& v : l.v) v = rng.uniform(-1, 1);
    octaves.push_back(std::move(l));
  }
  const double grain = rng.uniform(1.0, 4.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      std::array<double, 3> px{};
      for (int c = 0; c < 3; ++c) px[c] = base[c] + gx[c] * x + gy[c] * y;
      for (const auto& b : blobs) {
        const double u = (x - b.cx) / b.rx, v = (y - b.cy) / b.ry;
        const double d = b.ellipse ? std::sqrt(u * u + v * v) : std::max(std::abs(u), std::abs(v));
        const double alpha = std::clamp((1.0 - d) * 6.0, 0.0, 1.0);
        for (int c = 0; c < 3; ++c) px[c] = px[c] * (1 - alpha) + b.color[c] * alpha;
      }
      double texture = 0;
      for (const auto& l : octaves) {
        const double fx = static_cast<double>(x) / l.cell, fy = static_cast<double>(y) / l.cell;
        const int ix = static_cast<int>(fx), iy = static_cast<int>(fy);
        const double tx = fx - ix, ty = fy - iy;
        const double sx = tx * tx * (3 - 2 * tx), sy = ty * ty * (3 - 2 * ty);
        auto at = [&](int i, int j) { return l.v[static_cast<std::size_t>(j) * l.nx + i]; };
        const double top = at(ix, iy) * (1 - sx) + at(ix + 1, iy) * sx;
        const double bottom = at(ix, iy + 1) * (1 - sx) + at(ix + 1, iy + 1) * sx;
        texture += l.amp * (top * (1 - sy) + bottom * sy);
      }
      // pull colours toward luma so mean chroma matches typical photographs
      const double luma = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
      for (auto& v : px) v = luma + kSceneSaturation * (v - luma);
      // sensor grain is mostly luminance; chroma noise is a small fraction
      const double luma_noise = grain * (rng.uniform() + rng.uniform() + rng.uniform() - 1.5);
      for (int c = 0; c < 3; ++c) {
        const double noise = luma_noise + 0.25 * grain * (rng.uniform() - 0.5);
        img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(px[c] + texture + noise), 0L, 255L));
      }
    }
  }
  return img;
}

struct SyntheticCorpusOptions {
  int count_per_class = 100;
  int width = 128;
  int height = 128;
  std::uint64_t seed = 42;
  QualityLevel base_quality{95};
  int donor_quality_min = 55;
  int donor_quality_max = 75;
};

/// Random splice rectangle covering 1/4 to 1/2 of each side.
inline Rect random_rect(int width, int height, SplitMix64& rng) {
  const int w = static_cast<int>(rng.range(std::max(16, width / 4), std::max(16, width / 2)));
  const int h = static_cast<int>(rng.range(std::max(16, height / 4), std::max(16, height / 2)));
  return {static_cast<int>(rng.range(0, width - w)), static_cast<int>(rng.range(0, height - h)), w, h};
}

/// Writes `Au/` (scenes saved once as JPEG at base quality) and `Tp/` (seeded
/// splices of distinct scenes, saved as PNG) under `root`.
inline void write_synthetic_corpus(const std::filesystem::path& root, const SyntheticCorpusOptions& opt) {
  namespace fs = std::filesystem;
  fs::create_directories(root / "Au");
  fs::create_directories(root / "Tp");
  SplitMix64 rng(opt.seed);
  char name[64];
  for (int i = 0; i < opt.count_per_class; ++i) {
    const auto scene = synth_scene(opt.width, opt.height, rng.next());
    std::snprintf(name, sizeof name, "Au_%04d.jpg", i);
    write_file_atomic(root / "Au" / name, encode_jpeg(scene, opt.base_quality));
  }
  for (int i = 0; i < opt.count_per_class; ++i) {
    const auto scene = synth_scene(opt.width, opt.height, rng.next());
    const auto rect = random_rect(opt.width, opt.height, rng);
    const QualityLevel donor(static_cast<int>(rng.range(opt.donor_quality_min, opt.donor_quality_max)));
    const auto spliced = synth_splice(scene, rect, donor, opt.base_quality, rng.next());
    std::snprintf(name, sizeof name, "Tp_%04d.png", i);
    write_file_atomic(root / "Tp" / name, encode_png(spliced));
  }
}

}  // namespace ela
