#pragma once

// Image decoding (JPEG, PNG, TIFF, BMP) and the pinned JPEG/PNG encoders.
//
// JPEG goes through libjpeg-turbo with fixed settings: baseline, libjpeg
// quality scaling, 4:2:0 chroma, islow DCT, no Huffman optimisation. PNG goes
// through libpng at a fixed zlib level with no time chunk, so encoding is
// byte-deterministic. 16-bit samples are reduced to their high byte by both
// the PNG and TIFF paths.

#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>
#include <tiffio.h>

#include "ela/error.hpp"
#include "ela/image.hpp"

namespace ela {

enum class ImageFormat { Jpeg, Png, Tiff, Bmp, Unknown };

inline ImageFormat sniff_format(std::span<const std::uint8_t> b) {
  if (b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF) return ImageFormat::Jpeg;
  static constexpr std::uint8_t kPng[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (b.size() >= 8 && std::memcmp(b.data(), kPng, 8) == 0) return ImageFormat::Png;
  if (b.size() >= 4 && ((b[0] == 'I' && b[1] == 'I' && b[2] == 42 && b[3] == 0) ||
                        (b[0] == 'M' && b[1] == 'M' && b[2] == 0 && b[3] == 42)))
    return ImageFormat::Tiff;
  if (b.size() >= 2 && b[0] == 'B' && b[1] == 'M') return ImageFormat::Bmp;
  return ImageFormat::Unknown;
}

/// Identifies the pinned JPEG codec; written into every output header.
inline std::string codec_id() {
  std::string id = "libjpeg-turbo";
#ifdef LIBJPEG_TURBO_VERSION
#define ELA_STR2(x) #x
#define ELA_STR(x) ELA_STR2(x)
  id += " " ELA_STR(LIBJPEG_TURBO_VERSION);
#undef ELA_STR
#undef ELA_STR2
#endif
  id += " (jpeg" + std::to_string(JPEG_LIB_VERSION) + " api, baseline, 4:2:0, islow)";
  return id;
}

namespace detail {

struct Decoded {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
};

enum class Status { Ok, Corrupt, Unsupported, Failed };

// ---- JPEG ------------------------------------------------------------------

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  bool warned;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_on_error(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

inline void jpeg_on_message(j_common_ptr cinfo, int level) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  // level -1 is a recoverable warning such as premature end of data; the
  // decoder would pad with gray, which ELA must never see.
  if (level < 0 && !err->warned) {
    err->warned = true;
    (*cinfo->err->format_message)(cinfo, err->message);
  }
}

// Only trivially destructible locals live between setjmp and longjmp.
inline Status jpeg_decode(std::span<const std::uint8_t> bytes, Decoded* out, JpegErrorMgr* jerr) {
  jpeg_decompress_struct cinfo;
  cinfo.err = jpeg_std_error(&jerr->pub);
  jerr->pub.error_exit = jpeg_on_error;
  jerr->pub.emit_message = jpeg_on_message;
  jerr->warned = false;
  jerr->message[0] = '\0';
  if (setjmp(jerr->jump)) {
    jpeg_destroy_decompress(&cinfo);
    return Status::Corrupt;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.jpeg_color_space == JCS_CMYK || cinfo.jpeg_color_space == JCS_YCCK) {
    std::snprintf(jerr->message, sizeof jerr->message, "CMYK/YCCK JPEG is not supported");
    jpeg_destroy_decompress(&cinfo);
    return Status::Unsupported;
  }
  cinfo.out_color_space = JCS_RGB;
  cinfo.dct_method = JDCT_ISLOW;
  cinfo.do_fancy_upsampling = TRUE;
  jpeg_start_decompress(&cinfo);
  out->width = static_cast<int>(cinfo.output_width);
  out->height = static_cast<int>(cinfo.output_height);
  const std::size_t stride = static_cast<std::size_t>(cinfo.output_width) * 3;
  out->rgb.resize(stride * cinfo.output_height);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out->rgb.data() + stride * cinfo.output_scanline;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return jerr->warned ? Status::Corrupt : Status::Ok;
}

inline Status jpeg_encode(const RasterImage* img, int quality, unsigned char** buffer,
                          unsigned long* size, JpegErrorMgr* jerr) {
  jpeg_compress_struct cinfo;
  cinfo.err = jpeg_std_error(&jerr->pub);
  jerr->pub.error_exit = jpeg_on_error;
  jerr->pub.emit_message = jpeg_on_message;
  jerr->warned = false;
  jerr->message[0] = '\0';
  if (setjmp(jerr->jump)) {
    jpeg_destroy_compress(&cinfo);
    return Status::Failed;
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, buffer, size);
  cinfo.image_width = static_cast<JDIMENSION>(img->width());
  cinfo.image_height = static_cast<JDIMENSION>(img->height());
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  cinfo.comp_info[0].h_samp_factor = 2;
  cinfo.comp_info[0].v_samp_factor = 2;
  for (int c = 1; c < 3; ++c) {
    cinfo.comp_info[c].h_samp_factor = 1;
    cinfo.comp_info[c].v_samp_factor = 1;
  }
  cinfo.dct_method = JDCT_ISLOW;
  cinfo.optimize_coding = FALSE;
  jpeg_start_compress(&cinfo, TRUE);
  const std::size_t stride = static_cast<std::size_t>(img->width()) * 3;
  const auto data = img->data();
  while (cinfo.next_scanline < cinfo.image_height) {
    // libjpeg takes a non-const row pointer but only reads from it
    auto* row = const_cast<JSAMPLE*>(data.data() + stride * cinfo.next_scanline);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  return Status::Ok;
}

// ---- PNG -------------------------------------------------------------------

struct PngContext {
  std::span<const std::uint8_t> input;
  std::size_t cursor = 0;
  std::vector<std::uint8_t>* output = nullptr;
  char message[256] = {};
};

inline void png_on_error(png_structp png, png_const_charp msg) {
  auto* ctx = static_cast<PngContext*>(png_get_error_ptr(png));
  std::snprintf(ctx->message, sizeof ctx->message, "%s", msg);
  png_longjmp(png, 1);
}

inline void png_on_warning(png_structp, png_const_charp) {}

inline void png_read_bytes(png_structp png, png_bytep dst, png_size_t len) {
  auto* ctx = static_cast<PngContext*>(png_get_io_ptr(png));
  if (ctx->input.size() - ctx->cursor < len) png_error(png, "unexpected end of PNG data");
  std::memcpy(dst, ctx->input.data() + ctx->cursor, len);
  ctx->cursor += len;
}

inline void png_write_bytes(png_structp png, png_bytep src, png_size_t len) {
  auto* ctx = static_cast<PngContext*>(png_get_io_ptr(png));
  ctx->output->insert(ctx->output->end(), src, src + len);
}

inline void png_flush_noop(png_structp) {}

inline Status png_decode(PngContext* ctx, Decoded* out, std::vector<png_bytep>* rows) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, ctx, png_on_error, png_on_warning);
  if (png == nullptr) return Status::Failed;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return Status::Failed;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return Status::Corrupt;
  }
  png_set_read_fn(png, ctx, png_read_bytes);
  png_read_info(png, info);
  const auto color_type = png_get_color_type(png, info);
  const auto bit_depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (bit_depth == 16) png_set_strip_16(png);
  if ((color_type & PNG_COLOR_MASK_ALPHA) != 0) png_set_strip_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  out->width = static_cast<int>(png_get_image_width(png, info));
  out->height = static_cast<int>(png_get_image_height(png, info));
  const std::size_t stride = png_get_rowbytes(png, info);
  if (stride != static_cast<std::size_t>(out->width) * 3) {
    std::snprintf(ctx->message, sizeof ctx->message, "unexpected PNG row layout");
    png_destroy_read_struct(&png, &info, nullptr);
    return Status::Unsupported;
  }
  out->rgb.resize(stride * static_cast<std::size_t>(out->height));
  rows->resize(static_cast<std::size_t>(out->height));
  for (int y = 0; y < out->height; ++y) (*rows)[y] = out->rgb.data() + stride * y;
  png_read_image(png, rows->data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return Status::Ok;
}

inline Status png_encode(PngContext* ctx, const RasterImage* img, std::vector<png_bytep>* rows) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, ctx, png_on_error, png_on_warning);
  if (png == nullptr) return Status::Failed;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return Status::Failed;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return Status::Failed;
  }
  png_set_write_fn(png, ctx, png_write_bytes, png_flush_noop);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img->width()),
               static_cast<png_uint_32>(img->height()), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(img->width()) * 3;
  auto* base = const_cast<std::uint8_t*>(img->data().data());
  rows->resize(static_cast<std::size_t>(img->height()));
  for (int y = 0; y < img->height(); ++y) (*rows)[y] = base + stride * y;
  png_write_image(png, rows->data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return Status::Ok;
}

// ---- TIFF ------------------------------------------------------------------

struct TiffMemory {
  std::span<const std::uint8_t> bytes;
  toff_t cursor = 0;
};

inline tsize_t tiff_read(thandle_t h, tdata_t dst, tsize_t n) {
  auto* m = static_cast<TiffMemory*>(h);
  if (m->cursor >= m->bytes.size()) return 0;
  const auto avail = static_cast<tsize_t>(m->bytes.size() - m->cursor);
  const auto take = n < avail ? n : avail;
  std::memcpy(dst, m->bytes.data() + m->cursor, static_cast<std::size_t>(take));
  m->cursor += static_cast<toff_t>(take);
  return take;
}
inline tsize_t tiff_write(thandle_t, tdata_t, tsize_t) { return 0; }
inline toff_t tiff_seek(thandle_t h, toff_t off, int whence) {
  auto* m = static_cast<TiffMemory*>(h);
  switch (whence) {
    case SEEK_SET: m->cursor = off; break;
    case SEEK_CUR: m->cursor += off; break;
    case SEEK_END: m->cursor = m->bytes.size() + off; break;
    default: return static_cast<toff_t>(-1);
  }
  return m->cursor;
}
inline int tiff_close(thandle_t) { return 0; }
inline toff_t tiff_size(thandle_t h) { return static_cast<TiffMemory*>(h)->bytes.size(); }
inline int tiff_map(thandle_t, tdata_t*, toff_t*) { return 0; }
inline void tiff_unmap(thandle_t, tdata_t, toff_t) {}

inline void silence_libtiff() {
  static std::once_flag once;
  std::call_once(once, [] {
    TIFFSetErrorHandler(nullptr);
    TIFFSetWarningHandler(nullptr);
  });
}

inline Decoded tiff_decode(std::span<const std::uint8_t> bytes) {
  silence_libtiff();
  TiffMemory mem{bytes};
  TIFF* tif = TIFFClientOpen("memory", "rm", &mem, tiff_read, tiff_write, tiff_seek, tiff_close,
                             tiff_size, tiff_map, tiff_unmap);
  require(tif != nullptr, ErrorCode::CorruptFile, "unreadable TIFF header");
  std::uint32_t w = 0, h = 0;
  TIFFGetField(tif, TIFFTAG_IMAGEWIDTH, &w);
  TIFFGetField(tif, TIFFTAG_IMAGELENGTH, &h);
  if (w == 0 || h == 0 || w > (1u << 15) || h > (1u << 15)) {
    TIFFClose(tif);
    throw Error(ErrorCode::CorruptFile, "TIFF has invalid dimensions");
  }
  char msg[1024] = {};
  if (TIFFRGBAImageOK(tif, msg) == 0) {
    TIFFClose(tif);
    throw Error(ErrorCode::UnsupportedFormat, std::string("TIFF variant not supported: ") + msg);
  }
  std::vector<std::uint32_t> abgr(static_cast<std::size_t>(w) * h);
  const int ok = TIFFReadRGBAImageOriented(tif, w, h, abgr.data(), ORIENTATION_TOPLEFT, 1);
  TIFFClose(tif);
  require(ok != 0, ErrorCode::CorruptFile, "TIFF pixel data could not be decoded");
  Decoded out{static_cast<int>(w), static_cast<int>(h), {}};
  out.rgb.resize(abgr.size() * 3);
  for (std::size_t i = 0; i < abgr.size(); ++i) {
    out.rgb[3 * i + 0] = static_cast<std::uint8_t>(TIFFGetR(abgr[i]));
    out.rgb[3 * i + 1] = static_cast<std::uint8_t>(TIFFGetG(abgr[i]));
    out.rgb[3 * i + 2] = static_cast<std::uint8_t>(TIFFGetB(abgr[i]));
  }
  return out;
}

// ---- BMP -------------------------------------------------------------------
// Uncompressed BI_RGB (1/4/8-bit paletted, 24, 32) and 32-bit BI_BITFIELDS
// with the standard 8-8-8 masks. RLE variants are rejected.

inline std::uint32_t le32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
         static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}
inline std::uint16_t le16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | b[at + 1] << 8);
}

inline Decoded bmp_decode(std::span<const std::uint8_t> b) {
  require(b.size() >= 54, ErrorCode::CorruptFile, "BMP header truncated");
  const std::uint32_t pixel_offset = le32(b, 10);
  const std::uint32_t dib_size = le32(b, 14);
  require(dib_size >= 40 && 14 + dib_size <= b.size(), ErrorCode::UnsupportedFormat,
          "only BITMAPINFOHEADER-family BMPs are supported");
  const auto width = static_cast<std::int32_t>(le32(b, 18));
  const auto raw_height = static_cast<std::int32_t>(le32(b, 22));
  const std::uint16_t bpp = le16(b, 28);
  const std::uint32_t compression = le32(b, 30);
  std::uint32_t colors_used = le32(b, 46);
  require(width > 0 && raw_height != 0 && width <= (1 << 15) && raw_height <= (1 << 15) &&
              raw_height >= -(1 << 15),
          ErrorCode::CorruptFile, "BMP has invalid dimensions");
  const bool top_down = raw_height < 0;
  const std::int32_t height = top_down ? -raw_height : raw_height;

  const bool bitfields = compression == 3 && bpp == 32;
  if (bitfields) {
    const std::size_t masks = dib_size >= 52 ? 14 + 40 : 14 + dib_size;
    require(masks + 12 <= b.size(), ErrorCode::CorruptFile, "BMP bitfield masks truncated");
    require(le32(b, masks) == 0x00FF0000u && le32(b, masks + 4) == 0x0000FF00u &&
                le32(b, masks + 8) == 0x000000FFu,
            ErrorCode::UnsupportedFormat, "BMP bitfield masks other than 8-8-8 are not supported");
  } else {
    require(compression == 0, ErrorCode::UnsupportedFormat, "compressed BMP is not supported");
  }
  require(bpp == 1 || bpp == 4 || bpp == 8 || bpp == 24 || bpp == 32, ErrorCode::UnsupportedFormat,
          "BMP bit depth " + std::to_string(bpp) + " is not supported");

  std::vector<std::uint8_t> palette;  // BGRA quads
  if (bpp <= 8) {
    if (colors_used == 0) colors_used = 1u << bpp;
    require(colors_used <= (1u << bpp), ErrorCode::CorruptFile, "BMP palette too large");
    const std::size_t at = 14 + dib_size;
    require(at + 4 * colors_used <= b.size(), ErrorCode::CorruptFile, "BMP palette truncated");
    palette.assign(b.begin() + static_cast<std::ptrdiff_t>(at),
                   b.begin() + static_cast<std::ptrdiff_t>(at + 4 * colors_used));
  }

  const std::size_t stride = ((static_cast<std::size_t>(width) * bpp + 31) / 32) * 4;
  require(pixel_offset <= b.size() && stride * static_cast<std::size_t>(height) <= b.size() - pixel_offset,
          ErrorCode::CorruptFile, "BMP pixel data truncated");

  Decoded out{width, height, {}};
  out.rgb.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  for (std::int32_t y = 0; y < height; ++y) {
    const std::int32_t src_row = top_down ? y : height - 1 - y;
    const std::uint8_t* row = b.data() + pixel_offset + stride * static_cast<std::size_t>(src_row);
    std::uint8_t* dst = out.rgb.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(width) * 3;
    for (std::int32_t x = 0; x < width; ++x, dst += 3) {
      if (bpp == 24 || bpp == 32) {
        const std::uint8_t* px = row + static_cast<std::size_t>(x) * (bpp / 8);
        dst[0] = px[2];
        dst[1] = px[1];
        dst[2] = px[0];
        continue;
      }
      const std::size_t bit = static_cast<std::size_t>(x) * bpp;
      const std::uint8_t byte = row[bit / 8];
      const unsigned shift = 8 - bpp - static_cast<unsigned>(bit % 8);
      const unsigned index = (byte >> shift) & ((1u << bpp) - 1);
      require(index < colors_used, ErrorCode::CorruptFile, "BMP palette index out of range");
      dst[0] = palette[4 * index + 2];
      dst[1] = palette[4 * index + 1];
      dst[2] = palette[4 * index + 0];
    }
  }
  return out;
}

}  // namespace detail

/// Decodes JPEG, PNG, TIFF or BMP into 8-bit RGB. Gray and paletted inputs
/// are expanded to three channels; alpha is dropped.
inline RasterImage decode_image(std::span<const std::uint8_t> bytes) {
  detail::Decoded decoded;
  switch (sniff_format(bytes)) {
    case ImageFormat::Jpeg: {
      detail::JpegErrorMgr jerr;
      const auto status = detail::jpeg_decode(bytes, &decoded, &jerr);
      if (status == detail::Status::Unsupported)
        throw Error(ErrorCode::UnsupportedFormat, jerr.message);
      if (status != detail::Status::Ok)
        throw Error(ErrorCode::CorruptFile, std::string("JPEG: ") + jerr.message);
      break;
    }
    case ImageFormat::Png: {
      detail::PngContext ctx{bytes};
      std::vector<png_bytep> rows;
      const auto status = detail::png_decode(&ctx, &decoded, &rows);
      if (status == detail::Status::Unsupported)
        throw Error(ErrorCode::UnsupportedFormat, ctx.message);
      if (status != detail::Status::Ok)
        throw Error(ErrorCode::CorruptFile, std::string("PNG: ") + ctx.message);
      break;
    }
    case ImageFormat::Tiff: decoded = detail::tiff_decode(bytes); break;
    case ImageFormat::Bmp: decoded = detail::bmp_decode(bytes); break;
    case ImageFormat::Unknown:
      throw Error(ErrorCode::UnsupportedFormat, "not a JPEG, PNG, TIFF or BMP stream");
  }
  return RasterImage(decoded.width, decoded.height, std::move(decoded.rgb));
}

inline std::vector<std::uint8_t> encode_jpeg(const RasterImage& img, QualityLevel quality) {
  require(!img.empty(), ErrorCode::InvalidArgument, "cannot encode an empty image");
  detail::JpegErrorMgr jerr;
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  const auto status = detail::jpeg_encode(&img, quality.value(), &buffer, &size, &jerr);
  std::vector<std::uint8_t> out;
  if (status == detail::Status::Ok) out.assign(buffer, buffer + size);
  std::free(buffer);
  if (status != detail::Status::Ok)
    throw Error(ErrorCode::EncodeFailure, std::string("JPEG: ") + jerr.message);
  return out;
}

/// Lossless, byte-deterministic PNG (8-bit RGB, zlib level 6, no ancillary chunks).
inline std::vector<std::uint8_t> encode_png(const RasterImage& img) {
  require(!img.empty(), ErrorCode::InvalidArgument, "cannot encode an empty image");
  std::vector<std::uint8_t> out;
  detail::PngContext ctx;
  ctx.output = &out;
  std::vector<png_bytep> rows;
  if (detail::png_encode(&ctx, &img, &rows) != detail::Status::Ok)
    throw Error(ErrorCode::EncodeFailure, std::string("PNG: ") + ctx.message);
  return out;
}

}  // namespace ela
