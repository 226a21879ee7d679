#include "fixedlens/image_io.hpp"

#include "fixedlens/errors.hpp"

#include <png.h>
#include <tiffio.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace fixedlens {
namespace {

// Decoded raster in the file's native integer layout.
struct RawRaster {
  int width = 0;
  int height = 0;
  int samples = 0;  // 1 gray, 2 gray+alpha, 3 RGB, 4 RGBA
  int bit_depth = 8;
  std::vector<std::uint16_t> data;  // row-major, interleaved
};

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

ImageBuffer to_image(const RawRaster& raw) {
  const bool alpha = raw.samples == 2 || raw.samples == 4;
  const int colour = alpha ? raw.samples - 1 : raw.samples;
  const double scale = raw.bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<Plane> planes(static_cast<std::size_t>(colour), Plane(raw.height, raw.width));
  Mask mask(raw.height, raw.width);
  std::size_t i = 0;
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      for (int c = 0; c < colour; ++c) planes[static_cast<std::size_t>(c)](y, x) = raw.data[i++] / scale;
      if (alpha) mask(y, x) = 2.0 * raw.data[i++] >= scale;
    }
  }
  ImageBuffer img = ImageBuffer::from_planes(std::move(planes));
  if (alpha) img.set_validity(std::move(mask));
  return img;
}

RawRaster from_image(const ImageBuffer& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw FormatError("bit depth must be 8 or 16");
  if (img.empty()) throw DimensionError("cannot save an empty image");
  RawRaster raw;
  raw.width = img.width();
  raw.height = img.height();
  raw.bit_depth = bit_depth;
  const bool alpha = img.has_validity();
  raw.samples = img.channels() + (alpha ? 1 : 0);
  const double scale = bit_depth == 16 ? 65535.0 : 255.0;
  raw.data.resize(static_cast<std::size_t>(raw.width) * raw.height * raw.samples);
  std::size_t i = 0;
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        const double v = std::clamp(img(x, y, c), 0.0, 1.0);
        raw.data[i++] = static_cast<std::uint16_t>(std::lround(v * scale));
      }
      if (alpha) raw.data[i++] = img.valid(x, y) ? static_cast<std::uint16_t>(scale) : 0;
    }
  }
  return raw;
}

// ---------------------------------------------------------------- PNG
//
// libpng reports errors by longjmp. The setjmp frames below hold only
// trivially destructible locals; buffers are owned by the callers.

struct PngContext {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  char message[256] = {};
};

void png_error_handler(png_structp png, png_const_charp msg) {
  auto* ctx = static_cast<PngContext*>(png_get_error_ptr(png));
  std::snprintf(ctx->message, sizeof(ctx->message), "%s", msg);
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

struct PngHeader {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int colour_type = 0;
  int channels = 0;
  std::size_t rowbytes = 0;
};

bool png_read_header(PngContext* ctx, PngHeader* hdr) {
  if (setjmp(png_jmpbuf(ctx->png))) return false;
  png_init_io(ctx->png, ctx->fp);
  png_read_info(ctx->png, ctx->info);
  hdr->width = png_get_image_width(ctx->png, ctx->info);
  hdr->height = png_get_image_height(ctx->png, ctx->info);
  hdr->bit_depth = png_get_bit_depth(ctx->png, ctx->info);
  hdr->colour_type = png_get_color_type(ctx->png, ctx->info);
  hdr->channels = png_get_channels(ctx->png, ctx->info);
  hdr->rowbytes = png_get_rowbytes(ctx->png, ctx->info);
  return true;
}

bool png_read_rows(PngContext* ctx, png_bytepp rows) {
  if (setjmp(png_jmpbuf(ctx->png))) return false;
  png_read_image(ctx->png, rows);
  png_read_end(ctx->png, nullptr);
  return true;
}

RawRaster read_png(const std::filesystem::path& path) {
  PngContext ctx;
  ctx.fp = std::fopen(path.c_str(), "rb");
  if (!ctx.fp) throw IoError("cannot open " + path.string());
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file_guard(ctx.fp, &std::fclose);

  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &ctx, png_error_handler, png_warning_handler);
  if (!ctx.png) throw IoError("libpng initialisation failed");
  ctx.info = png_create_info_struct(ctx.png);
  struct Destroy {
    PngContext* c;
    ~Destroy() { png_destroy_read_struct(&c->png, c->info ? &c->info : nullptr, nullptr); }
  } destroy{&ctx};
  if (!ctx.info) throw IoError("libpng initialisation failed");

  PngHeader hdr;
  if (!png_read_header(&ctx, &hdr)) throw IoError("cannot read " + path.string() + ": " + ctx.message);
  if (hdr.bit_depth != 8 && hdr.bit_depth != 16) {
    throw FormatError(path.string() + ": unsupported bit depth " + std::to_string(hdr.bit_depth));
  }
  if (hdr.colour_type & PNG_COLOR_MASK_PALETTE) {
    throw FormatError(path.string() + ": palette images are not supported");
  }

  std::vector<png_byte> buffer(hdr.rowbytes * hdr.height);
  std::vector<png_bytep> rows(hdr.height);
  for (png_uint_32 y = 0; y < hdr.height; ++y) rows[y] = buffer.data() + y * hdr.rowbytes;
  if (!png_read_rows(&ctx, rows.data())) throw IoError("cannot read " + path.string() + ": " + ctx.message);

  RawRaster raw;
  raw.width = static_cast<int>(hdr.width);
  raw.height = static_cast<int>(hdr.height);
  raw.samples = hdr.channels;
  raw.bit_depth = hdr.bit_depth;
  const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height * raw.samples;
  raw.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    raw.data[i] = hdr.bit_depth == 16 ? static_cast<std::uint16_t>((buffer[2 * i] << 8) | buffer[2 * i + 1])
                                      : buffer[i];
  }
  return raw;
}

bool png_write_all(PngContext* ctx, const PngHeader* hdr, png_bytepp rows) {
  if (setjmp(png_jmpbuf(ctx->png))) return false;
  png_init_io(ctx->png, ctx->fp);
  png_set_IHDR(ctx->png, ctx->info, hdr->width, hdr->height, hdr->bit_depth, hdr->colour_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx->png, ctx->info);
  png_write_image(ctx->png, rows);
  png_write_end(ctx->png, nullptr);
  return true;
}

void write_png(const RawRaster& raw, const std::filesystem::path& path) {
  PngContext ctx;
  ctx.fp = std::fopen(path.c_str(), "wb");
  if (!ctx.fp) throw IoError("cannot open " + path.string() + " for writing");
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file_guard(ctx.fp, &std::fclose);

  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &ctx, png_error_handler, png_warning_handler);
  if (!ctx.png) throw IoError("libpng initialisation failed");
  ctx.info = png_create_info_struct(ctx.png);
  struct Destroy {
    PngContext* c;
    ~Destroy() { png_destroy_write_struct(&c->png, c->info ? &c->info : nullptr); }
  } destroy{&ctx};
  if (!ctx.info) throw IoError("libpng initialisation failed");

  static constexpr std::array<int, 5> kColourTypes = {0, PNG_COLOR_TYPE_GRAY, PNG_COLOR_TYPE_GRAY_ALPHA,
                                                      PNG_COLOR_TYPE_RGB, PNG_COLOR_TYPE_RGB_ALPHA};
  PngHeader hdr;
  hdr.width = static_cast<png_uint_32>(raw.width);
  hdr.height = static_cast<png_uint_32>(raw.height);
  hdr.bit_depth = raw.bit_depth;
  hdr.colour_type = kColourTypes[static_cast<std::size_t>(raw.samples)];
  hdr.rowbytes = static_cast<std::size_t>(raw.width) * raw.samples * (raw.bit_depth / 8);

  std::vector<png_byte> buffer(hdr.rowbytes * hdr.height);
  for (std::size_t i = 0; i < raw.data.size(); ++i) {
    if (raw.bit_depth == 16) {
      buffer[2 * i] = static_cast<png_byte>(raw.data[i] >> 8);
      buffer[2 * i + 1] = static_cast<png_byte>(raw.data[i] & 0xff);
    } else {
      buffer[i] = static_cast<png_byte>(raw.data[i]);
    }
  }
  std::vector<png_bytep> rows(hdr.height);
  for (png_uint_32 y = 0; y < hdr.height; ++y) rows[y] = buffer.data() + y * hdr.rowbytes;
  if (!png_write_all(&ctx, &hdr, rows.data())) throw IoError("cannot write " + path.string() + ": " + ctx.message);
  file_guard.reset();
}

// ---------------------------------------------------------------- TIFF

thread_local std::string tiff_last_error;

void tiff_error_handler(const char* module, const char* fmt, va_list ap) {
  char buf[512];
  std::vsnprintf(buf, sizeof(buf), fmt, ap);
  tiff_last_error = std::string(module ? module : "tiff") + ": " + buf;
}

void install_tiff_handlers() {
  static const bool installed = [] {
    TIFFSetErrorHandler(tiff_error_handler);
    TIFFSetWarningHandler(nullptr);
    return true;
  }();
  (void)installed;
}

using TiffPtr = std::unique_ptr<TIFF, void (*)(TIFF*)>;

RawRaster read_tiff(const std::filesystem::path& path) {
  install_tiff_handlers();
  tiff_last_error.clear();
  TiffPtr tif(TIFFOpen(path.c_str(), "r"), &TIFFClose);
  if (!tif) throw IoError("cannot open " + path.string() + ": " + tiff_last_error);

  std::uint32_t width = 0, height = 0;
  std::uint16_t bits = 0, spp = 1, planar = PLANARCONFIG_CONTIG, photometric = PHOTOMETRIC_MINISBLACK;
  std::uint16_t sample_format = SAMPLEFORMAT_UINT;
  if (!TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &width) || !TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &height)) {
    throw IoError(path.string() + ": missing image dimensions");
  }
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bits);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_PLANARCONFIG, &planar);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLEFORMAT, &sample_format);
  TIFFGetField(tif.get(), TIFFTAG_PHOTOMETRIC, &photometric);

  if (bits != 8 && bits != 16) throw FormatError(path.string() + ": unsupported bit depth " + std::to_string(bits));
  if (sample_format != SAMPLEFORMAT_UINT) throw FormatError(path.string() + ": only unsigned integer samples");
  if (planar != PLANARCONFIG_CONTIG) throw FormatError(path.string() + ": planar-separate TIFF not supported");
  if (spp < 1 || spp > 4) throw FormatError(path.string() + ": unsupported samples per pixel");
  const bool gray = spp <= 2;
  if (gray && photometric != PHOTOMETRIC_MINISBLACK) throw FormatError(path.string() + ": unsupported photometric");
  if (!gray && photometric != PHOTOMETRIC_RGB) throw FormatError(path.string() + ": unsupported photometric");

  RawRaster raw;
  raw.width = static_cast<int>(width);
  raw.height = static_cast<int>(height);
  raw.samples = spp;
  raw.bit_depth = bits;
  const std::size_t row_samples = static_cast<std::size_t>(width) * spp;
  raw.data.resize(row_samples * height);
  std::vector<unsigned char> line(static_cast<std::size_t>(TIFFScanlineSize(tif.get())));
  for (std::uint32_t y = 0; y < height; ++y) {
    if (TIFFReadScanline(tif.get(), line.data(), y, 0) < 0) {
      throw IoError("cannot read " + path.string() + ": " + tiff_last_error);
    }
    for (std::size_t i = 0; i < row_samples; ++i) {
      std::uint16_t v;
      if (bits == 16) {
        std::memcpy(&v, line.data() + 2 * i, 2);
      } else {
        v = line[i];
      }
      raw.data[y * row_samples + i] = v;
    }
  }
  return raw;
}

void write_tiff(const RawRaster& raw, const std::filesystem::path& path) {
  install_tiff_handlers();
  tiff_last_error.clear();
  TiffPtr tif(TIFFOpen(path.c_str(), "w"), &TIFFClose);
  if (!tif) throw IoError("cannot open " + path.string() + " for writing: " + tiff_last_error);

  const bool alpha = raw.samples == 2 || raw.samples == 4;
  TIFFSetField(tif.get(), TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(raw.width));
  TIFFSetField(tif.get(), TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(raw.height));
  TIFFSetField(tif.get(), TIFFTAG_BITSPERSAMPLE, static_cast<std::uint16_t>(raw.bit_depth));
  TIFFSetField(tif.get(), TIFFTAG_SAMPLESPERPIXEL, static_cast<std::uint16_t>(raw.samples));
  TIFFSetField(tif.get(), TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
  TIFFSetField(tif.get(), TIFFTAG_PHOTOMETRIC, raw.samples <= 2 ? PHOTOMETRIC_MINISBLACK : PHOTOMETRIC_RGB);
  TIFFSetField(tif.get(), TIFFTAG_COMPRESSION, COMPRESSION_NONE);
  TIFFSetField(tif.get(), TIFFTAG_ROWSPERSTRIP, static_cast<std::uint32_t>(raw.height));
  if (alpha) {
    std::uint16_t extra = EXTRASAMPLE_UNASSALPHA;
    TIFFSetField(tif.get(), TIFFTAG_EXTRASAMPLES, 1, &extra);
  }
  const std::size_t row_samples = static_cast<std::size_t>(raw.width) * raw.samples;
  std::vector<unsigned char> line(row_samples * (raw.bit_depth / 8));
  for (int y = 0; y < raw.height; ++y) {
    for (std::size_t i = 0; i < row_samples; ++i) {
      const std::uint16_t v = raw.data[static_cast<std::size_t>(y) * row_samples + i];
      if (raw.bit_depth == 16) {
        std::memcpy(line.data() + 2 * i, &v, 2);
      } else {
        line[i] = static_cast<unsigned char>(v);
      }
    }
    if (TIFFWriteScanline(tif.get(), line.data(), static_cast<std::uint32_t>(y), 0) < 0) {
      throw IoError("cannot write " + path.string() + ": " + tiff_last_error);
    }
  }
}

enum class Container { Png, Tiff };

Container sniff(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<unsigned char, 8> magic{};
  in.read(reinterpret_cast<char*>(magic.data()), magic.size());
  const auto got = in.gcount();
  static constexpr std::array<unsigned char, 8> kPng = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (got == 8 && magic == kPng) return Container::Png;
  if (got >= 4 && ((magic[0] == 'I' && magic[1] == 'I' && magic[2] == 42 && magic[3] == 0) ||
                   (magic[0] == 'M' && magic[1] == 'M' && magic[2] == 0 && magic[3] == 42))) {
    return Container::Tiff;
  }
  if (got < 8) throw IoError(path.string() + ": file truncated");
  throw FormatError(path.string() + ": not a PNG or TIFF file");
}

}  // namespace

ImageBuffer load_image(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("no such file: " + path.string());
  const RawRaster raw = sniff(path) == Container::Png ? read_png(path) : read_tiff(path);
  return to_image(raw);
}

void save_image(const ImageBuffer& img, const std::filesystem::path& path, int bit_depth) {
  const std::string ext = lower_extension(path);
  const RawRaster raw = from_image(img, bit_depth);
  if (ext == ".png") {
    write_png(raw, path);
  } else if (ext == ".tif" || ext == ".tiff") {
    write_tiff(raw, path);
  } else {
    throw FormatError("unsupported output extension '" + ext + "' (use .png, .tif or .tiff)");
  }
}

}  // namespace fixedlens
