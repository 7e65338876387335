// PGM / PNG / BMP readers and writers. PNG goes through libpng; the other two
// formats are simple enough to handle directly.

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "figo/error.hpp"
#include "figo/image.hpp"

namespace figo {
namespace {

namespace fs = std::filesystem;

double luminance(double r, double g, double b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

std::string lower_ext(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

std::vector<unsigned char> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

FingerprintImage from_levels(int width, int height, std::vector<double> levels,
                             const fs::path& path) {
  if (width < kMinImageSide || height < kMinImageSide) {
    throw Error(ErrorCode::CorruptHeader,
                path.string() + ": image smaller than 16x16 is not supported");
  }
  for (double& v : levels) v = std::clamp(std::round(v), 0.0, 255.0);
  return FingerprintImage(width, height, RangeTag::RawU8, std::move(levels));
}

// ---- PGM ------------------------------------------------------------------

class PnmHeaderReader {
 public:
  explicit PnmHeaderReader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  long next_int(const fs::path& path) {
    skip_space_and_comments();
    long value = 0;
    bool any = false;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000) break;
      any = true;
      ++pos_;
    }
    if (!any) throw Error(ErrorCode::CorruptHeader, path.string() + ": malformed PGM header");
    return value;
  }

  std::size_t position() const noexcept { return pos_; }
  void advance(std::size_t n) noexcept { pos_ += n; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 2;
};

FingerprintImage load_pgm(const fs::path& path, const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2')) {
    throw Error(ErrorCode::CorruptHeader, path.string() + ": missing P5/P2 magic");
  }
  const bool binary = bytes[1] == '5';
  PnmHeaderReader reader(bytes);
  const long width = reader.next_int(path);
  const long height = reader.next_int(path);
  const long maxval = reader.next_int(path);
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    throw Error(ErrorCode::CorruptHeader, path.string() + ": invalid PGM dimensions");
  }
  const double scale = 255.0 / static_cast<double>(maxval);
  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<double> levels(count);
  if (binary) {
    reader.advance(1);  // single whitespace after maxval
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    const std::size_t start = reader.position();
    if (bytes.size() < start + count * bpp) {
      throw Error(ErrorCode::CorruptHeader, path.string() + ": truncated PGM raster");
    }
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t o = start + i * bpp;
      const unsigned v = bpp == 1 ? bytes[o] : (static_cast<unsigned>(bytes[o]) << 8) | bytes[o + 1];
      levels[i] = v * scale;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) levels[i] = reader.next_int(path) * scale;
  }
  return from_levels(static_cast<int>(width), static_cast<int>(height), std::move(levels), path);
}

void save_pgm(const FingerprintImage& img, const fs::path& path, std::string_view comment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "P5\n";
  while (!comment.empty()) {
    const auto nl = comment.find('\n');
    out << "# " << comment.substr(0, nl) << '\n';
    comment = nl == std::string_view::npos ? std::string_view{} : comment.substr(nl + 1);
  }
  out << img.width() << " " << img.height() << "\n255\n";
  for (double v : img.pixels()) out.put(static_cast<char>(static_cast<unsigned char>(v)));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

// ---- PNG ------------------------------------------------------------------

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FingerprintImage load_png(const fs::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw Error(ErrorCode::CorruptHeader, path.string() + ": bad PNG signature");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::IoError, "libpng allocation failed");
  }
  std::vector<unsigned char> raster;
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::CorruptHeader, path.string() + ": corrupt PNG stream");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  raster.resize(rowbytes * static_cast<std::size_t>(height));
  rows.resize(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[y] = raster.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::UnsupportedFormat, path.string() + ": unexpected PNG channel count");
  }
  std::vector<double> levels(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const unsigned char* row = rows[y];
    for (int x = 0; x < width; ++x) {
      levels[static_cast<std::size_t>(y) * width + x] =
          channels == 1 ? row[x]
                        : luminance(row[3 * x], row[3 * x + 1], row[3 * x + 2]);
    }
  }
  return from_levels(width, height, std::move(levels), path);
}

void save_png(const FingerprintImage& img, const fs::path& path) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "libpng allocation failed");
  }
  std::vector<unsigned char> raster(img.size());
  std::transform(img.pixels().begin(), img.pixels().end(), raster.begin(),
                 [](double v) { return static_cast<unsigned char>(v); });
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height()));
  for (int y = 0; y < img.height(); ++y) rows[y] = raster.data() + static_cast<std::size_t>(y) * img.width();
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "libpng write failed for " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, img.width(), img.height(), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// ---- BMP ------------------------------------------------------------------

std::uint32_t le32(const std::vector<unsigned char>& b, std::size_t o) {
  return b[o] | (b[o + 1] << 8) | (b[o + 2] << 16) | (static_cast<std::uint32_t>(b[o + 3]) << 24);
}
std::uint16_t le16(const std::vector<unsigned char>& b, std::size_t o) {
  return static_cast<std::uint16_t>(b[o] | (b[o + 1] << 8));
}

FingerprintImage load_bmp(const fs::path& path, const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 54 || bytes[0] != 'B' || bytes[1] != 'M') {
    throw Error(ErrorCode::CorruptHeader, path.string() + ": missing BM magic");
  }
  const std::uint32_t data_offset = le32(bytes, 10);
  const std::uint32_t dib_size = le32(bytes, 14);
  const auto width = static_cast<std::int32_t>(le32(bytes, 18));
  const auto raw_height = static_cast<std::int32_t>(le32(bytes, 22));
  const std::uint16_t bpp = le16(bytes, 28);
  const std::uint32_t compression = le32(bytes, 30);
  if (compression != 0) {
    throw Error(ErrorCode::UnsupportedFormat, path.string() + ": compressed BMP not supported");
  }
  if (bpp != 8 && bpp != 24 && bpp != 32) {
    throw Error(ErrorCode::UnsupportedFormat,
                path.string() + ": BMP bit depth " + std::to_string(bpp) + " not supported");
  }
  if (width <= 0 || raw_height == 0 || width > 100000 || std::abs(raw_height) > 100000) {
    throw Error(ErrorCode::CorruptHeader, path.string() + ": invalid BMP dimensions");
  }
  const bool top_down = raw_height < 0;
  const int height = std::abs(raw_height);

  std::array<double, 256> palette{};
  if (bpp == 8) {
    std::uint32_t colors = le32(bytes, 46);
    if (colors == 0) colors = 256;
    const std::size_t pal_start = 14 + dib_size;
    if (colors > 256 || bytes.size() < pal_start + colors * 4) {
      throw Error(ErrorCode::CorruptHeader, path.string() + ": truncated BMP palette");
    }
    for (std::uint32_t i = 0; i < colors; ++i) {
      const std::size_t o = pal_start + 4 * i;
      palette[i] = luminance(bytes[o + 2], bytes[o + 1], bytes[o]);
    }
  }
  const std::size_t stride = ((static_cast<std::size_t>(width) * bpp + 31) / 32) * 4;
  if (bytes.size() < data_offset + stride * height) {
    throw Error(ErrorCode::CorruptHeader, path.string() + ": truncated BMP raster");
  }
  std::vector<double> levels(static_cast<std::size_t>(width) * height);
  for (int row = 0; row < height; ++row) {
    const int y = top_down ? row : height - 1 - row;
    const std::size_t base = data_offset + stride * row;
    for (int x = 0; x < width; ++x) {
      double v;
      if (bpp == 8) {
        v = palette[bytes[base + x]];
      } else {
        const std::size_t o = base + static_cast<std::size_t>(x) * (bpp / 8);
        v = luminance(bytes[o + 2], bytes[o + 1], bytes[o]);
      }
      levels[static_cast<std::size_t>(y) * width + x] = v;
    }
  }
  return from_levels(width, height, std::move(levels), path);
}

void put32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
void put16(std::vector<unsigned char>& b, std::uint16_t v) {
  b.push_back(static_cast<unsigned char>(v));
  b.push_back(static_cast<unsigned char>(v >> 8));
}

void save_bmp(const FingerprintImage& img, const fs::path& path) {
  const std::uint32_t stride = ((static_cast<std::uint32_t>(img.width()) * 8 + 31) / 32) * 4;
  const std::uint32_t data_offset = 14 + 40 + 256 * 4;
  const std::uint32_t image_size = stride * static_cast<std::uint32_t>(img.height());
  std::vector<unsigned char> b;
  b.reserve(data_offset + image_size);
  b.push_back('B');
  b.push_back('M');
  put32(b, data_offset + image_size);
  put32(b, 0);
  put32(b, data_offset);
  put32(b, 40);
  put32(b, static_cast<std::uint32_t>(img.width()));
  put32(b, static_cast<std::uint32_t>(img.height()));
  put16(b, 1);
  put16(b, 8);
  put32(b, 0);
  put32(b, image_size);
  put32(b, 2835);
  put32(b, 2835);
  put32(b, 256);
  put32(b, 0);
  for (int i = 0; i < 256; ++i) {
    b.push_back(static_cast<unsigned char>(i));
    b.push_back(static_cast<unsigned char>(i));
    b.push_back(static_cast<unsigned char>(i));
    b.push_back(0);
  }
  for (int row = 0; row < img.height(); ++row) {
    const int y = img.height() - 1 - row;
    for (int x = 0; x < img.width(); ++x) b.push_back(static_cast<unsigned char>(img.at(x, y)));
    for (std::uint32_t pad = img.width(); pad < stride; ++pad) b.push_back(0);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace

FingerprintImage load_image(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorCode::FileNotFound, "no such file: " + path.string());
  }
  const std::string ext = lower_ext(path);
  if (ext == ".png") return load_png(path);
  if (ext == ".pgm" || ext == ".pnm") return load_pgm(path, read_all(path));
  if (ext == ".bmp") return load_bmp(path, read_all(path));
  throw Error(ErrorCode::UnsupportedFormat, "unsupported image extension '" + ext + "'");
}

void save_image(const FingerprintImage& img, const fs::path& path, std::string_view comment) {
  const FingerprintImage u8 = quantize_u8(img);
  const std::string ext = lower_ext(path);
  if (ext == ".pgm" || ext == ".pnm") return save_pgm(u8, path, comment);
  if (ext == ".png") return save_png(u8, path);
  if (ext == ".bmp") return save_bmp(u8, path);
  throw Error(ErrorCode::UnsupportedFormat, "unsupported image extension '" + ext + "'");
}

}  // namespace figo
