#pragma once

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ganaug/error.hpp"
#include "ganaug/tensor.hpp"

namespace ganaug {

// 8-bit interleaved RGB raster.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3

  Image() = default;
  Image(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, 0) {}

  std::uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::IoError, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_file_bytes(const std::string& path, const std::uint8_t* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::IoError, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(size));
  require(out.good(), ErrorKind::IoError, "short write to " + path);
}

inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint32_t get_be32(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// PPM (P6, maxval 255): the bit-exact reference format

inline std::vector<std::uint8_t> encode_ppm(const Image& img) {
  std::string header =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

inline Image decode_ppm(const std::vector<std::uint8_t>& bytes) {
  require(bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6', ErrorKind::UnsupportedFormat,
          "not a P6 ppm");
  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {  // comment runs to end of line
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    require(pos < bytes.size() && std::isdigit(bytes[pos]), ErrorKind::CorruptFile,
            "ppm header truncated");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      require(v <= 1 << 24, ErrorKind::CorruptFile, "ppm header value out of range");
      ++pos;
    }
    return v;
  };
  long w = next_token();
  long h = next_token();
  long maxval = next_token();
  require(w >= 1 && h >= 1, ErrorKind::CorruptFile, "ppm with empty dimensions");
  require(maxval == 255, ErrorKind::UnsupportedFormat, "ppm maxval must be 255");
  require(pos < bytes.size() && std::isspace(bytes[pos]), ErrorKind::CorruptFile,
          "ppm header missing delimiter");
  ++pos;  // exactly one whitespace byte before the raster
  std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  require(bytes.size() - pos >= need, ErrorKind::CorruptFile, "ppm raster truncated");
  Image img(static_cast<int>(h), static_cast<int>(w));
  std::memcpy(img.pixels.data(), bytes.data() + pos, need);
  return img;
}

// ---------------------------------------------------------------------------
// PNG, restricted to 8-bit RGB (color type 2), no interlace

namespace detail {

inline void png_append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                             const std::uint8_t* data, std::size_t size) {
  put_be32(out, static_cast<std::uint32_t>(size));
  std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data, data + size);
  std::uint32_t crc = static_cast<std::uint32_t>(
      ::crc32(0, out.data() + start, static_cast<uInt>(4 + size)));
  put_be32(out, crc);
}

inline std::uint8_t paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
  if (pb <= pc) return static_cast<std::uint8_t>(b);
  return static_cast<std::uint8_t>(c);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_png(const Image& img) {
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  std::vector<std::uint8_t> out(sig, sig + 8);

  std::uint8_t ihdr[13];
  ihdr[0] = static_cast<std::uint8_t>(img.width >> 24);
  ihdr[1] = static_cast<std::uint8_t>(img.width >> 16);
  ihdr[2] = static_cast<std::uint8_t>(img.width >> 8);
  ihdr[3] = static_cast<std::uint8_t>(img.width);
  ihdr[4] = static_cast<std::uint8_t>(img.height >> 24);
  ihdr[5] = static_cast<std::uint8_t>(img.height >> 16);
  ihdr[6] = static_cast<std::uint8_t>(img.height >> 8);
  ihdr[7] = static_cast<std::uint8_t>(img.height);
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 2;   // color type: truecolor
  ihdr[10] = 0;  // compression
  ihdr[11] = 0;  // filter method
  ihdr[12] = 0;  // no interlace
  detail::png_append_chunk(out, "IHDR", ihdr, sizeof(ihdr));

  // raw scanlines, filter type 0 per row
  std::size_t stride = static_cast<std::size_t>(img.width) * 3;
  std::vector<std::uint8_t> raw((stride + 1) * static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    std::uint8_t* row = raw.data() + static_cast<std::size_t>(y) * (stride + 1);
    row[0] = 0;
    std::memcpy(row + 1, img.pixels.data() + static_cast<std::size_t>(y) * stride, stride);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> deflated(bound);
  int rc = compress2(deflated.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6);
  require(rc == Z_OK, ErrorKind::IoError, "png deflate failed");
  detail::png_append_chunk(out, "IDAT", deflated.data(), bound);
  detail::png_append_chunk(out, "IEND", nullptr, 0);
  return out;
}

inline Image decode_png(const std::vector<std::uint8_t>& bytes) {
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  require(bytes.size() >= 8 && std::memcmp(bytes.data(), sig, 8) == 0, ErrorKind::UnsupportedFormat,
          "not a png");
  std::size_t pos = 8;
  int width = 0, height = 0;
  bool seen_ihdr = false, seen_iend = false;
  std::vector<std::uint8_t> idat;
  while (pos + 12 <= bytes.size() && !seen_iend) {
    std::uint32_t len = detail::get_be32(bytes.data() + pos);
    require(pos + 12 + len <= bytes.size(), ErrorKind::CorruptFile, "png chunk truncated");
    const std::uint8_t* type = bytes.data() + pos + 4;
    const std::uint8_t* data = bytes.data() + pos + 8;
    std::uint32_t expect_crc = detail::get_be32(data + len);
    std::uint32_t got_crc =
        static_cast<std::uint32_t>(::crc32(0, type, static_cast<uInt>(4 + len)));
    require(expect_crc == got_crc, ErrorKind::CorruptFile, "png chunk crc mismatch");
    if (std::memcmp(type, "IHDR", 4) == 0) {
      require(len == 13, ErrorKind::CorruptFile, "png IHDR malformed");
      width = static_cast<int>(detail::get_be32(data));
      height = static_cast<int>(detail::get_be32(data + 4));
      require(width >= 1 && height >= 1, ErrorKind::CorruptFile, "png with empty dimensions");
      require(data[8] == 8 && data[9] == 2, ErrorKind::UnsupportedFormat,
              "png must be 8-bit RGB without alpha");
      require(data[12] == 0, ErrorKind::UnsupportedFormat, "interlaced png not supported");
      seen_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      require(seen_ihdr, ErrorKind::CorruptFile, "png IDAT before IHDR");
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      seen_iend = true;
    }
    pos += 12 + len;
  }
  require(seen_ihdr && seen_iend && !idat.empty(), ErrorKind::CorruptFile, "png missing chunks");

  std::size_t stride = static_cast<std::size_t>(width) * 3;
  std::vector<std::uint8_t> raw((stride + 1) * static_cast<std::size_t>(height));
  uLongf raw_len = static_cast<uLongf>(raw.size());
  int rc = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
  require(rc == Z_OK && raw_len == raw.size(), ErrorKind::CorruptFile, "png inflate failed");

  Image img(height, width);
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* row = raw.data() + static_cast<std::size_t>(y) * (stride + 1);
    std::uint8_t filter = row[0];
    const std::uint8_t* src = row + 1;
    std::uint8_t* dst = img.pixels.data() + static_cast<std::size_t>(y) * stride;
    const std::uint8_t* prev =
        y > 0 ? img.pixels.data() + static_cast<std::size_t>(y - 1) * stride : nullptr;
    for (std::size_t i = 0; i < stride; ++i) {
      int left = i >= 3 ? dst[i - 3] : 0;
      int up = prev ? prev[i] : 0;
      int up_left = (prev && i >= 3) ? prev[i - 3] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += left; break;
        case 2: v += up; break;
        case 3: v += (left + up) / 2; break;
        case 4: v += detail::paeth(left, up, up_left); break;
        default: raise(ErrorKind::CorruptFile, "png unknown filter type");
      }
      dst[i] = static_cast<std::uint8_t>(v & 0xFF);
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// file-level codecs (dispatch on magic bytes, not extension)

inline Image decode_image_bytes(const std::vector<std::uint8_t>& bytes) {
  require(!bytes.empty(), ErrorKind::CorruptFile, "empty image file");
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
  if (bytes.size() >= 4 && bytes[0] == 0x89 && bytes[1] == 'P') return decode_png(bytes);
  raise(ErrorKind::UnsupportedFormat, "unrecognized image format");
}

inline Image decode_image(const std::string& path) {
  return decode_image_bytes(detail::read_file_bytes(path));
}

// Container chosen by extension: .ppm or .png.
inline void encode_image(const Image& img, const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(c));
  std::vector<std::uint8_t> bytes;
  if (ext == ".ppm") {
    bytes = encode_ppm(img);
  } else if (ext == ".png") {
    bytes = encode_png(img);
  } else {
    raise(ErrorKind::UnsupportedFormat, "encode_image supports .ppm and .png, got " + path);
  }
  detail::write_file_bytes(path, bytes.data(), bytes.size());
}

// ---------------------------------------------------------------------------
// resize

// Half-pixel-centered bilinear resample, math in double, round half up.
inline Image resize_bilinear(const Image& src, int out_h, int out_w) {
  require(out_h >= 1 && out_w >= 1, ErrorKind::InvalidShape, "resize target must be >= 1");
  if (out_h == src.height && out_w == src.width) return src;
  Image dst(out_h, out_w);
  double sy = static_cast<double>(src.height) / out_h;
  double sx = static_cast<double>(src.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    if (fy < 0) fy = 0;
    if (fy > src.height - 1) fy = src.height - 1;
    int y0 = static_cast<int>(fy);
    int y1 = y0 + 1 < src.height ? y0 + 1 : y0;
    double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      if (fx < 0) fx = 0;
      if (fx > src.width - 1) fx = src.width - 1;
      int x0 = static_cast<int>(fx);
      int x1 = x0 + 1 < src.width ? x0 + 1 : x0;
      double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        double top = (1.0 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c);
        double bot = (1.0 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c);
        double v = (1.0 - wy) * top + wy * bot;
        double rounded = std::floor(v + 0.5);
        if (rounded < 0) rounded = 0;
        if (rounded > 255) rounded = 255;
        dst.at(y, x, c) = static_cast<std::uint8_t>(rounded);
      }
    }
  }
  return dst;
}

// ---------------------------------------------------------------------------
// normalization between 8-bit rasters and CHW float tensors

enum class NormMode {
  Gan,  // [0,255] -> [-1,1], the generator's tanh range
  Clf,  // [0,255] -> [0,1]
};

inline void normalize_into(const Image& img, NormMode mode, float* chw) {
  std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
  for (int c = 0; c < 3; ++c) {
    float* out = chw + static_cast<std::size_t>(c) * plane;
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        float v = static_cast<float>(img.at(y, x, c));
        out[static_cast<std::size_t>(y) * img.width + x] =
            mode == NormMode::Gan ? v / 127.5f - 1.0f : v / 255.0f;
      }
    }
  }
}

inline Tensor normalize(const Image& img, NormMode mode) {
  Tensor t({3, img.height, img.width});
  normalize_into(img, mode, t.raw());
  return t;
}

// [N,3,H,W] batch tensor from a uniform-size image list.
inline Tensor normalize_batch(const std::vector<Image>& images, NormMode mode) {
  require(!images.empty(), ErrorKind::EmptyDataset, "no images to normalize");
  int h = images[0].height, w = images[0].width;
  for (const auto& img : images)
    require(img.height == h && img.width == w, ErrorKind::DimensionMismatch,
            "normalize_batch requires uniform image sizes");
  Tensor t({static_cast<int>(images.size()), 3, h, w});
  std::size_t per = static_cast<std::size_t>(3) * h * w;
  for (std::size_t i = 0; i < images.size(); ++i)
    normalize_into(images[i], mode, t.raw() + i * per);
  return t;
}

// Inverse affine map, round half up, clamped to [0,255]. Exact inverse of
// normalize for every 8-bit value.
inline Image denormalize(const float* chw, int h, int w, NormMode mode) {
  Image img(h, w);
  std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < 3; ++c) {
    const float* in = chw + static_cast<std::size_t>(c) * plane;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double v = in[static_cast<std::size_t>(y) * w + x];
        double scaled = mode == NormMode::Gan ? (v + 1.0) * 127.5 : v * 255.0;
        double rounded = std::floor(scaled + 0.5);
        if (rounded < 0) rounded = 0;
        if (rounded > 255) rounded = 255;
        img.at(y, x, c) = static_cast<std::uint8_t>(rounded);
      }
    }
  }
  return img;
}

inline Image denormalize(const Tensor& chw, NormMode mode) {
  require(chw.rank() == 3 && chw.dim(0) == 3, ErrorKind::ShapeMismatch,
          "denormalize expects a [3,H,W] tensor");
  return denormalize(chw.raw(), chw.dim(1), chw.dim(2), mode);
}

}  // namespace ganaug
