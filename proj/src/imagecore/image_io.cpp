#include "endoagent/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "endoagent/error.hpp"

namespace endoagent {
namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::FileNotFound, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool is_png(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return bytes.size() >= 8 && std::equal(kMagic, kMagic + 8, bytes.begin());
}

bool is_ppm(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6';
}

ImageBuf from_bytes(int width, int height, const std::uint8_t* rgb) {
  std::vector<double> data(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = rgb[i] / 255.0;
  return ImageBuf(width, height, std::move(data));
}

std::vector<std::uint8_t> to_bytes(const ImageBuf& img) {
  std::vector<std::uint8_t> out(img.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = quantize(img.data()[i]);
  return out;
}

ImageBuf decode_png(std::span<const std::uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    const std::string why = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::CorruptData, "png header: " + why);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string why = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::CorruptData, "png body: " + why);
  }
  return from_bytes(static_cast<int>(image.width), static_cast<int>(image.height), buffer.data());
}

std::vector<std::uint8_t> encode_png(const ImageBuf& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  const auto pixels = to_bytes(img);
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::EncodingFailure, std::string("png sizing: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::EncodingFailure, std::string("png write: ") + image.message);
  }
  out.resize(size);
  return out;
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string ppm_token(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string token;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
    token += static_cast<char>(bytes[pos++]);
  }
  if (token.empty()) throw Error(ErrorCode::CorruptData, "truncated ppm header");
  return token;
}

int ppm_int(const std::string& token) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(token, &used);
  } catch (const std::exception&) {
    throw Error(ErrorCode::CorruptData, "bad ppm header field " + token);
  }
  if (used != token.size() || v <= 0) {
    throw Error(ErrorCode::CorruptData, "bad ppm header field " + token);
  }
  return v;
}

ImageBuf decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 2;
  const int width = ppm_int(ppm_token(bytes, pos));
  const int height = ppm_int(ppm_token(bytes, pos));
  const int maxval = ppm_int(ppm_token(bytes, pos));
  if (maxval != 255) throw Error(ErrorCode::UnsupportedFormat, "only 8-bit PPM is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw Error(ErrorCode::CorruptData, "truncated ppm header");
  }
  ++pos;
  const std::size_t need = static_cast<std::size_t>(width) * height * 3;
  if (bytes.size() - pos < need) throw Error(ErrorCode::CorruptData, "truncated ppm pixel data");
  return from_bytes(width, height, bytes.data() + pos);
}

std::vector<std::uint8_t> encode_ppm(const ImageBuf& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const auto pixels = to_bytes(img);
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

}  // namespace

std::uint8_t quantize(double v) noexcept {
  const double scaled = std::floor(v * 255.0 + 0.5);
  if (!(scaled > 0.0)) return 0;
  if (scaled >= 255.0) return 255;
  return static_cast<std::uint8_t>(scaled);
}

ImageBuf decode_image(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (is_ppm(bytes)) return decode_ppm(bytes);
  throw Error(ErrorCode::UnsupportedFormat, "unrecognized raster signature");
}

std::vector<std::uint8_t> encode_image(const ImageBuf& img, RasterFormat format) {
  return format == RasterFormat::Ppm ? encode_ppm(img) : encode_png(img);
}

ImageBuf load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_image(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void save_image(const ImageBuf& img, const std::filesystem::path& path) {
  const auto format = path.extension() == ".ppm" ? RasterFormat::Ppm : RasterFormat::Png;
  const auto bytes = encode_image(img, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

namespace {

// Row i of the result lists (source index, weight) pairs covering output
// sample i under area averaging.
std::vector<std::vector<std::pair<int, double>>> area_weights(int src, int dst) {
  std::vector<std::vector<std::pair<int, double>>> out(static_cast<std::size_t>(dst));
  const double scale = static_cast<double>(src) / dst;
  for (int i = 0; i < dst; ++i) {
    const double lo = i * scale;
    const double hi = (i + 1) * scale;
    for (int s = static_cast<int>(std::floor(lo)); s < static_cast<int>(std::ceil(hi)) && s < src;
         ++s) {
      const double overlap = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
      if (overlap > 0.0) out[static_cast<std::size_t>(i)].emplace_back(s, overlap / scale);
    }
  }
  return out;
}

}  // namespace

ImageBuf resize_area(const ImageBuf& img, int width, int height) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "resize to empty image");
  if (width == img.width() && height == img.height()) return img;
  const auto wx = area_weights(img.width(), width);
  const auto wy = area_weights(img.height(), height);
  std::vector<double> out(static_cast<std::size_t>(width) * height * 3, 0.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (auto [sy, wyv] : wy[static_cast<std::size_t>(y)]) {
          for (auto [sx, wxv] : wx[static_cast<std::size_t>(x)]) acc += wyv * wxv * img.at(sx, sy, c);
        }
        out[(static_cast<std::size_t>(y) * width + x) * 3 + c] = acc;
      }
    }
  }
  return ImageBuf::from_unclamped(width, height, std::move(out));
}

}  // namespace endoagent
