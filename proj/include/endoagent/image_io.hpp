#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "endoagent/image.hpp"

namespace endoagent {

enum class RasterFormat { Png, Ppm };

/// Reads an 8-bit RGB PNG or binary PPM (P6). The format is sniffed from the
/// file's magic bytes, not its extension.
ImageBuf load_image(const std::filesystem::path& path);
/// Writes PPM when the extension is .ppm, PNG otherwise.
void save_image(const ImageBuf& img, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_image(const ImageBuf& img, RasterFormat format);
ImageBuf decode_image(std::span<const std::uint8_t> bytes);

/// round(v * 255) with halves rounded up.
std::uint8_t quantize(double v) noexcept;

/// Area-averaging resize; used for optional resize-on-ingest.
ImageBuf resize_area(const ImageBuf& img, int width, int height);

}  // namespace endoagent
