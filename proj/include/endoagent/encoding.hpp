#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "endoagent/image.hpp"

namespace endoagent {

/// Standard Base64 (RFC 4648 alphabet, '=' padding, no line breaks).
std::string base64_encode(std::span<const std::uint8_t> bytes);
std::string base64_encode(std::string_view bytes);
/// Throws ParseError on characters outside the alphabet or bad padding.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Base64 of the image's PNG encoding. Throws EncodingFailure.
std::string encode_image_base64(const ImageBuf& img);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);
/// Digest of the dimensions and the exact double intensities; used for
/// provenance chains.
std::string image_hash(const ImageBuf& img);

}  // namespace endoagent
