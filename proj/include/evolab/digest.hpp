// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace evolab {

/// SHA-256 of `bytes`, rendered as lowercase hex (64 chars).
std::string sha256_hex(std::string_view bytes);

/// CRC-32 of `bytes` (zlib polynomial), used for per-line log checksums.
uint32_t crc32_of(std::string_view bytes);

}  // namespace evolab
