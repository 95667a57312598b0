#pragma once

#include <cstdint>
#include <span>
#include <algorithm>

#include <zlib.h>

namespace fitbot::protocol {

/// CRC-32 (IEEE 802.3, reflected polynomial 0xEDB88320), as used by zlib/PNG.
inline std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large buffers in chunks.
    constexpr std::size_t kChunk = 1u << 30;
    for (std::size_t at = 0; at < bytes.size(); at += kChunk) {
        const std::size_t n = std::min(kChunk, bytes.size() - at);
        crc = ::crc32(crc, bytes.data() + at, static_cast<uInt>(n));
    }
    return static_cast<std::uint32_t>(crc);
}

} // namespace fitbot::protocol
