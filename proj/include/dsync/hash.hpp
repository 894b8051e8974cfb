#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "dsync/bytes.hpp"

namespace dsync {

using Digest20 = std::array<uint8_t, 20>;  // SHA-1
using Digest32 = std::array<uint8_t, 32>;  // SHA-256

Digest20 sha1(std::string_view data);
Digest32 sha256(std::string_view data);

std::string hex(const Digest20& d);
std::string hex(const Digest32& d);

Digest20 digest20_from_hex(std::string_view h);
Digest20 digest20_from_raw(std::string_view raw20);
std::string raw(const Digest20& d);

}  // namespace dsync
