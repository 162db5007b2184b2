#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "nfr/types.hpp"

namespace nfr {

Digest sha256(std::span<const std::uint8_t> bytes);
Digest sha256(std::string_view bytes);

}  // namespace nfr
