#pragma once

#include <cstdint>
#include <vector>

namespace forge {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

} // namespace forge
