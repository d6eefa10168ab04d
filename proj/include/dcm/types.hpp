#pragma once

#include <cstdint>
#include <vector>

namespace dcm {

using SwitchId = std::uint32_t;
using HostId = std::uint32_t;
using Epoch = std::uint64_t;
using Path = std::vector<SwitchId>;

}  // namespace dcm
