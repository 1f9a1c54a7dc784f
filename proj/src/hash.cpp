#include "admix/hash.hpp"

#include <array>
#include <cstdio>

namespace admix {

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return std::string(buf, 16);
}

std::string content_digest(std::initializer_list<std::string_view> parts) {
  // Two independent FNV streams over the same framed input give a 128-bit
  // digest that is stable across platforms. Each part is framed with its
  // length so {"ab", "c"} and {"a", "bc"} hash differently.
  std::uint64_t lo = kFnvOffset;
  std::uint64_t hi = 0x6c62272e07bb0142ULL;
  auto mix = [&](std::string_view data) {
    for (unsigned char c : data) {
      lo = (lo ^ c) * kFnvPrime;
      hi = (hi ^ c) * 0x100000001b3ULL;
      hi ^= hi >> 29;
    }
  };
  for (std::string_view part : parts) {
    std::array<unsigned char, 8> frame{};
    std::uint64_t n = part.size();
    for (int k = 0; k < 8; ++k) frame[k] = static_cast<unsigned char>(n >> (8 * k));
    mix(std::string_view(reinterpret_cast<const char*>(frame.data()), frame.size()));
    mix(part);
  }
  return to_hex(hi) + to_hex(lo);
}

}  // namespace admix
