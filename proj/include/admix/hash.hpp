#ifndef ADMIX_HASH_HPP_
#define ADMIX_HASH_HPP_

#include <cstdint>
#include <string>
#include <string_view>

namespace admix {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a64(std::string_view data,
                             std::uint64_t seed = kFnvOffset) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

// 128-bit content digest rendered as 32 hex chars. Stable across platforms;
// used for replay-fixture keys and prompt versioning, not for security.
std::string content_digest(std::initializer_list<std::string_view> parts);

std::string to_hex(std::uint64_t v);

}  // namespace admix

#endif  // ADMIX_HASH_HPP_
