#ifndef ADMIX_UTF8_HPP_
#define ADMIX_UTF8_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace admix {

// Decodes UTF-8 into codepoints. Invalid bytes decode as U+FFFD so that
// tokenization is total over arbitrary input.
std::vector<std::uint32_t> utf8_codepoints(std::string_view text);

std::string utf8_encode(std::uint32_t cp);

bool is_unicode_space(std::uint32_t cp);

// CJK ideographs, kana and hangul: scripts tokenized per codepoint.
bool is_cjk(std::uint32_t cp);

}  // namespace admix

#endif  // ADMIX_UTF8_HPP_
