#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cmlid::utf8 {

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Decodes UTF-8 into code points. Throws DecodeError on malformed input.
std::u32string decode(std::string_view text);

std::string encode(char32_t cp);
std::string encode(std::u32string_view cps);

// Simple case folding: ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic.
char32_t to_lower(char32_t cp);
std::string to_lower(std::string_view text);

}  // namespace cmlid::utf8
