#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace naudit::text {

// Lowercases and NFC-normalizes UTF-8 text. Typographic apostrophes are
// folded to ASCII '\''.
std::string normalize(std::string_view utf8);

// A maximal run of letters, digits and combining marks. Offsets are byte
// offsets into the source string; `norm` is the normalized form.
struct Token {
  std::string norm;
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::vector<Token> tokenize(std::string_view utf8);

// True when the bytes between two adjacent tokens may sit inside a single
// multi-word surface ("South Sudan", "Guinea-Bissau", "U.S.", "d'Ivoire").
bool joinable_gap(std::string_view gap);

// Normalized token key for a surface string: tokens joined by one space.
std::string surface_key(std::string_view utf8);

std::string trim(std::string_view s);

}  // namespace naudit::text

namespace naudit {

// Fixed-point rendering with a stable representation of zero ("0.000", never
// "-0.000").
std::string format_fixed(double v, int digits);

}  // namespace naudit
