#include "narrative_audit/text.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <cstdio>
#include <stdexcept>

namespace naudit::text {
namespace {

const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || n == nullptr) {
    throw std::runtime_error("ICU NFC normalizer unavailable");
  }
  return *n;
}

bool is_word_char(UChar32 c) {
  if (u_isalnum(c)) return true;
  const auto type = u_charType(c);
  return type == U_NON_SPACING_MARK || type == U_COMBINING_SPACING_MARK ||
         type == U_ENCLOSING_MARK;
}

bool is_apostrophe(UChar32 c) { return c == 0x27 || c == 0x2019 || c == 0x02BC; }

}  // namespace

std::string normalize(std::string_view utf8) {
  icu::UnicodeString s = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  s.findAndReplace(icu::UnicodeString(static_cast<UChar32>(0x2019)),
                   icu::UnicodeString(static_cast<UChar32>(0x27)));
  s.findAndReplace(icu::UnicodeString(static_cast<UChar32>(0x02BC)),
                   icu::UnicodeString(static_cast<UChar32>(0x27)));
  s.toLower(icu::Locale::getRoot());
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfc().normalize(s, status);
  if (U_FAILURE(status)) out = s;
  std::string result;
  out.toUTF8String(result);
  return result;
}

std::vector<Token> tokenize(std::string_view utf8) {
  std::vector<Token> tokens;
  const auto* bytes = reinterpret_cast<const uint8_t*>(utf8.data());
  const int32_t length = static_cast<int32_t>(utf8.size());
  int32_t i = 0;
  int32_t start = -1;
  while (i < length) {
    const int32_t at = i;
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    const bool word = c >= 0 && is_word_char(c);
    if (word && start < 0) {
      start = at;
    } else if (!word && start >= 0) {
      tokens.push_back({normalize(utf8.substr(start, at - start)),
                        static_cast<std::size_t>(start), static_cast<std::size_t>(at)});
      start = -1;
    }
  }
  if (start >= 0) {
    tokens.push_back({normalize(utf8.substr(start)), static_cast<std::size_t>(start),
                      static_cast<std::size_t>(length)});
  }
  return tokens;
}

bool joinable_gap(std::string_view gap) {
  if (gap.empty()) return false;
  const auto* bytes = reinterpret_cast<const uint8_t*>(gap.data());
  const int32_t length = static_cast<int32_t>(gap.size());
  int32_t i = 0;
  int count = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    const bool ok = c == ' ' || c == '\t' || c == '-' || c == '.' || c == 0x2010 ||
                    c == 0x2011 || is_apostrophe(c);
    if (!ok) return false;
    if (++count > 3) return false;
  }
  return true;
}

std::string surface_key(std::string_view utf8) {
  std::string key;
  for (const auto& t : tokenize(utf8)) {
    if (!key.empty()) key.push_back(' ');
    key += t.norm;
  }
  return key;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace naudit::text

namespace naudit {

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s(buf);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

}  // namespace naudit
