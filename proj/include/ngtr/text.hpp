#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

namespace ngtr {

inline std::string trim(std::string_view s) {
  auto is_ws = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  size_t b = 0, e = s.size();
  while (b < e && is_ws(s[b])) ++b;
  while (e > b && is_ws(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_ws = false;
  for (unsigned char c : s) {
    bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (ws) {
      in_ws = true;
    } else {
      if (in_ws && !out.empty()) out.push_back(' ');
      in_ws = false;
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

inline std::string nfc(std::string_view s) {
  UErrorCode ec = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(ec);
  if (U_FAILURE(ec) || norm == nullptr) return std::string(s);
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  icu::UnicodeString n = norm->normalize(u, ec);
  if (U_FAILURE(ec)) return std::string(s);
  std::string out;
  n.toUTF8String(out);
  return out;
}

struct TextNormalizeOptions {
  bool do_trim = true;
  bool do_collapse = true;
  bool do_nfc = true;
};

/// Normalizer applied before ACC / micro-F1 matching: trim, collapse
/// internal whitespace runs to a single space, NFC.
inline std::string normalize_text(std::string_view s, const TextNormalizeOptions& opt = {}) {
  std::string out(s);
  if (opt.do_collapse) out = collapse_whitespace(out);
  if (opt.do_trim) out = trim(out);
  if (opt.do_nfc) out = nfc(out);
  return out;
}

/// Decodes UTF-8 into codepoints; invalid bytes decode as one replacement
/// codepoint each so distances stay well-defined on garbage input.
inline std::vector<char32_t> utf8_codepoints(std::string_view s) {
  std::vector<char32_t> cps;
  cps.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    unsigned char c = s[i];
    char32_t cp = 0xFFFD;
    size_t len = 1;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6 && i + 1 < s.size()) {
      cp = ((c & 0x1F) << 6) | (s[i + 1] & 0x3F);
      len = 2;
    } else if ((c >> 4) == 0xE && i + 2 < s.size()) {
      cp = ((c & 0x0F) << 12) | ((s[i + 1] & 0x3F) << 6) | (s[i + 2] & 0x3F);
      len = 3;
    } else if ((c >> 3) == 0x1E && i + 3 < s.size()) {
      cp = ((c & 0x07) << 18) | ((s[i + 1] & 0x3F) << 12) | ((s[i + 2] & 0x3F) << 6) | (s[i + 3] & 0x3F);
      len = 4;
    }
    cps.push_back(cp);
    i += len;
  }
  return cps;
}

inline size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<char32_t> ca = utf8_codepoints(a);
  std::vector<char32_t> cb = utf8_codepoints(b);
  const size_t n = ca.size(), m = cb.size();
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<size_t> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = j;
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= m; ++j) {
      size_t sub = prev[j - 1] + (ca[i - 1] == cb[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

/// Levenshtein distance divided by the longer codepoint length; 0 for two
/// empty strings.
inline double normalized_levenshtein(std::string_view a, std::string_view b) {
  if (a.empty() && b.empty()) return 0.0;
  size_t la = utf8_codepoints(a).size();
  size_t lb = utf8_codepoints(b).size();
  size_t mx = std::max(la, lb);
  if (mx == 0) return 0.0;
  return static_cast<double>(levenshtein(a, b)) / static_cast<double>(mx);
}

}  // namespace ngtr
