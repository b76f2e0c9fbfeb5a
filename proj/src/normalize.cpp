#include "muie/core.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

namespace muie {

namespace {

icu::UnicodeString nfc(const icu::UnicodeString& in) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU_ERROR", "NFC normalizer unavailable");
  icu::UnicodeString out = n->normalize(in, status);
  if (U_FAILURE(status)) throw Error("ICU_ERROR", "NFC normalization failed");
  return out;
}

icu::UnicodeString collapse_whitespace(const icu::UnicodeString& in) {
  icu::UnicodeString out;
  bool pending_space = false;
  for (int32_t i = 0; i < in.length();) {
    const UChar32 c = in.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.isEmpty()) out.append(UChar32(' '));
    pending_space = false;
    out.append(c);
  }
  return out;
}

}  // namespace

std::string normalize_mention(std::string_view raw) {
  icu::UnicodeString s = icu::UnicodeString::fromUTF8(
      icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  // Dropping whitespace can leave a new composable sequence at the string
  // start, so iterate to a fixed point (converges in one or two rounds).
  for (int round = 0; round < 4; ++round) {
    icu::UnicodeString next = collapse_whitespace(nfc(s));
    if (next == s) break;
    s = std::move(next);
  }
  std::string out;
  s.toUTF8String(out);
  return out;
}

std::string fold_case(std::string_view s) {
  icu::UnicodeString u =
      icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  u.foldCase();
  std::string out;
  u.toUTF8String(out);
  return out;
}

}  // namespace muie
