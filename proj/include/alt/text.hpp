/* Copyright 2026 The altkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Character inventory and lyric text normalization.
//
// Normalization rules, applied in order:
//   1. lines matching a drop pattern (default: asterisk-delimited stage
//      directions) are dropped with a reason code
//   2. curly quote variants map to the apostrophe; dash family, slash and
//      underscore map to space; other non-ASCII codepoints are discarded
//   3. ASCII letters uppercase
//   4. digit runs become words: values up to 9999 use the cardinal grammar
//      (no hyphens, no "AND"), longer runs are spelled digit by digit
//   5. remaining out-of-inventory characters are discarded
//   6. whitespace collapses to single spaces; empty results are dropped
//
// The result is idempotent and uses only inventory characters plus space.

#ifndef ALT_TEXT_HPP_
#define ALT_TEXT_HPP_

#include <cstdint>
#include <fstream>
#include <optional>
#include <regex>
#include <string>
#include <unordered_map>
#include <vector>

#include "alt/common.hpp"

namespace alt {

inline constexpr const char* kBlankSymbol = "<blank>";
inline constexpr const char* kBosSymbol = "<bos>";
inline constexpr const char* kEosSymbol = "<eos>";
inline constexpr const char* kWordBoundarySymbol = "<wb>";

// A token id sequence; the label view used by every loss and decoder.
using TokenSequence = std::vector<int>;

// Ordered character vocabulary. The default build has exactly 31 entries:
// blank, bos, eos, word boundary, apostrophe, and the 26 letters.
class TokenInventory {
 public:
  static TokenInventory default_inventory() {
    std::vector<std::string> syms = {kBlankSymbol, kBosSymbol, kEosSymbol, kWordBoundarySymbol,
                                     "'"};
    for (char c = 'A'; c <= 'Z'; ++c) syms.push_back(std::string(1, c));
    return from_symbols(std::move(syms));
  }

  // Builds an inventory from an explicit symbol list. Special ids are found
  // by symbol; blank is required, the rest are optional (tiny test
  // inventories omit them).
  static TokenInventory from_symbols(std::vector<std::string> syms) {
    TokenInventory inv;
    inv.symbols_ = std::move(syms);
    for (int i = 0; i < static_cast<int>(inv.symbols_.size()); ++i) {
      const std::string& s = inv.symbols_[i];
      if (inv.index_.count(s)) throw ConfigError("TokenInventory: duplicate symbol " + s);
      inv.index_.emplace(s, i);
    }
    auto find = [&](const char* s) {
      auto it = inv.index_.find(s);
      return it == inv.index_.end() ? -1 : it->second;
    };
    inv.blank_ = find(kBlankSymbol);
    inv.bos_ = find(kBosSymbol);
    inv.eos_ = find(kEosSymbol);
    inv.wb_ = find(kWordBoundarySymbol);
    inv.quote_ = find("'");
    if (inv.blank_ < 0) throw ConfigError("TokenInventory: blank symbol required");
    return inv;
  }

  int size() const { return static_cast<int>(symbols_.size()); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  const std::string& symbol(int id) const {
    if (id < 0 || id >= size()) throw InvalidId("symbol: id " + std::to_string(id));
    return symbols_[id];
  }

  int id_of(const std::string& sym) const {
    auto it = index_.find(sym);
    if (it == index_.end()) throw UnknownSymbol("id_of: symbol '" + sym + "'");
    return it->second;
  }

  bool has_symbol(const std::string& sym) const { return index_.count(sym) != 0; }

  int blank_id() const { return blank_; }
  int bos_id() const { return bos_; }
  int eos_id() const { return eos_; }
  int word_boundary_id() const { return wb_; }
  int quote_id() const { return quote_; }

  // bos falls back to eos when the inventory has no bos (sos = eos).
  int bos_or_eos() const {
    if (bos_ >= 0) return bos_;
    if (eos_ >= 0) return eos_;
    throw ConfigError("TokenInventory: neither bos nor eos present");
  }

  bool is_control(int id) const { return id == blank_ || id == bos_ || id == eos_; }

  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& s : symbols_) {
      h = fnv1a(s, h);
      h = fnv1a("\n", h);
    }
    return h;
  }

  // Plain text serialization: one symbol per line, line number = id.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("TokenInventory: cannot write " + path);
    for (const auto& s : symbols_) out << s << "\n";
  }

  static TokenInventory load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("TokenInventory: cannot read " + path);
    std::vector<std::string> syms;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) syms.push_back(line);
    }
    return from_symbols(std::move(syms));
  }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
  int blank_ = -1, bos_ = -1, eos_ = -1, wb_ = -1, quote_ = -1;
};

// ---------------------------------------------------------------------------
// Number grammar
// ---------------------------------------------------------------------------

namespace detail {

inline const char* kUnits[] = {"ZERO", "ONE", "TWO",   "THREE", "FOUR",
                               "FIVE", "SIX", "SEVEN", "EIGHT", "NINE"};
inline const char* kTeens[] = {"TEN",     "ELEVEN",  "TWELVE",    "THIRTEEN", "FOURTEEN",
                               "FIFTEEN", "SIXTEEN", "SEVENTEEN", "EIGHTEEN", "NINETEEN"};
inline const char* kTens[] = {"",      "",      "TWENTY",  "THIRTY", "FORTY",
                              "FIFTY", "SIXTY", "SEVENTY", "EIGHTY", "NINETY"};

inline void append_word(std::string& out, const std::string& w) {
  if (!out.empty()) out += ' ';
  out += w;
}

inline void words_below_hundred(std::string& out, int n) {
  if (n >= 20) {
    append_word(out, kTens[n / 10]);
    if (n % 10) append_word(out, kUnits[n % 10]);
  } else if (n >= 10) {
    append_word(out, kTeens[n - 10]);
  } else if (n > 0) {
    append_word(out, kUnits[n]);
  }
}

}  // namespace detail

// Cardinal words for 0..9999: "TWENTY ONE", "THREE HUNDRED FIVE",
// "NINE THOUSAND NINETY". No hyphens, no "AND".
inline std::string number_to_words(long n) {
  if (n < 0 || n > 9999) throw ConfigError("number_to_words: out of range");
  if (n == 0) return "ZERO";
  std::string out;
  if (n >= 1000) {
    detail::append_word(out, detail::kUnits[n / 1000]);
    detail::append_word(out, "THOUSAND");
    n %= 1000;
  }
  if (n >= 100) {
    detail::append_word(out, detail::kUnits[n / 100]);
    detail::append_word(out, "HUNDRED");
    n %= 100;
  }
  detail::words_below_hundred(out, static_cast<int>(n));
  return out;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

enum class DropReason { kNone, kPatternMatch, kEmptyAfterFilter };

inline const char* drop_reason_name(DropReason r) {
  switch (r) {
    case DropReason::kPatternMatch: return "pattern_match";
    case DropReason::kEmptyAfterFilter: return "empty_after_filter";
    default: return "none";
  }
}

struct NormalizeResult {
  std::optional<std::string> text;  // nullopt means DROPPED
  DropReason reason = DropReason::kNone;

  bool dropped() const { return !text.has_value(); }
};

struct NormalizeOptions {
  // Raw-line regexes whose match drops the line. The default covers
  // asterisk-delimited stage directions such as "**guitar solo**".
  std::vector<std::string> drop_patterns{R"(^\s*\*+[^*]*\*+\s*$)"};
};

namespace detail {

// Minimal UTF-8 decoding; malformed bytes yield U+FFFD and advance by one.
inline std::uint32_t utf8_next(const std::string& s, std::size_t& i) {
  unsigned char c = static_cast<unsigned char>(s[i]);
  if (c < 0x80) {
    ++i;
    return c;
  }
  int extra;
  std::uint32_t cp;
  if ((c >> 5) == 0x6) {
    extra = 1;
    cp = c & 0x1f;
  } else if ((c >> 4) == 0xe) {
    extra = 2;
    cp = c & 0x0f;
  } else if ((c >> 3) == 0x1e) {
    extra = 3;
    cp = c & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + extra >= s.size()) {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k <= extra; ++k) {
    unsigned char cc = static_cast<unsigned char>(s[i + k]);
    if ((cc >> 6) != 0x2) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (cc & 0x3f);
  }
  i += extra + 1;
  return cp;
}

inline bool is_quote_codepoint(std::uint32_t cp) {
  return cp == 0x2018 || cp == 0x2019 || cp == 0x201B || cp == 0x02BC || cp == 0x00B4 ||
         cp == 0x60;
}

inline bool is_dash_codepoint(std::uint32_t cp) {
  return cp == '-' || cp == '_' || cp == '/' || (cp >= 0x2010 && cp <= 0x2015);
}

}  // namespace detail

// Total function: any unicode line in, a normalized line or DROPPED out.
inline NormalizeResult normalize_line(const std::string& raw,
                                      const NormalizeOptions& opts = NormalizeOptions()) {
  for (const auto& pat : opts.drop_patterns) {
    if (std::regex_search(raw, std::regex(pat))) return {std::nullopt, DropReason::kPatternMatch};
  }
  // Fold to the ASCII working set.
  std::string ascii;
  ascii.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    std::uint32_t cp = detail::utf8_next(raw, i);
    if (detail::is_quote_codepoint(cp)) {
      ascii += '\'';
    } else if (detail::is_dash_codepoint(cp)) {
      ascii += ' ';
    } else if (cp == 0x00A0 || cp == '\t' || cp == '\r' || cp == '\n' || cp == '\v' ||
               cp == '\f') {
      ascii += ' ';
    } else if (cp < 0x80) {
      ascii += static_cast<char>(cp);
    }
    // other non-ASCII codepoints are out of vocabulary: discarded
  }
  // Uppercase, then expand digit runs.
  std::string expanded;
  expanded.reserve(ascii.size());
  for (std::size_t k = 0; k < ascii.size();) {
    char c = ascii[k];
    if (c >= '0' && c <= '9') {
      std::size_t end = k;
      while (end < ascii.size() && ascii[end] >= '0' && ascii[end] <= '9') ++end;
      std::string run = ascii.substr(k, end - k);
      expanded += ' ';
      if (run.size() <= 4) {
        expanded += number_to_words(std::stol(run));
      } else {
        for (std::size_t d = 0; d < run.size(); ++d) {
          if (d) expanded += ' ';
          expanded += detail::kUnits[run[d] - '0'];
        }
      }
      expanded += ' ';
      k = end;
    } else {
      if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
      expanded += c;
      ++k;
    }
  }
  // Keep inventory characters only, collapse whitespace.
  std::string out;
  out.reserve(expanded.size());
  for (char c : expanded) {
    if ((c >= 'A' && c <= 'Z') || c == '\'') {
      out += c;
    } else if (c == ' ') {
      if (!out.empty() && out.back() != ' ') out += ' ';
    }
    // everything else: out of vocabulary, discarded
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  if (out.empty()) return {std::nullopt, DropReason::kEmptyAfterFilter};
  return {out, DropReason::kNone};
}

// ---------------------------------------------------------------------------
// Encode / decode
// ---------------------------------------------------------------------------

// Maps a normalized line to token ids; spaces become the word boundary
// token. Never emits blank, bos or eos.
inline TokenSequence encode(const std::string& normalized, const TokenInventory& inv) {
  TokenSequence ids;
  ids.reserve(normalized.size());
  for (char c : normalized) {
    if (c == ' ') {
      if (inv.word_boundary_id() < 0)
        throw UnknownSymbol("encode: inventory has no word boundary token");
      ids.push_back(inv.word_boundary_id());
    } else {
      std::string s(1, c);
      if (!inv.has_symbol(s)) throw UnknownSymbol("encode: character '" + s + "' not in inventory");
      ids.push_back(inv.id_of(s));
    }
  }
  return ids;
}

// Inverse of encode on its image. Control ids (blank/bos/eos) are invalid.
inline std::string decode(const TokenSequence& ids, const TokenInventory& inv) {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= inv.size()) throw InvalidId("decode: id " + std::to_string(id));
    if (inv.is_control(id))
      throw InvalidId("decode: control token " + inv.symbol(id) + " in label sequence");
    if (id == inv.word_boundary_id()) {
      out += ' ';
    } else {
      out += inv.symbol(id);
    }
  }
  return out;
}

// Drops control ids; used on raw greedy/beam outputs before decode().
inline TokenSequence strip_controls(const TokenSequence& ids, const TokenInventory& inv) {
  TokenSequence out;
  out.reserve(ids.size());
  for (int id : ids)
    if (!inv.is_control(id)) out.push_back(id);
  return out;
}

}  // namespace alt

#endif  // ALT_TEXT_HPP_
