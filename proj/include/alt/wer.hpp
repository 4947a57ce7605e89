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

#ifndef ALT_WER_HPP_
#define ALT_WER_HPP_

#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "alt/common.hpp"

namespace alt {

// Word-level minimum-edit-distance breakdown at unit costs.
//
// Alignment tie-break is deterministic: substitution/match is preferred over
// deletion, which is preferred over insertion. With an empty reference the
// result is flagged and wer is reported against the hypothesis length
// (1.0 for any nonempty hypothesis, 0.0 when both sides are empty).
struct WerBreakdown {
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int ref_words = 0;
  double wer = 0.0;
  bool empty_reference = false;

  int errors() const { return substitutions + deletions + insertions; }
};

inline std::vector<std::string> split_words(const std::string& line) {
  std::vector<std::string> words;
  std::istringstream iss(line);
  std::string w;
  while (iss >> w) words.push_back(w);
  return words;
}

inline WerBreakdown wer(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  WerBreakdown out;
  out.ref_words = static_cast<int>(ref.size());
  const int n = static_cast<int>(ref.size());
  const int m = static_cast<int>(hyp.size());
  if (n == 0) {
    out.empty_reference = true;
    out.insertions = m;
    out.wer = m == 0 ? 0.0 : static_cast<double>(m) / static_cast<double>(m);
    return out;
  }
  // dp[i][j]: edit distance ref[0..i) -> hyp[0..j).
  std::vector<std::vector<int>> dp(n + 1, std::vector<int>(m + 1, 0));
  for (int i = 0; i <= n; ++i) dp[i][0] = i;
  for (int j = 0; j <= m; ++j) dp[0][j] = j;
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= m; ++j) {
      int sub = dp[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      int del = dp[i - 1][j] + 1;
      int ins = dp[i][j - 1] + 1;
      dp[i][j] = std::min(sub, std::min(del, ins));
    }
  }
  // Backtrace with the documented preference order.
  int i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        dp[i][j] == dp[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++out.substitutions;
      --i;
      --j;
    } else if (i > 0 && dp[i][j] == dp[i - 1][j] + 1) {
      ++out.deletions;
      --i;
    } else {
      ++out.insertions;
      --j;
    }
  }
  out.wer = static_cast<double>(out.errors()) / static_cast<double>(n);
  return out;
}

inline WerBreakdown wer(const std::string& ref_line, const std::string& hyp_line) {
  return wer(split_words(ref_line), split_words(hyp_line));
}

// Character error rate; debug metric behind the CLI's --cer flag.
inline WerBreakdown cer(const std::string& ref_line, const std::string& hyp_line) {
  std::vector<std::string> r, h;
  for (char c : ref_line) r.emplace_back(1, c);
  for (char c : hyp_line) h.emplace_back(1, c);
  return wer(r, h);
}

// Both aggregation conventions. The paper averages per-utterance WERs, so
// that value is primary; the pooled ratio is reported alongside because much
// of the literature uses it.
struct CorpusWer {
  double utterance_averaged = 0.0;
  double pooled = 0.0;
  int total_errors = 0;
  int total_ref_words = 0;
  std::vector<WerBreakdown> per_utterance;
};

inline CorpusWer corpus_wer(const std::vector<std::pair<std::string, std::string>>& ref_hyp) {
  if (ref_hyp.empty()) throw EmptyCorpus("corpus_wer: no pairs");
  CorpusWer out;
  double acc = 0.0;
  for (const auto& [r, h] : ref_hyp) {
    WerBreakdown b = wer(r, h);
    acc += b.wer;
    out.total_errors += b.errors();
    out.total_ref_words += b.ref_words;
    out.per_utterance.push_back(std::move(b));
  }
  out.utterance_averaged = acc / static_cast<double>(ref_hyp.size());
  out.pooled = out.total_ref_words > 0
                   ? static_cast<double>(out.total_errors) / out.total_ref_words
                   : (out.total_errors > 0 ? 1.0 : 0.0);
  return out;
}

}  // namespace alt

#endif  // ALT_WER_HPP_
