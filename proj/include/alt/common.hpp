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

#ifndef ALT_COMMON_HPP_
#define ALT_COMMON_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace alt {

// Floor for log-domain quantities. Anything at or below this is treated as
// log(0); keeps logsumexp total on finite inputs.
inline constexpr double kLogFloor = -1e30;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ALT_DEFINE_ERROR(NAME)          \
  class NAME : public ::alt::Error {    \
   public:                              \
    using ::alt::Error::Error;          \
  }

ALT_DEFINE_ERROR(ShapeMismatch);
ALT_DEFINE_ERROR(NonScalarRoot);
ALT_DEFINE_ERROR(UnknownSymbol);
ALT_DEFINE_ERROR(InvalidId);
ALT_DEFINE_ERROR(InputTooShort);
ALT_DEFINE_ERROR(LengthMismatch);
ALT_DEFINE_ERROR(DimensionMismatch);
ALT_DEFINE_ERROR(ZeroNormVector);
ALT_DEFINE_ERROR(NotEnoughFrames);
ALT_DEFINE_ERROR(InvalidExtension);
ALT_DEFINE_ERROR(StateMismatch);
ALT_DEFINE_ERROR(EmptyTarget);
ALT_DEFINE_ERROR(InvalidToken);
ALT_DEFINE_ERROR(EmptyCorpus);
ALT_DEFINE_ERROR(TargetTooLarge);
ALT_DEFINE_ERROR(AllUtterancesFiltered);
ALT_DEFINE_ERROR(CheckpointMismatch);
ALT_DEFINE_ERROR(ConfigError);
ALT_DEFINE_ERROR(IoError);

#undef ALT_DEFINE_ERROR

// FNV-1a, used for inventory/config/file fingerprints in run metadata and
// checkpoint sidecars.
inline std::uint64_t fnv1a(const void* bytes, std::size_t n,
                           std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s,
                           std::uint64_t seed = 0xcbf29ce484222325ull) {
  return fnv1a(s.data(), s.size(), seed);
}

inline std::uint64_t fnv1a(const char* s, std::uint64_t seed = 0xcbf29ce484222325ull) {
  return fnv1a(s, std::char_traits<char>::length(s), seed);
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace alt

#endif  // ALT_COMMON_HPP_
