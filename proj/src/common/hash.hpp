// Copyright 2026 The Flatmeter Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FLATMETER_COMMON_HASH_HPP_
#define FLATMETER_COMMON_HASH_HPP_

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "common/random.hpp"

namespace flatmeter {

// Content hash for identifiers (config hashes, spec ids); not cryptographic.
inline std::uint64_t HashBytes(std::string_view bytes) {
  std::uint64_t h = Mix64(bytes.size());
  for (unsigned char c : bytes) h = Mix64(h ^ c);
  return h;
}

inline std::string HexHash(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(HashBytes(bytes)));
  return buf;
}

}  // namespace flatmeter

#endif  // FLATMETER_COMMON_HASH_HPP_
