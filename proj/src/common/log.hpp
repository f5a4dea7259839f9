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

// Progress messages on stderr. Results never go through here.

#ifndef FLATMETER_COMMON_LOG_HPP_
#define FLATMETER_COMMON_LOG_HPP_

#include <atomic>
#include <cstdarg>
#include <cstdio>

namespace flatmeter {

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };

inline std::atomic<int>& LogThreshold() {
  static std::atomic<int> level{static_cast<int>(LogLevel::kInfo)};
  return level;
}

inline void SetLogLevel(LogLevel level) { LogThreshold() = static_cast<int>(level); }

#if defined(__GNUC__)
__attribute__((format(printf, 2, 3)))
#endif
inline void Log(LogLevel level, const char* fmt, ...) {
  if (static_cast<int>(level) > LogThreshold().load()) return;
  char buf[1024];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  std::fprintf(stderr, "[flatmeter] %s\n", buf);  // one call: lines never interleave
}

}  // namespace flatmeter

#endif  // FLATMETER_COMMON_LOG_HPP_
