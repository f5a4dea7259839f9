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

#ifndef FLATMETER_COMMON_ERROR_HPP_
#define FLATMETER_COMMON_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace flatmeter {

enum class Errc {
  kInvalidArgument,
  kDimensionMismatch,
  kNonFinite,
  kNonFiniteOperator,
  kNotSquare,
  kDidNotConverge,
  kMissingLayer,
  kInvalidSpec,
  kShapeMismatch,
  kEmptyInterval,
  kUnknownScheme,
  kDiverged,
  kBadMagic,
  kTruncatedFile,
  kCountMismatch,
  kVersionMismatch,
  kCorruptFile,
  kIoError,
  kDegenerateVariance,
  kTooFewRuns,
  kMissingCheckpoint,
  kConfigError,
  kTooLarge,
  kPreconditionViolated,
};

std::string_view ErrcName(Errc code);

// Every failure raised by the library carries one of the codes above; the C
// API maps them onto flm_status values.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(ErrcName(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void Fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

// Literal messages are only materialized on failure, so this is cheap in loops.
inline void Require(bool condition, Errc code, const char* message) {
  if (!condition) Fail(code, message);
}

inline void Require(bool condition, Errc code, const std::string& message) {
  if (!condition) Fail(code, message);
}

}  // namespace flatmeter

#endif  // FLATMETER_COMMON_ERROR_HPP_
