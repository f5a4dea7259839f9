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

#include "common/error.hpp"

namespace flatmeter {

std::string_view ErrcName(Errc code) {
  switch (code) {
    case Errc::kInvalidArgument: return "InvalidArgument";
    case Errc::kDimensionMismatch: return "DimensionMismatch";
    case Errc::kNonFinite: return "NonFinite";
    case Errc::kNonFiniteOperator: return "NonFiniteOperator";
    case Errc::kNotSquare: return "NotSquare";
    case Errc::kDidNotConverge: return "DidNotConverge";
    case Errc::kMissingLayer: return "MissingLayer";
    case Errc::kInvalidSpec: return "InvalidSpec";
    case Errc::kShapeMismatch: return "ShapeMismatch";
    case Errc::kEmptyInterval: return "EmptyInterval";
    case Errc::kUnknownScheme: return "UnknownScheme";
    case Errc::kDiverged: return "Diverged";
    case Errc::kBadMagic: return "BadMagic";
    case Errc::kTruncatedFile: return "TruncatedFile";
    case Errc::kCountMismatch: return "CountMismatch";
    case Errc::kVersionMismatch: return "VersionMismatch";
    case Errc::kCorruptFile: return "CorruptFile";
    case Errc::kIoError: return "IoError";
    case Errc::kDegenerateVariance: return "DegenerateVariance";
    case Errc::kTooFewRuns: return "TooFewRuns";
    case Errc::kMissingCheckpoint: return "MissingCheckpoint";
    case Errc::kConfigError: return "ConfigError";
    case Errc::kTooLarge: return "TooLarge";
    case Errc::kPreconditionViolated: return "PreconditionViolated";
  }
  return "Unknown";
}

}  // namespace flatmeter
