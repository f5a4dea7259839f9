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

// Checkpoint document (JSON):
//   {"version": 1, "shape": [n_0, ..., n_L],
//    "params": ["%.17g", ...],            // flat layout of MlpNetwork
//    "metadata": {"seed": s, "config_hash": "..."}}
// Seventeen significant digits make the decimal text round-trip exactly.

#ifndef FLATMETER_DATA_CHECKPOINT_HPP_
#define FLATMETER_DATA_CHECKPOINT_HPP_

#include <cstdint>
#include <string>

#include "net/mlp.hpp"

namespace flatmeter {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMetadata {
  std::uint64_t seed = 0;
  std::string config_hash;

  friend bool operator==(const CheckpointMetadata&, const CheckpointMetadata&) = default;
};

struct Checkpoint {
  MlpNetwork network;
  CheckpointMetadata metadata;
};

std::string SerializeCheckpoint(const MlpNetwork& net, const CheckpointMetadata& meta);

// Errors: VersionMismatch for an unknown version; CorruptFile for anything
// unparsable or inconsistent.
Checkpoint ParseCheckpoint(const std::string& text);

void SaveCheckpoint(const std::string& path, const MlpNetwork& net,
                    const CheckpointMetadata& meta);
Checkpoint LoadCheckpoint(const std::string& path);

}  // namespace flatmeter

#endif  // FLATMETER_DATA_CHECKPOINT_HPP_
