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

#include "data/checkpoint.hpp"

#include <cmath>
#include <cstdlib>
#include <vector>

#include <json.hpp>

#include "common/error.hpp"
#include "common/io.hpp"

namespace flatmeter {
namespace {

double ParseExact(const std::string& s) {
  // Subnormals legitimately set ERANGE, so only the parse extent and
  // finiteness are checked.
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  Require(!s.empty() && end == s.c_str() + s.size() && std::isfinite(v), Errc::kCorruptFile,
          "parameter '" + s + "' is not a number");
  return v;
}

}  // namespace

std::string SerializeCheckpoint(const MlpNetwork& net, const CheckpointMetadata& meta) {
  nlohmann::ordered_json j;
  j["version"] = kCheckpointVersion;
  j["shape"] = net.shape();
  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  for (double p : net.FlatParams()) params.push_back(FormatDouble(p));
  j["params"] = std::move(params);
  j["metadata"] = {{"seed", meta.seed}, {"config_hash", meta.config_hash}};
  return j.dump(1) + "\n";
}

Checkpoint ParseCheckpoint(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    Fail(Errc::kCorruptFile, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    Require(j.is_object() && j.contains("version"), Errc::kCorruptFile,
            "checkpoint has no version field");
    Require(j.at("version").is_number_integer() &&
                j.at("version").get<long long>() == kCheckpointVersion,
            Errc::kVersionMismatch, "unsupported checkpoint version " + j.at("version").dump());
    const auto shape = j.at("shape").get<std::vector<std::size_t>>();
    std::vector<double> params;
    for (const auto& p : j.at("params")) params.push_back(ParseExact(p.get<std::string>()));
    Require(shape.size() >= 2, Errc::kCorruptFile, "checkpoint shape is too short");
    for (std::size_t n : shape) Require(n >= 1, Errc::kCorruptFile, "zero-width layer");
    Checkpoint c;
    c.network = MlpNetwork::Zeros(shape);
    Require(params.size() == c.network.num_params(), Errc::kCorruptFile,
            "checkpoint parameter count does not match its shape");
    c.network.SetFlatParams(params);
    Require(c.network.AllFinite(), Errc::kCorruptFile, "checkpoint has non-finite parameters");
    const auto& meta = j.at("metadata");
    c.metadata.seed = meta.at("seed").get<std::uint64_t>();
    c.metadata.config_hash = meta.at("config_hash").get<std::string>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    Fail(Errc::kCorruptFile, std::string("malformed checkpoint: ") + e.what());
  }
}

void SaveCheckpoint(const std::string& path, const MlpNetwork& net,
                    const CheckpointMetadata& meta) {
  WriteFileAtomic(path, SerializeCheckpoint(net, meta));
}

Checkpoint LoadCheckpoint(const std::string& path) {
  if (!FileExists(path)) Fail(Errc::kMissingCheckpoint, "no checkpoint at '" + path + "'");
  return ParseCheckpoint(ReadFile(path));
}

}  // namespace flatmeter
