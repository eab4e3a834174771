/*
 * Copyright (c) 2026 The Sparseflow Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sparseflow/train/trainer.hpp"

namespace sparseflow::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataFault = 2, kNumericFault = 3 };

/// Environment lookup; injectable for tests.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

inline constexpr const char* kEnvPrefix = "SPARSEFLOW_";
inline constexpr const char* kDefaultOut = "sparseflow_out";

/// Everything `train` needs. Keys are the model and training keys plus
/// graph, frames, manifest and out.
struct RunConfig {
  model::ModelConfig model;
  train::TrainConfig train;
  std::filesystem::path graph;
  std::filesystem::path frames;
  std::filesystem::path manifest;
  std::filesystem::path out = kDefaultOut;

  /// Resolved form; feeding it back through resolve_run_config reproduces
  /// this config exactly.
  std::map<std::string, std::string> to_key_values() const;
};

/// Every key accepted in config files, environment variables
/// (SPARSEFLOW_<KEY>, upper case) and --<key> flags.
std::vector<std::string> config_keys();

/// Layers defaults < file < environment < flags, then parses. Training
/// defaults follow the resolved task. Throws ConfigError on unknown keys,
/// malformed values or invalid combinations.
RunConfig resolve_run_config(const std::map<std::string, std::string>& file, const EnvLookup& env,
                             const std::map<std::string, std::string>& flags);

/// Reads a key=value config file; relative paths inside it are taken
/// relative to the file's directory.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

std::string format_key_values(const std::map<std::string, std::string>& kv);

/// Entry point behind the `sparseflow` binary. Commands: synth, train,
/// predict, eval, inspect. Returns an ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
        const EnvLookup& env = process_env());

}  // namespace sparseflow::cli
