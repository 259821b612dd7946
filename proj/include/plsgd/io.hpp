/*
 * Copyright 2026 The plsgd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Configuration documents, problem/dataset serialization and run manifests.
//
// A configuration is one JSON object with the top-level keys
//   problem     inline problem spec, or a path to a problem.json
//   schedule    single-run settings (plsgd run)
//   experiment  rate-study settings (plsgd rates); also supplies w0, C, caps
//   gradgap     gradient-gap study settings (plsgd gradgap)
// Unknown keys at any level are rejected with their dotted path.

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "plsgd/experiments.hpp"
#include "plsgd/gradgap.hpp"
#include "plsgd/problems.hpp"

namespace plsgd {

using Json = nlohmann::ordered_json;

struct SingleRunSettings {
  Arm arm = Arm::MultiPassT3;
  std::size_t n = 256;
  std::size_t seed_index = 0;
  std::uint64_t checkpoint_every = 0;  // 0: once per epoch
};

struct GapSettings {
  GapRecipe recipe;
  // Distance of the reference point from w*, along the experiment's w0 direction.
  double reference_offset = 1.0;
  std::vector<std::size_t> n_grid{250, 500, 1000, 2000, 4000};
  std::size_t seeds = 20;
  std::uint64_t master_seed = 0;
  double max_failed_fraction = 0.2;
};

struct Config {
  ProblemSpec problem;
  ExperimentConfig experiment;  // experiment.problem mirrors `problem`
  SingleRunSettings schedule;
  GapSettings gradgap;
  bool has_schedule = false;
  bool has_experiment = false;
  bool has_gradgap = false;
  // The document with any problem file inlined; this is what gets echoed.
  Json document;
};

// Throws ConfigError; parse errors carry line and column, schema errors the
// dotted field path. Relative problem paths resolve against the config's
// directory.
Config load_config(const std::filesystem::path& path);
Config parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");

// Full experiment validation (n_grid, seeds_per_cell, arms), fields prefixed.
void validate_experiment(const Config& config);

// Applies --seed / --cap-steps overrides to both the struct and the document.
void override_master_seed(Config& config, std::uint64_t seed);
void override_cap_steps(Config& config, std::uint64_t cap);

Json problem_to_json(const ProblemSpec& spec);
ProblemSpec problem_from_json(const Json& j, const std::string& path = "problem");

Json constants_to_json(const ProblemConstants& c);
Json schedule_to_json(const Schedule& s);

// Binary dump: "PLSGD1", d and n as little-endian u64, row-major f64 inputs,
// then the n labels.
void write_dataset_binary(std::ostream& out, const Dataset& data);
Dataset read_dataset_binary(std::istream& in);
std::uint64_t dataset_hash(const Dataset& data);  // FNV-1a over the dump bytes

std::string hex64(std::uint64_t v);

// Creates `dir`; refuses (ConfigError on "--out") when it exists and is not
// empty unless `force`.
void prepare_out_dir(const std::filesystem::path& dir, bool force);

class RunManifest {
 public:
  RunManifest(std::string command, std::uint64_t master_seed);

  // Hash of the echoed config bytes.
  void set_config(const std::string& echoed_bytes);
  void add_file(const std::filesystem::path& path);
  // Stamps the end time and writes manifest.json into `dir`.
  void write(const std::filesystem::path& dir) const;

 private:
  std::string command_;
  std::uint64_t master_seed_;
  std::string config_hash_;
  std::chrono::system_clock::time_point start_;
  std::chrono::steady_clock::time_point start_steady_;
  std::vector<std::filesystem::path> files_;
};

// Writes `text` to dir/name and registers it with the manifest.
void write_output(const std::filesystem::path& dir, const std::string& name,
                  const std::string& text, RunManifest& manifest);

}  // namespace plsgd
