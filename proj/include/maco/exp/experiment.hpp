/*
 * Copyright 2026 The maco-sim Authors
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


/**
 * @file experiment.hpp
 * @brief Experiment configuration (JSON), single runs, sweeps and the canned
 *        experiments.
 *
 * Every key has a default; a config file only lists what it changes. Unknown
 * keys are rejected so that a typo in a --set override fails loudly. The
 * schema is documented in docs/config.md.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "maco/machine.hpp"
#include "maco/stats/stats.hpp"
#include "maco/work/workloads.hpp"

namespace maco::exp {

using Json = nlohmann::json;

enum class Mode : std::uint8_t { Independent, Partitioned };

struct WorkloadConfig {
  Mode mode = Mode::Independent;
  std::uint32_t m = 256, n = 256, k = 256;
  Precision precision = Precision::FP64;
  std::uint32_t tr = 1024, tc = 1024;
  std::uint32_t ttr = 64, ttc = 64;
  bool accumulate = false;
  bool stash = false;
  bool lock = false;
  std::uint64_t post_flops = 0;
  std::uint32_t lookahead = 1;
  work::Assignment assignment = work::Assignment::RoundRobin;
  std::uint32_t block = 2;
  std::vector<work::DlLayerSpec> layers;  // when set, replaces m/n/k
  std::string program;                    // MPAIS assembly run on node 0
  std::vector<std::uint64_t> regions;     // bytes mapped before the program runs
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string out;
  bool check = true;
};

struct ExperimentConfig {
  MachineConfig machine;
  WorkloadConfig workload;
  RunConfig run;
  Json effective;  // defaults merged with the user's file and overrides
};

/// Full default configuration as JSON.
Json default_json();
/// Merge `user` over the defaults and decode. Throws ConfigError.
ExperimentConfig parse_config(const Json& user);
ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
/// Apply "dotted.key=value" to `j`. The value is parsed as JSON when it is
/// valid JSON, else taken as a string.
void apply_override(Json& j, const std::string& assignment);

struct RunResult {
  stats::RunStats stats;
  std::string config_json;
  bool checked = false;
  std::uint64_t gemms_checked = 0;
  std::uint64_t mismatches = 0;  // GEMMs whose C differs from the same-order oracle
  std::string first_mismatch;
  std::vector<mmae::TaskRecord> records;  // every node's, node-major
};

RunResult run_experiment(const ExperimentConfig& cfg);
void write_csv(const RunResult& r, const std::filesystem::path& path);

// --- sweeps -----------------------------------------------------------------

/// One axis: each value is a flat object of dotted keys applied together.
struct Axis {
  std::string name;
  std::vector<Json> values;
};

struct CannedExperiment {
  std::string name;
  std::string description;
  Json base;
  std::vector<Axis> axes;
};

const std::vector<CannedExperiment>& canned_experiments();
const CannedExperiment& find_experiment(const std::string& name);

/// "key=v1,v2,..." -> Axis over one key.
Axis parse_axis(const std::string& spec);

struct SweepEntry {
  std::size_t index = 0;
  Json overrides;
  std::string csv;
  std::string status;  // ok, config_error, mismatch, protocol_error, error
  std::string error;
  double efficiency = 0.0;
};

/// Cartesian product of the axes over `base`; one CSV per point written to
/// `out_dir`, plus manifest.json. Runs `jobs` instances in parallel. A failing
/// point is recorded and the sweep continues.
std::vector<SweepEntry> run_sweep(const Json& base, const std::vector<Axis>& axes,
                                  const std::filesystem::path& out_dir, unsigned jobs = 1);

}  // namespace maco::exp
