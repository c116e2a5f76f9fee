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


// maco-sim: run, sweep and inspect simulator experiments.
//
// Exit codes: 0 ok, 1 other error, 2 configuration error (including lock
// capacity), 3 functional mismatch, 4 protocol violation.

#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "maco/error.hpp"
#include "maco/exp/experiment.hpp"
#include "maco/mem/memory.hpp"

namespace {

using maco::exp::Json;

void print_summary(const maco::exp::RunResult& r) {
  const auto& g = r.stats.global;
  std::cout << "tasks=" << g.tasks << " exceptions=" << g.exceptions << " efficiency=" << g.efficiency
            << " gflops=" << g.gflops << " wall_ns=" << r.stats.wall_seconds * 1e9 << "\n";
  if (r.checked) {
    std::cout << "check: " << r.gemms_checked - r.mismatches << "/" << r.gemms_checked << " GEMMs match\n";
  }
}

int cmd_run(const std::string& config, const std::string& out, const std::vector<std::string>& sets,
            std::optional<std::uint64_t> seed) {
  std::vector<std::string> overrides = sets;
  if (seed) overrides.push_back("run.seed=" + std::to_string(*seed));
  if (!out.empty()) overrides.push_back("run.out=\"" + out + "\"");
  const auto cfg = maco::exp::load_config(config, overrides);
  const auto r = maco::exp::run_experiment(cfg);
  if (!cfg.run.out.empty()) maco::exp::write_csv(r, cfg.run.out);
  else maco::stats::emit_csv(r.stats, r.config_json, std::cout);
  print_summary(r);
  if (r.mismatches != 0) {
    std::cerr << "functional mismatch: " << r.first_mismatch << "\n";
    return 3;
  }
  return 0;
}

int cmd_sweep(const std::string& experiment, const std::string& config, const std::string& out,
              const std::vector<std::string>& sets, const std::vector<std::string>& axes, unsigned jobs) {
  Json base = Json::object();
  std::vector<maco::exp::Axis> ax;
  if (!experiment.empty()) {
    const auto& e = maco::exp::find_experiment(experiment);
    base = e.base;
    ax = e.axes;
  }
  if (!config.empty()) {
    std::ifstream in(config);
    if (!in) throw maco::ConfigError("cannot open config file " + config);
    Json user = Json::parse(in, nullptr, false, true);
    if (user.is_discarded()) throw maco::ConfigError("config file " + config + " is not valid JSON");
    base.merge_patch(user);
  }
  for (const auto& s : sets) maco::exp::apply_override(base, s);
  for (const auto& a : axes) ax.push_back(maco::exp::parse_axis(a));
  // Validate the base before spending time on the points.
  (void)maco::exp::parse_config(base);
  const auto entries = maco::exp::run_sweep(base, ax, out, jobs);
  int rc = 0;
  for (const auto& e : entries) {
    std::cout << e.index << " " << e.overrides.dump() << " " << e.status << " efficiency=" << e.efficiency;
    if (!e.error.empty()) std::cout << " (" << e.error << ")";
    std::cout << "\n";
    if (e.status != "ok" && rc == 0) rc = 1;
  }
  std::cout << "manifest: " << (std::filesystem::path(out) / "manifest.json").string() << "\n";
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"maco-sim: multi-core matrix accelerator simulator"};
  app.require_subcommand(1);

  std::string config, out, experiment;
  std::vector<std::string> sets, axes;
  std::optional<std::uint64_t> seed;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());

  auto* run = app.add_subcommand("run", "run one configuration and emit its stats CSV");
  run->add_option("--config,-c", config, "JSON config file")->check(CLI::ExistingFile);
  run->add_option("--out,-o", out, "CSV output path (default: stdout)");
  run->add_option("--seed", seed, "RNG seed");
  run->add_option("--set", sets, "override, dotted.key=value (repeatable)");

  auto* sweep = app.add_subcommand("sweep", "run the cartesian product of axes");
  sweep->add_option("--experiment,-e", experiment, "canned experiment name");
  sweep->add_option("--config,-c", config, "JSON config file merged over the base")->check(CLI::ExistingFile);
  sweep->add_option("--out,-o", out, "output directory")->required();
  sweep->add_option("--set", sets, "override applied to the base (repeatable)");
  sweep->add_option("--axis", axes, "axis, key=v1,v2,... (repeatable)");
  sweep->add_option("--jobs,-j", jobs, "parallel runs");

  auto* list = app.add_subcommand("list-experiments", "list the canned experiments");
  auto* validate = app.add_subcommand("validate-config", "check a config and print the effective JSON");
  validate->add_option("--config,-c", config, "JSON config file")->check(CLI::ExistingFile);
  validate->add_option("--set", sets, "override, dotted.key=value (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, out, sets, seed);
    if (*sweep) return cmd_sweep(experiment, config, out, sets, axes, jobs);
    if (*list) {
      for (const auto& e : maco::exp::canned_experiments()) {
        std::cout << e.name << "\t" << e.description << "\n";
      }
      return 0;
    }
    if (*validate) {
      const auto cfg = maco::exp::load_config(config, sets);
      std::cout << cfg.effective.dump(2) << "\n";
      return 0;
    }
  } catch (const maco::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const maco::mem::LockCapacity& e) {
    std::cerr << "lock capacity exceeded: " << e.what() << "\n";
    return 2;
  } catch (const maco::ProtocolError& e) {
    std::cerr << "protocol violation: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
