// Copyright 2026 The fmapood Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line driver. Talks to the toolkit only through the C interface.

#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "fmapood/fmapood.h"

namespace {

struct Args {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> bank;
};

void add_common(CLI::App* cmd, Args& args, bool with_bank) {
  cmd->add_option("--config", args.config, "JSON configuration file")->required();
  cmd->add_option("--out", args.out, "Output directory (overrides the config)");
  cmd->add_option("--seed", args.seed, "Random seed (overrides the config)");
  cmd->add_option("--threads", args.threads, "Worker threads")->check(CLI::PositiveNumber);
  if (with_bank) cmd->add_option("--bank", args.bank, "Path of bank.json");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Post-hoc out-of-distribution scoring for one-stage detectors"};
  app.set_version_flag("--version", std::string(fmo_version()));
  app.require_subcommand(1);
  app.fallthrough();
  int verbosity = 1;
  app.add_flag("-q,--quiet", [&](std::int64_t) { verbosity = 0; }, "Only print warnings and errors");
  app.add_flag("-v,--verbose", [&](std::int64_t) { verbosity = 2; }, "Print debug output");

  Args args;
  CLI::App* fit = app.add_subcommand("fit", "Fit centroids and thresholds, write bank.json");
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a fitted bank over confidence thresholds");
  CLI::App* sweep = app.add_subcommand("sweep", "Run a configuration grid and extract the front");
  CLI::App* synth = app.add_subcommand("synth", "Generate synthetic datasets");
  add_common(fit, args, true);
  add_common(eval, args, true);
  add_common(sweep, args, false);
  add_common(synth, args, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  fmo_set_verbosity(verbosity);

  fmo_run_options opts{};
  if (args.out) opts.out_dir = args.out->c_str();
  if (args.seed) {
    opts.seed = *args.seed;
    opts.has_seed = 1;
  }
  if (args.threads) opts.threads = *args.threads;
  if (args.bank) opts.bank_path = args.bank->c_str();

  fmo_status status = FMO_OK;
  if (fit->parsed()) {
    status = fmo_cmd_fit(args.config.c_str(), &opts);
  } else if (eval->parsed()) {
    status = fmo_cmd_eval(args.config.c_str(), &opts);
  } else if (sweep->parsed()) {
    status = fmo_cmd_sweep(args.config.c_str(), &opts);
  } else if (synth->parsed()) {
    status = fmo_cmd_synth(args.config.c_str(), &opts);
  }
  if (status != FMO_OK) {
    std::fprintf(stderr, "fmapood: %s: %s\n", fmo_status_string(status), fmo_last_error());
  }
  return fmo_exit_code(status);
}
