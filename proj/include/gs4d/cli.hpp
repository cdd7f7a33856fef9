// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gs4d/deform_field.hpp"
#include "gs4d/error.hpp"
#include "gs4d/rasterizer.hpp"
#include "gs4d/trainer.hpp"

namespace gs4d {

/// Every tunable the commands read, resolved from defaults, an optional
/// config file and --set overrides (in that order).
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  // Render knobs; only `render` uses them.
  int tile_size = 16;
  double low_pass = 0.3;
  double cull_sigma = 0.0;
  double alpha_cutoff = 1.0 / 255.0;
  Vec3 background = Vec3::Zero();

  void validate() const;
};

/// Keys accepted by the config file and --set, in canonical order.
std::vector<std::string> config_keys();

/// Throws Parameter on an unknown key or a value that does not parse.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

/// Canonical text form of one key's current value.
std::string get_config_value(const RunConfig& config, const std::string& key);

/// Flat `key = value` lines; `#` starts a comment.
void load_config_file(RunConfig& config, const std::filesystem::path& path);
std::string format_config_file(const RunConfig& config);

/// Parses arguments and runs one command. Returns the process exit code:
/// 0 success, 1 input error, 2 internal error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 1 for errors caused by inputs (files, flags, configs), 2 otherwise.
int exit_code_for(ErrorKind kind);

}  // namespace gs4d
