/*
 * synrecon : synergistic PET/CT reconstruction with multibranch VAE priors
 *
 * Copyright 2026 The synrecon Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

#include "synrecon/config.hpp"
#include "synrecon/experiments.hpp"

namespace synrecon::commands {

/// One threshold check; a command exits 1 when any check fails.
struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Report {
  std::vector<Check> checks;
  std::vector<std::string> files;  // written artifacts, relative to the output directory
  bool ok() const;
};

Report make_data(const config::RunConfig& cfg);
Report train(const config::RunConfig& cfg);
Report generate(const config::RunConfig& cfg);
Report denoise(const config::RunConfig& cfg);
Report reconstruct(const config::RunConfig& cfg);
Report eval(const config::RunConfig& cfg);
Report mismatch(const config::RunConfig& cfg);
Report tune(const config::RunConfig& cfg);

const std::vector<std::string>& command_names();
Report run(const std::string& command, const config::RunConfig& cfg);

/// 2 = config/parameter, 3 = data (io, format, shape), 4 = numeric, 1 = anything else.
int exit_code(const std::exception& e);
/// Runs the command, prints the per-check report and returns the process exit code.
int execute(const std::string& command, const config::RunConfig& cfg, std::ostream& log);

/// PET/CT study parameters for the configured dose setting, as reconstruct uses them.
experiments::StudyConfig petct_study(const config::RunConfig& cfg);

/// Model file location: relative paths resolve against the output directory.
std::string model_path(const config::RunConfig& cfg);

}  // namespace synrecon::commands
