// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "config.hpp"
#include "lmtune/kernel_model.hpp"

namespace lmtune::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,     // bad flags or configuration
  kExitData = 2,      // unreadable, malformed or invalid input data
  kExitInternal = 3,  // violated internal invariant
};

// Whitespace-separated key=value pairs naming TemplateParams and LaunchConfig
// fields: pattern, n, m, stencil, radius, comp_ilb, comp_ep, coal_ilb,
// coal_ep, uncoal_ilb, uncoal_ep, in_h, in_w, out_h, out_w, grid_x, grid_y,
// wg_x, wg_y. Launch fields are required. Throws ParseError naming the key.
KernelInstance parse_instance_text(const std::string& text);

void cmd_gen(const RunConfig& config, bool emit_kernels, std::ostream& out, std::ostream& err);
void cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err);
void cmd_predict(const RunConfig& config, const std::string& instance_text, std::ostream& out);
void cmd_report(const RunConfig& config, std::ostream& out);

// Full command line (args[0] is the program name). Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const EnvLookup& env = process_env);

}  // namespace lmtune::cli
