// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#pragma once

#include <atomic>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "kgvip/gateway.hpp"

namespace kgvip::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kGateway = 3 };

struct CliEnv {
  // Overrides the transport the gateway would otherwise pick.
  std::shared_ptr<Transport> transport;
  // Consulted for KGVIP_* variables; the process environment when unset.
  std::function<std::optional<std::string>(const std::string&)> getenv;
  // Set asynchronously (SIGINT) to stop evaluation after in-flight samples.
  const std::atomic<bool>* cancel = nullptr;
};

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const CliEnv& env = {});

}  // namespace kgvip::cli
