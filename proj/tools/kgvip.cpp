// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#include <csignal>
#include <iostream>

#include "cli.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_sigint(int) { g_interrupted.store(true); }

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_sigint);
  std::vector<std::string> args(argv + 1, argv + argc);
  kgvip::cli::CliEnv env;
  env.cancel = &g_interrupted;
  return kgvip::cli::run_cli(args, std::cout, std::cerr, env);
}
