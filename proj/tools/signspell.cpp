#include <iostream>
#include <string>
#include <vector>

#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "signspell/cli.hpp"

int main(int argc, char** argv) {
  // Logs go to stderr so stdout carries only results; SPDLOG_LEVEL sets verbosity.
  spdlog::set_default_logger(spdlog::stderr_color_mt("signspell"));
  spdlog::cfg::load_env_levels();

  const std::vector<std::string> args(argv + 1, argv + argc);
  return signspell::cli::main(args, std::cout, std::cerr);
}
