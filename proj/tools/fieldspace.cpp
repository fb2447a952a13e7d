#include <csignal>
#include <iostream>

#include "fieldspace/cli.hpp"

namespace {

void on_signal(int) { fieldspace::request_stop(); }

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  return fieldspace::run_cli(argc, argv, std::cout, std::cerr);
}
