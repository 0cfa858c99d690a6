#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  using namespace twosample;
  cli::run_config cfg;
  try {
    cfg = cli::parse_config(argc, argv);
  } catch (const cli::help_requested& h) {
    std::cout << h.what();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return cli::execute(cfg, std::cerr);
}
