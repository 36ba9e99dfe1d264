// Runs acceptance criteria 1-10 at desk scale and prints one line per
// criterion. Exit 0 iff all pass. Pass -v to list every check.

#include <cstring>
#include <iostream>

#include "phm/verify.hpp"

int main(int argc, char** argv) {
  using namespace phm::verify;
  VerifyOptions opt;
  opt.all_checks = argc > 1 && std::strcmp(argv[1], "-v") == 0;
  for (int i = 1; i <= 10; ++i) opt.only.push_back(std::to_string(i));
  try {
    return run_verify(VerifySettings{}, opt, std::cout) == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
