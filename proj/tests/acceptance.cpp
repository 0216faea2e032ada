// Runs every acceptance criterion and prints one line per criterion.

#include <iostream>

#include "rfcl/checks.hpp"

int main() {
  bool ok = true;
  for (const auto& r : rfcl::run_acceptance()) {
    std::cout << rfcl::format_check(r) << std::endl;
    ok = ok && r.pass;
  }
  return ok ? 0 : 1;
}
