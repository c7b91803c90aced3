// One line per acceptance criterion; exit status 1 if any fails.
// Optional argument: a case id to restrict the run.

#include "attiq/acceptance.hpp"

#include <exception>
#include <iostream>

int main(int argc, char** argv) {
  attiq::AcceptanceOptions opt;
  opt.log = &std::cout;
  try {
    if (argc > 1) opt.only_case = attiq::parse_case_id(argv[1]);
    const auto results = attiq::run_acceptance(opt);
    int failed = 0;
    for (const auto& r : results) failed += !r.passed;
    std::cout << results.size() - failed << " of " << results.size() << " criteria passed\n";
    return failed ? 1 : 0;
  } catch (const std::exception& e) {
    std::cerr << "acceptance: " << e.what() << '\n';
    return 2;
  }
}
