#include <algorithm>
#include <iostream>
#include <string>
#include <vector>

#include "mmot/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  mmot::CliHooks hooks;
#ifdef MMOT_MUTANT_NONMONOTONE
  // Deliberately broken build: reverses the primal column so monotonicity fails.
  hooks.after_converge = [](mmot::ConvergenceTable& table) {
    std::vector<double> primal;
    for (const auto& row : table.rows) primal.push_back(row.primal);
    std::reverse(primal.begin(), primal.end());
    for (std::size_t i = 0; i < primal.size(); ++i) table.rows[i].primal = primal[i];
  };
#endif
  return mmot::run(args, std::cout, std::cerr, hooks);
}
