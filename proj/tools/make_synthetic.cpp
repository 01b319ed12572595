// Writes the synthetic plateau-flow dataset used by the acceptance suite.
#include <iostream>

#include <CLI11.hpp>

#include "ruleflow/csv.hpp"
#include "ruleflow/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic origin-destination flow dataset"};
  long rows = 20000;
  std::uint64_t seed = 1;
  std::string out;
  app.add_option("--rows", rows, "row count")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "generator seed");
  app.add_option("--out", out, "output CSV")->required();
  CLI11_PARSE(app, argc, argv);
  try {
    ruleflow::write_csv(out, ruleflow::make_synthetic(rows, seed), "pop_flows");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
