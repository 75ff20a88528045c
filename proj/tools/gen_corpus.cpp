// SPDX-License-Identifier: Apache-2.0
// Emits a deterministic toy multi-intent corpus in the block format; handy
// for demos and smoke training runs.
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "ssran/synthetic.hpp"
#include "ssran/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthetic multi-intent corpus generator"};
  app.set_version_flag("--version", ssran::kVersion);
  std::string out_path;
  std::size_t count = 64;
  std::uint64_t seed = 0;
  double two_ratio = 0.6;
  app.add_option("--out", out_path, "Output file (stdout when omitted)");
  app.add_option("--count", count, "Number of utterances")->capture_default_str();
  app.add_option("--seed", seed, "RNG seed")->capture_default_str();
  app.add_option("--two-intent-ratio", two_ratio, "Fraction with two intents")
      ->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const auto text = ssran::render_corpus(ssran::synthetic_corpus(count, seed, two_ratio));
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
      std::cerr << "error: cannot write " << out_path << "\n";
      return 1;
    }
    out << text;
  }
  return 0;
}
