// Writes a folder of procedural color scenes for desk-scale training.

#include <iostream>

#include <CLI11.hpp>

#include "hintcolor/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate synthetic color scenes"};
  std::string out;
  int count = 2000;
  std::uint64_t seed = 0;
  hintcolor::SceneOptions opts;
  app.add_option("--out", out, "Output folder")->required();
  app.add_option("--count", count, "Number of images")->check(CLI::PositiveNumber);
  app.add_option("--size", opts.height, "Image side")->check(CLI::Range(16, 4096));
  app.add_option("--seed", seed, "Scene seed");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  opts.width = opts.height;
  try {
    hintcolor::write_synthetic_dataset(out, count, seed, opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cout << count << " images written to " << out << "\n";
  return 0;
}
