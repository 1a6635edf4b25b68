// Regenerates the shipped data files: BSIF filter banks under <data>/bsif
// and the standard SRM kernel bank.

#include <iostream>
#include <vector>

#include "CLI11.hpp"
#include "smad/error.hpp"
#include "smad/features/extractors.hpp"
#include "smad/util.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate BSIF filter banks"};
  std::filesystem::path out_dir = smad::data_dir() / "bsif";
  std::uint64_t seed = 20240611;
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  std::filesystem::path srm_out = smad::data_dir() / "srm_kernels.json";
  app.add_option("--seed", seed, "Texture seed")->capture_default_str();
  app.add_option("--srm-out", srm_out, "SRM kernel bank output")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  struct Spec {
    int size, lo, hi;
  };
  const std::vector<Spec> specs = {{3, 5, 8},  {5, 5, 12},  {7, 5, 12},  {9, 5, 12},
                                   {11, 5, 12}, {13, 5, 12}, {15, 5, 12}, {17, 5, 12}};
  try {
    smad::write_text_file(srm_out, smad::features::SrmKernelBank::standard().to_json());
    for (const auto& s : specs) {
      for (int bits = s.lo; bits <= s.hi; ++bits) {
        auto bank = smad::features::generate_bsif_bank(s.size, bits, seed);
        bank.validate();
        auto name = "bsif_" + std::to_string(s.size) + "x" + std::to_string(s.size) + "_" + std::to_string(bits) + "bit.json";
        smad::write_text_file(out_dir / name, bank.to_json());
        std::cout << name << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
