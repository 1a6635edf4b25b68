#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace smad {

inline constexpr const char* kVersion = "1.0.0";

enum class Label { bonafide, morph };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

/// SplitMix64 finaliser, used to derive decorrelated seeds.
std::uint64_t mix_seed(std::uint64_t value);
std::uint64_t combine_seeds(std::uint64_t a, std::uint64_t b);
std::uint64_t hash_string(std::string_view text);

/// Portable random source. std::uniform_int_distribution and std::shuffle
/// are implementation defined, so everything that must be reproducible
/// across standard libraries goes through this class.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  /// Uniform real in [0, 1).
  double uniform();
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

std::vector<std::string> split(std::string_view text, char delimiter);
std::string trim(std::string_view text);
std::string to_lower(std::string_view text);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

/// Runs body(i) for i in [0, count) on up to hardware_concurrency threads.
/// The first exception thrown by any call is rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

/// Root of the shipped data files (filter banks, kernels). SMAD_DATA_DIR
/// overrides the compiled-in location.
std::filesystem::path data_dir();

}  // namespace smad
