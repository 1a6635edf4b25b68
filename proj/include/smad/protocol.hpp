#pragma once

// Leave-one-morph-tool-out experiment driver.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "smad/dataset.hpp"
#include "smad/features/extract.hpp"
#include "smad/forest.hpp"
#include "smad/metrics.hpp"

namespace smad::protocol {

using features::Method;

struct Round {
  std::string held_out;
  std::vector<std::string> train_tools;
  /// Evaluated one by one. A tool that is also trained on contributes its
  /// held-back split portion; any other tool contributes all of its morphs.
  std::vector<std::string> test_sets;
};

struct LooPlan {
  std::vector<Round> rounds;
  std::vector<Method> features;
  double split_ratio = 0.7;
  std::uint64_t seed = 1;
  forest::ForestParams forest;

  void validate() const;
};

/// One round per morph tool present: the tool is held out of training,
/// training uses every other tool plus all bona fide, and each of the other
/// tools is a separate test set. All fourteen methods.
LooPlan build_default_plan(const dataset::DatasetManifest& manifest);

struct Cell {
  std::string round;
  std::string test_set;
  Method feature = Method::RGB;
  bool ok = false;
  std::string failure;
  metrics::MetricsReport metrics;
  std::vector<metrics::ScoredSample> scores;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

struct FeatureAverage {
  std::string round;
  Method feature;
  double mean_eer;
  std::size_t cells;
};

struct RoundAverage {
  std::string round;
  double mean_eer;
  std::size_t cells;
};

struct LooReport {
  std::vector<Cell> cells;
  std::vector<FeatureAverage> feature_averages;
  std::vector<RoundAverage> round_averages;
};

/// Per-(round, feature) mean EER over successful cells, and per-round mean
/// over all successful cells of that round.
void compute_averages(LooReport& report);

/// Disk-backed feature store keyed by face content hash and extractor
/// fingerprint. Concurrent readers; one writer per key via atomic rename.
class FeatureCache {
 public:
  explicit FeatureCache(std::filesystem::path directory);

  std::optional<features::FeatureVector> get(const std::string& key) const;
  void put(const std::string& key, const features::FeatureVector& vector) const;
  std::size_t hits() const;
  std::size_t misses() const;

 private:
  std::filesystem::path path_for(const std::string& key) const;

  std::filesystem::path directory_;
  mutable std::mutex counter_mutex_;
  mutable std::size_t hits_ = 0;
  mutable std::size_t misses_ = 0;
};

struct RunOptions {
  features::ExtractConfig extract;
  const FeatureCache* cache = nullptr;
  std::ostream* log = nullptr;
};

LooReport run_loo(const dataset::DatasetManifest& manifest, const LooPlan& plan, const RunOptions& options = {});

struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path output_dir;
  features::ExtractConfig extract;
  std::string bsif_bank;  // file path or "<size>x<size>_<bits>"; empty = default
  std::optional<std::string> srm_kernels;
  std::vector<Method> features;  // empty = all
  std::vector<Round> rounds;     // empty = default plan
  double split_ratio = 0.7;
  std::uint64_t seed = 1;
  forest::ForestParams forest;
  bool cache = false;
  std::filesystem::path cache_dir;  // default <output_dir>/cache
  dataset::MissingFilePolicy missing_files = dataset::MissingFilePolicy::fail;
};

/// JSON configuration; relative paths resolve against the config file's
/// directory. Throws UsageError naming the offending field.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir);

LooPlan make_plan(const RunConfig& config, const dataset::DatasetManifest& manifest);

struct Summary {
  struct Bar {
    std::string dataset;
    Method feature;
    double eer;
  };
  struct DatasetLine {
    std::string dataset;
    double mean_eer;
    Method best_feature;
    double best_eer;
  };
  std::vector<Bar> bars;
  std::vector<DatasetLine> datasets;
  std::vector<std::string> failures;
  std::vector<Method> features;
};

Summary summarize(const LooReport& report);
std::string summary_csv(const Summary& summary);
std::string summary_json(const Summary& summary);
/// Per-round blocks: one row per test set, feature columns, row average,
/// then a "<round>-Avg." row.
std::string table_csv(const LooReport& report, const LooPlan& plan);
std::string report_json(const LooReport& report, const LooPlan& plan);

/// report.json, table.csv, summary.{csv,json,png}, and under cells/ the
/// per-cell score and DET CSVs plus one DET plot per (round, feature).
void write_run_directory(const LooReport& report, const LooPlan& plan, const std::filesystem::path& dir);

}  // namespace smad::protocol
