#pragma once

// Presentation-attack detection metrics (ISO/IEC 30107-3 style).
//
// Convention: a sample is classified as an attack (morph) when its score is
// >= threshold. Ties count as attack.

#include <cstddef>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "smad/util.hpp"

namespace smad::metrics {

struct ScoreSet {
  std::vector<double> bonafide;
  std::vector<double> morph;
};

/// Fraction of morph scores below the threshold (attacks accepted as bona fide).
double apcer(const ScoreSet& scores, double threshold);
/// Fraction of bona fide scores at or above the threshold.
double bpcer(const ScoreSet& scores, double threshold);

struct DetPoint {
  double threshold;
  double apcer;
  double bpcer;
};

/// Thresholds strictly increasing: -inf, every distinct score, +inf.
struct DetCurve {
  std::vector<DetPoint> points;
};

DetCurve det_curve(const ScoreSet& scores);

struct EerResult {
  double rate = 0.0;
  double threshold = 0.0;
};

/// Crossing of APCER and BPCER, linearly interpolated between the two curve
/// points where (apcer - bpcer) changes sign. When a curve point hits the
/// crossing exactly, the threshold reported is the midpoint of the score
/// interval whose rates equal that point's.
EerResult eer(const DetCurve& curve);

/// BPCER at a fixed APCER: take the last point with apcer <= target and
/// interpolate towards the next one.
double bpcer_at_apcer(const DetCurve& curve, double apcer_target);
/// Largest finite threshold whose APCER does not exceed the target.
double threshold_at_apcer(const DetCurve& curve, double apcer_target);

inline constexpr double kApcer10 = 0.10;
inline constexpr double kApcer20 = 0.05;

struct MetricsReport {
  double eer = 0.0;
  double eer_threshold = 0.0;
  double bpcer10 = 0.0;
  double bpcer20 = 0.0;
  std::size_t n_bf = 0;
  std::size_t n_pais = 0;
  // operating thresholds for BPCER10 / BPCER20; not part of the report file
  double bpcer10_threshold = 0.0;
  double bpcer20_threshold = 0.0;
};

MetricsReport evaluate(const ScoreSet& scores);

std::string report_to_json(const MetricsReport& report);

struct ScoredSample {
  std::string id;
  Label label;
  double score;
};

ScoreSet to_score_set(const std::vector<ScoredSample>& samples);
void write_scores_csv(const std::filesystem::path& path, const std::vector<ScoredSample>& samples);
std::vector<ScoredSample> read_scores_csv(const std::filesystem::path& path);
std::string det_csv(const DetCurve& curve);

/// Standard normal quantile, used for DET axes.
double probit(double p);

}  // namespace smad::metrics
