#include "smad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "smad/error.hpp"

namespace smad::metrics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_morph(const ScoreSet& scores) {
  if (scores.morph.empty()) throw DataError("APCER needs at least one morph score");
}

void require_bonafide(const ScoreSet& scores) {
  if (scores.bonafide.empty()) throw DataError("BPCER needs at least one bona fide score");
}

void require_curve(const DetCurve& curve) {
  if (curve.points.size() < 3) throw DataError("degenerate DET curve");
}

double difference(const DetPoint& p) { return p.apcer - p.bpcer; }

}  // namespace

double apcer(const ScoreSet& scores, double threshold) {
  require_morph(scores);
  const auto missed = std::count_if(scores.morph.begin(), scores.morph.end(),
                                    [&](double s) { return s < threshold; });
  return static_cast<double>(missed) / static_cast<double>(scores.morph.size());
}

double bpcer(const ScoreSet& scores, double threshold) {
  require_bonafide(scores);
  const auto rejected = std::count_if(scores.bonafide.begin(), scores.bonafide.end(),
                                      [&](double s) { return s >= threshold; });
  return static_cast<double>(rejected) / static_cast<double>(scores.bonafide.size());
}

DetCurve det_curve(const ScoreSet& scores) {
  require_morph(scores);
  require_bonafide(scores);
  auto check = [](const std::vector<double>& v) {
    for (double s : v) {
      if (!std::isfinite(s)) throw DataError("scores must be finite");
    }
  };
  check(scores.bonafide);
  check(scores.morph);

  std::vector<double> bf = scores.bonafide;
  std::vector<double> morph = scores.morph;
  std::sort(bf.begin(), bf.end());
  std::sort(morph.begin(), morph.end());
  std::vector<double> thresholds;
  thresholds.reserve(bf.size() + morph.size());
  std::merge(bf.begin(), bf.end(), morph.begin(), morph.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const double n_bf = static_cast<double>(bf.size());
  const double n_m = static_cast<double>(morph.size());
  DetCurve curve;
  curve.points.reserve(thresholds.size() + 2);
  curve.points.push_back({-kInf, 0.0, 1.0});
  for (double t : thresholds) {
    const auto below_m = std::lower_bound(morph.begin(), morph.end(), t) - morph.begin();
    const auto below_bf = std::lower_bound(bf.begin(), bf.end(), t) - bf.begin();
    curve.points.push_back({t, static_cast<double>(below_m) / n_m,
                            static_cast<double>(bf.size() - static_cast<std::size_t>(below_bf)) / n_bf});
  }
  curve.points.push_back({kInf, 1.0, 0.0});
  return curve;
}

EerResult eer(const DetCurve& curve) {
  require_curve(curve);
  const auto& pts = curve.points;
  std::size_t i = 1;
  while (i < pts.size() && difference(pts[i]) < 0.0) ++i;
  if (i == pts.size()) throw DataError("DET curve never crosses");
  const DetPoint& hi = pts[i];
  const DetPoint& lo = pts[i - 1];
  if (difference(hi) == 0.0) {
    const double t = std::isfinite(lo.threshold) ? lo.threshold + (hi.threshold - lo.threshold) / 2.0
                                                 : hi.threshold;
    return {hi.apcer, t};
  }
  const double alpha = -difference(lo) / (difference(hi) - difference(lo));
  EerResult result;
  result.rate = lo.apcer + alpha * (hi.apcer - lo.apcer);
  if (!std::isfinite(lo.threshold)) {
    result.threshold = hi.threshold;
  } else if (!std::isfinite(hi.threshold)) {
    result.threshold = lo.threshold;
  } else {
    result.threshold = lo.threshold + alpha * (hi.threshold - lo.threshold);
  }
  return result;
}

namespace {

std::size_t last_within(const DetCurve& curve, double apcer_target) {
  require_curve(curve);
  if (!(apcer_target > 0.0 && apcer_target < 1.0)) throw UsageError("APCER target must lie in (0,1)");
  std::size_t k = 0;
  while (k + 1 < curve.points.size() && curve.points[k + 1].apcer <= apcer_target) ++k;
  return k;
}

}  // namespace

double bpcer_at_apcer(const DetCurve& curve, double apcer_target) {
  const std::size_t k = last_within(curve, apcer_target);
  const DetPoint& p = curve.points[k];
  if (p.apcer == apcer_target || k + 1 == curve.points.size()) return p.bpcer;
  const DetPoint& q = curve.points[k + 1];
  const double alpha = (apcer_target - p.apcer) / (q.apcer - p.apcer);
  return p.bpcer + alpha * (q.bpcer - p.bpcer);
}

double threshold_at_apcer(const DetCurve& curve, double apcer_target) {
  const std::size_t k = last_within(curve, apcer_target);
  // -inf behaves exactly like the lowest observed score
  return k == 0 ? curve.points[1].threshold : curve.points[k].threshold;
}

MetricsReport evaluate(const ScoreSet& scores) {
  const DetCurve curve = det_curve(scores);
  const EerResult e = eer(curve);
  MetricsReport report;
  report.eer = e.rate;
  report.eer_threshold = e.threshold;
  report.bpcer10 = bpcer_at_apcer(curve, kApcer10);
  report.bpcer20 = bpcer_at_apcer(curve, kApcer20);
  report.bpcer10_threshold = threshold_at_apcer(curve, kApcer10);
  report.bpcer20_threshold = threshold_at_apcer(curve, kApcer20);
  report.n_bf = scores.bonafide.size();
  report.n_pais = scores.morph.size();
  return report;
}

std::string report_to_json(const MetricsReport& report) {
  nlohmann::ordered_json doc;
  doc["eer"] = report.eer;
  doc["eer_threshold"] = report.eer_threshold;
  doc["bpcer10"] = report.bpcer10;
  doc["bpcer20"] = report.bpcer20;
  doc["n_bf"] = report.n_bf;
  doc["n_pais"] = report.n_pais;
  return doc.dump(2) + "\n";
}

ScoreSet to_score_set(const std::vector<ScoredSample>& samples) {
  ScoreSet set;
  for (const auto& s : samples) (s.label == Label::morph ? set.morph : set.bonafide).push_back(s.score);
  return set;
}

void write_scores_csv(const std::filesystem::path& path, const std::vector<ScoredSample>& samples) {
  std::ostringstream out;
  out << "id,label,score\n";
  for (const auto& s : samples) out << s.id << ',' << to_string(s.label) << ',' << format_double(s.score) << "\n";
  write_text_file(path, out.str());
}

std::vector<ScoredSample> read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open score file " + path.string());
  std::vector<ScoredSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty()) continue;
    const auto fields = split(text, ',');
    if (line_no == 1) {
      if (fields.size() != 3 || fields[0] != "id" || fields[1] != "label" || fields[2] != "score") {
        throw DataError(path.string() + ": expected header 'id,label,score'");
      }
      continue;
    }
    if (fields.size() != 3) throw DataError(path.string() + " line " + std::to_string(line_no) + ": expected 3 fields");
    try {
      samples.push_back({fields[0], parse_label(fields[1]), parse_double(fields[2])});
    } catch (const DataError& e) {
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return samples;
}

std::string det_csv(const DetCurve& curve) {
  std::ostringstream out;
  out << "threshold,apcer,bpcer\n";
  for (const auto& p : curve.points) {
    out << format_double(p.threshold) << ',' << format_double(p.apcer) << ',' << format_double(p.bpcer) << "\n";
  }
  return out.str();
}

double probit(double p) {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  // Acklam's rational approximation followed by one Halley refinement step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double low = 0.02425;
  double x;
  if (p < low) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2 * 3.14159265358979323846) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

}  // namespace smad::metrics
