#include "smad/protocol.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <cstdio>
#include <thread>

#include "json.hpp"
#include "smad/error.hpp"
#include "smad/render.hpp"

namespace smad::protocol {
namespace {

using json = nlohmann::ordered_json;
using dataset::SampleRecord;

bool contains(const std::vector<std::string>& items, const std::string& item) {
  return std::find(items.begin(), items.end(), item) != items.end();
}

std::string face_hash(const GrayImage& image) {
  std::vector<std::uint8_t> bytes(8);
  for (int i = 0; i < 4; ++i) {
    bytes[i] = static_cast<std::uint8_t>(image.width >> (8 * i));
    bytes[4 + i] = static_cast<std::uint8_t>(image.height >> (8 * i));
  }
  bytes.insert(bytes.end(), image.pixels.begin(), image.pixels.end());
  return sha256_hex(bytes);
}

double mean(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

struct RoundPrep {
  std::string failure;
  std::vector<std::string> train;
  std::vector<std::string> test_bonafide;
  std::vector<std::vector<std::string>> test_morphs;  // parallel to Round::test_sets
};

RoundPrep prepare_round(const dataset::DatasetManifest& manifest, const Round& round, const LooPlan& plan) {
  RoundPrep prep;
  prep.test_morphs.resize(round.test_sets.size());
  std::vector<SampleRecord> pool;
  for (const auto& r : manifest.records) {
    if (r.label == Label::bonafide || contains(round.train_tools, r.tool)) pool.push_back(r);
  }
  for (const auto& tool : round.train_tools) {
    if (manifest.count(Label::morph, tool) == 0) {
      prep.failure = "train tool '" + tool + "' has no morphs in the manifest";
      return prep;
    }
  }
  if (manifest.count(Label::bonafide) == 0) {
    prep.failure = "manifest has no bona fide samples";
    return prep;
  }
  dataset::SplitPair split;
  try {
    split = dataset::split_train_test(pool, plan.split_ratio, combine_seeds(plan.seed, hash_string("round:" + round.held_out)));
  } catch (const Error& e) {
    prep.failure = std::string("split failed: ") + e.what();
    return prep;
  }
  prep.train = split.train;
  std::sort(prep.train.begin(), prep.train.end());
  std::set<std::string> test(split.test.begin(), split.test.end());
  for (const auto& r : manifest.records) {
    if (r.label == Label::bonafide && test.count(r.id)) prep.test_bonafide.push_back(r.id);
  }
  for (std::size_t t = 0; t < round.test_sets.size(); ++t) {
    const auto& tool = round.test_sets[t];
    bool trained = contains(round.train_tools, tool);
    for (const auto& r : manifest.records) {
      if (r.label != Label::morph || r.tool != tool) continue;
      if (!trained || test.count(r.id)) prep.test_morphs[t].push_back(r.id);
    }
    std::sort(prep.test_morphs[t].begin(), prep.test_morphs[t].end());
  }
  std::sort(prep.test_bonafide.begin(), prep.test_bonafide.end());
  return prep;
}

std::string check_integrity(const dataset::DatasetManifest& manifest, const Round& round, const Cell& cell) {
  std::set<std::string> train(cell.train_ids.begin(), cell.train_ids.end());
  for (const auto& id : cell.test_ids) {
    if (train.count(id)) return "integrity: sample '" + id + "' in both train and test";
  }
  for (const auto& id : cell.train_ids) {
    const auto* rec = manifest.find(id);
    if (rec && rec->label == Label::morph && rec->tool == round.held_out) {
      return "integrity: held-out morph '" + id + "' in training pool";
    }
  }
  return {};
}

json plan_json(const LooPlan& plan) {
  json rounds = json::array();
  for (const auto& r : plan.rounds) {
    rounds.push_back({{"held_out", r.held_out}, {"train_tools", r.train_tools}, {"test_sets", r.test_sets}});
  }
  json feats = json::array();
  for (auto m : plan.features) feats.push_back(std::string(features::to_string(m)));
  json forest = {{"n_trees", plan.forest.n_trees},
                 {"max_depth", plan.forest.max_depth},
                 {"min_samples_leaf", plan.forest.min_samples_leaf},
                 {"features_per_split", forest::to_string(plan.forest.features_per_split)},
                 {"fixed_features", plan.forest.fixed_features},
                 {"bootstrap", plan.forest.bootstrap},
                 {"balanced_class_weights", plan.forest.balanced_class_weights}};
  return {{"rounds", rounds},
          {"features", feats},
          {"split", {{"ratio", plan.split_ratio}, {"seed", plan.seed}}},
          {"forest", forest}};
}

// Strict object reader: every key must be consumed.
class Fields {
 public:
  Fields(const nlohmann::json& object, std::string where) : object_(object), where_(std::move(where)) {
    if (!object_.is_object()) throw UsageError(where_ + ": expected a JSON object");
  }

  const nlohmann::json* get(const std::string& key) {
    seen_.insert(key);
    auto it = object_.find(key);
    return it == object_.end() ? nullptr : &*it;
  }

  const nlohmann::json& require(const std::string& key) {
    const auto* v = get(key);
    if (!v) throw UsageError(where_ + ": missing field '" + key + "'");
    return *v;
  }

  template <typename T>
  T as(const nlohmann::json& value, const std::string& key) const {
    try {
      return value.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw UsageError(where_ + ": field '" + key + "' has the wrong type");
    }
  }

  template <typename T>
  void read(const std::string& key, T& target) {
    if (const auto* v = get(key)) target = as<T>(*v, key);
  }

  void finish() const {
    for (const auto& item : object_.items()) {
      if (!seen_.count(item.key())) throw UsageError(where_ + ": unknown field '" + item.key() + "'");
    }
  }

  const std::string& where() const { return where_; }

 private:
  const nlohmann::json& object_;
  std::string where_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

void LooPlan::validate() const {
  if (rounds.empty()) throw UsageError("plan: no rounds");
  if (features.empty()) throw UsageError("plan: no features");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw UsageError("plan: split ratio must lie in (0,1)");
  forest.validate();
  std::set<std::string> names;
  for (const auto& r : rounds) {
    if (r.held_out.empty()) throw UsageError("plan: round without a held-out tool");
    if (!names.insert(r.held_out).second) throw UsageError("plan: duplicate round '" + r.held_out + "'");
    if (r.train_tools.empty()) throw UsageError("plan: round '" + r.held_out + "' has no training tools");
    if (r.test_sets.empty()) throw UsageError("plan: round '" + r.held_out + "' has no test sets");
    if (contains(r.train_tools, r.held_out)) {
      throw UsageError("plan: round '" + r.held_out + "' trains on its held-out tool");
    }
    for (const auto* list : {&r.train_tools, &r.test_sets}) {
      std::set<std::string> seen(list->begin(), list->end());
      if (seen.size() != list->size()) throw UsageError("plan: round '" + r.held_out + "' repeats a tool");
    }
  }
  std::set<Method> seen(features.begin(), features.end());
  if (seen.size() != features.size()) throw UsageError("plan: duplicate feature");
}

LooPlan build_default_plan(const dataset::DatasetManifest& manifest) {
  auto tools = manifest.morph_tools();
  if (tools.size() < 2) {
    throw DataError("LOO needs at least 2 morph tools; manifest has " + std::to_string(tools.size()));
  }
  LooPlan plan;
  for (const auto& held : tools) {
    Round r;
    r.held_out = held;
    for (const auto& t : tools) {
      if (t != held) r.train_tools.push_back(t);
    }
    r.test_sets = r.train_tools;
    plan.rounds.push_back(std::move(r));
  }
  plan.features.assign(features::kAllMethods.begin(), features::kAllMethods.end());
  return plan;
}

void compute_averages(LooReport& report) {
  report.feature_averages.clear();
  report.round_averages.clear();
  std::vector<std::string> rounds;
  std::vector<Method> feats;
  for (const auto& c : report.cells) {
    if (!contains(rounds, c.round)) rounds.push_back(c.round);
    if (std::find(feats.begin(), feats.end(), c.feature) == feats.end()) feats.push_back(c.feature);
  }
  for (const auto& r : rounds) {
    std::vector<double> all;
    for (auto f : feats) {
      std::vector<double> eers;
      for (const auto& c : report.cells) {
        if (c.ok && c.round == r && c.feature == f) eers.push_back(c.metrics.eer);
      }
      if (!eers.empty()) report.feature_averages.push_back({r, f, mean(eers), eers.size()});
      all.insert(all.end(), eers.begin(), eers.end());
    }
    if (!all.empty()) report.round_averages.push_back({r, mean(all), all.size()});
  }
}

FeatureCache::FeatureCache(std::filesystem::path directory) : directory_(std::move(directory)) {
  std::filesystem::create_directories(directory_);
}

std::filesystem::path FeatureCache::path_for(const std::string& key) const {
  auto digest = sha256_hex(key);
  return directory_ / digest.substr(0, 2) / (digest + ".fv");
}

namespace {
constexpr char kCacheMagic[8] = {'S', 'M', 'A', 'D', 'F', 'V', '1', '\n'};
}

std::optional<features::FeatureVector> FeatureCache::get(const std::string& key) const {
  auto path = path_for(key);
  std::optional<features::FeatureVector> out;
  std::ifstream in(path, std::ios::binary);
  if (in) {
    char magic[8];
    std::uint64_t key_len = 0, method_len = 0, count = 0;
    if (in.read(magic, 8) && std::memcmp(magic, kCacheMagic, 8) == 0 &&
        in.read(reinterpret_cast<char*>(&key_len), 8) && key_len < (1u << 20)) {
      std::string stored(key_len, '\0');
      if (in.read(stored.data(), key_len) && stored == key &&
          in.read(reinterpret_cast<char*>(&method_len), 8) && method_len < 1024) {
        features::FeatureVector v;
        v.method.resize(method_len);
        if (in.read(v.method.data(), method_len) && in.read(reinterpret_cast<char*>(&count), 8) &&
            count < (1u << 28)) {
          v.values.resize(count);
          if (in.read(reinterpret_cast<char*>(v.values.data()), count * sizeof(double))) out = std::move(v);
        }
      }
    }
  }
  std::lock_guard lock(counter_mutex_);
  ++(out ? hits_ : misses_);
  return out;
}

void FeatureCache::put(const std::string& key, const features::FeatureVector& vector) const {
  auto path = path_for(key);
  std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cache: cannot write " + tmp.string());
    std::uint64_t key_len = key.size(), method_len = vector.method.size(), count = vector.values.size();
    out.write(kCacheMagic, 8);
    out.write(reinterpret_cast<const char*>(&key_len), 8);
    out.write(key.data(), key_len);
    out.write(reinterpret_cast<const char*>(&method_len), 8);
    out.write(vector.method.data(), method_len);
    out.write(reinterpret_cast<const char*>(&count), 8);
    out.write(reinterpret_cast<const char*>(vector.values.data()), count * sizeof(double));
    if (!out) throw DataError("cache: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::size_t FeatureCache::hits() const {
  std::lock_guard lock(counter_mutex_);
  return hits_;
}

std::size_t FeatureCache::misses() const {
  std::lock_guard lock(counter_mutex_);
  return misses_;
}

LooReport run_loo(const dataset::DatasetManifest& manifest, const LooPlan& plan, const RunOptions& options) {
  plan.validate();
  options.extract.validate();

  std::set<std::string> tools;
  for (const auto& r : plan.rounds) {
    tools.insert(r.train_tools.begin(), r.train_tools.end());
    tools.insert(r.test_sets.begin(), r.test_sets.end());
  }
  std::vector<const SampleRecord*> used;
  for (const auto& r : manifest.records) {
    if (r.label == Label::bonafide || tools.count(r.tool)) used.push_back(&r);
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < used.size(); ++i) index[used[i]->id] = i;

  std::vector<GrayImage> faces(used.size());
  std::vector<std::string> hashes(used.size());
  parallel_for(used.size(), [&](std::size_t i) {
    const auto& rec = *used[i];
    Raster raster;
    try {
      raster = load_image(rec.path);
    } catch (const DataError& e) {
      throw DataError("sample '" + rec.id + "': " + e.what());
    }
    faces[i] = options.extract.before_resize ? dataset::crop_face_source(raster, rec.landmarks)
                                             : dataset::preprocess_face(raster, rec.landmarks, rec.id).pixels;
    hashes[i] = face_hash(faces[i]);
  });
  if (options.log) *options.log << "loo: " << used.size() << " faces loaded\n";

  std::vector<RoundPrep> preps;
  for (const auto& r : plan.rounds) preps.push_back(prepare_round(manifest, r, plan));

  // Cells ordered round, test set, feature.
  LooReport report;
  std::vector<std::size_t> round_offset;
  for (const auto& r : plan.rounds) {
    round_offset.push_back(report.cells.size());
    for (const auto& t : r.test_sets) {
      for (auto f : plan.features) {
        Cell c;
        c.round = r.held_out;
        c.test_set = t;
        c.feature = f;
        report.cells.push_back(std::move(c));
      }
    }
  }
  auto cell_at = [&](std::size_t ri, std::size_t ti, std::size_t fi) -> Cell& {
    return report.cells[round_offset[ri] + ti * plan.features.size() + fi];
  };

  for (std::size_t fi = 0; fi < plan.features.size(); ++fi) {
    const Method feature = plan.features[fi];
    const std::string fingerprint = options.extract.fingerprint(feature);
    std::vector<features::FeatureVector> vectors(used.size());
    std::mutex failure_mutex;
    std::string extraction_failure;
    parallel_for(used.size(), [&](std::size_t i) {
      std::string key = hashes[i] + "|" + fingerprint;
      try {
        if (options.cache) {
          if (auto hit = options.cache->get(key)) {
            vectors[i] = std::move(*hit);
            return;
          }
        }
        vectors[i] = options.extract.before_resize ? features::extract_from_source(faces[i], feature, options.extract).vector
                                                   : features::extract(faces[i], feature, options.extract).vector;
        if (options.cache) options.cache->put(key, vectors[i]);
      } catch (const std::exception& e) {
        std::lock_guard lock(failure_mutex);
        if (extraction_failure.empty()) {
          extraction_failure = "extraction failed on '" + used[i]->id + "': " + e.what();
        }
      }
    });
    if (options.log) {
      *options.log << "loo: " << features::to_string(feature) << " vectors ready"
                   << (extraction_failure.empty() ? "" : " (" + extraction_failure + ")") << "\n";
    }

    parallel_for(plan.rounds.size(), [&](std::size_t ri) {
      const Round& round = plan.rounds[ri];
      const RoundPrep& prep = preps[ri];
      auto fail_all = [&](const std::string& reason) {
        for (std::size_t ti = 0; ti < round.test_sets.size(); ++ti) cell_at(ri, ti, fi).failure = reason;
      };
      if (!prep.failure.empty()) return fail_all(prep.failure);
      if (!extraction_failure.empty()) return fail_all(extraction_failure);

      std::vector<features::FeatureVector> X;
      std::vector<Label> y;
      for (const auto& id : prep.train) {
        std::size_t i = index.at(id);
        X.push_back(vectors[i]);
        y.push_back(used[i]->label);
      }
      forest::ForestParams params = plan.forest;
      params.seed = combine_seeds(combine_seeds(plan.seed, hash_string(round.held_out)),
                                  hash_string(features::to_string(feature)));
      forest::ForestModel model;
      try {
        model = forest::train_forest(X, y, params, prep.train);
      } catch (const std::exception& e) {
        return fail_all(std::string("training failed: ") + e.what());
      }
      auto score_ids = [&](const std::vector<std::string>& ids) {
        std::vector<metrics::ScoredSample> out;
        for (const auto& id : ids) {
          std::size_t i = index.at(id);
          out.push_back({id, used[i]->label, forest::predict_score(model, vectors[i])});
        }
        return out;
      };
      auto bonafide_scores = score_ids(prep.test_bonafide);

      for (std::size_t ti = 0; ti < round.test_sets.size(); ++ti) {
        Cell& cell = cell_at(ri, ti, fi);
        const auto& morphs = prep.test_morphs[ti];
        if (morphs.empty()) {
          cell.failure = "empty test stratum: no morphs of '" + round.test_sets[ti] + "' to test";
          continue;
        }
        if (prep.test_bonafide.empty()) {
          cell.failure = "empty test stratum: no bona fide to test";
          continue;
        }
        cell.train_ids = prep.train;
        cell.test_ids = prep.test_bonafide;
        cell.test_ids.insert(cell.test_ids.end(), morphs.begin(), morphs.end());
        if (auto problem = check_integrity(manifest, round, cell); !problem.empty()) {
          cell.failure = problem;
          continue;
        }
        cell.scores = bonafide_scores;
        auto morph_scores = score_ids(morphs);
        cell.scores.insert(cell.scores.end(), morph_scores.begin(), morph_scores.end());
        cell.metrics = metrics::evaluate(metrics::to_score_set(cell.scores));
        cell.ok = true;
      }
    });
  }
  compute_averages(report);
  return report;
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(std::string("config: invalid JSON: ") + e.what());
  }
  RunConfig cfg;
  Fields top(root, "config");
  cfg.manifest = resolve(base_dir, top.as<std::string>(top.require("manifest"), "manifest"));
  if (const auto* v = top.get("output_dir")) cfg.output_dir = resolve(base_dir, top.as<std::string>(*v, "output_dir"));
  if (const auto* v = top.get("features")) {
    if (v->is_string()) {
      auto s = v->get<std::string>();
      if (to_lower(s) != "all") cfg.features = features::parse_method_list(s);
    } else {
      for (const auto& item : top.as<std::vector<std::string>>(*v, "features")) {
        auto m = features::parse_method(item);
        if (!m) throw UsageError("config: unknown feature '" + item + "'");
        cfg.features.push_back(*m);
      }
    }
  }
  if (const auto* v = top.get("rounds")) {
    if (!v->is_array()) throw UsageError("config: field 'rounds' must be an array");
    for (const auto& item : *v) {
      Fields rf(item, "config: rounds[]");
      Round r;
      r.held_out = rf.as<std::string>(rf.require("held_out"), "held_out");
      r.train_tools = rf.as<std::vector<std::string>>(rf.require("train_tools"), "train_tools");
      r.test_sets = rf.as<std::vector<std::string>>(rf.require("test_sets"), "test_sets");
      rf.finish();
      cfg.rounds.push_back(std::move(r));
    }
  }
  if (const auto* v = top.get("split")) {
    Fields sf(*v, "config: split");
    sf.read("ratio", cfg.split_ratio);
    sf.read("seed", cfg.seed);
    sf.finish();
  }
  if (const auto* v = top.get("forest")) {
    Fields ff(*v, "config: forest");
    ff.read("n_trees", cfg.forest.n_trees);
    ff.read("max_depth", cfg.forest.max_depth);
    ff.read("min_samples_leaf", cfg.forest.min_samples_leaf);
    if (const auto* rule = ff.get("features_per_split")) {
      if (rule->is_number_integer()) {
        cfg.forest.features_per_split = forest::FeatureRule::fixed;
        cfg.forest.fixed_features = rule->get<int>();
      } else {
        cfg.forest.features_per_split = forest::parse_feature_rule(ff.as<std::string>(*rule, "features_per_split"));
      }
    }
    ff.read("bootstrap", cfg.forest.bootstrap);
    ff.read("balanced_class_weights", cfg.forest.balanced_class_weights);
    ff.finish();
  }
  if (const auto* v = top.get("extract")) {
    Fields ef(*v, "config: extract");
    ef.read("ela_quality", cfg.extract.ela_quality);
    ef.read("svd_rank", cfg.extract.svd_rank);
    ef.read("dct_block", cfg.extract.dct_block);
    ef.read("before_resize", cfg.extract.before_resize);
    ef.read("bsif_bank", cfg.bsif_bank);
    if (const auto* srm = ef.get("srm_kernels")) cfg.srm_kernels = ef.as<std::string>(*srm, "srm_kernels");
    if (const auto* hog = ef.get("hog")) {
      Fields hf(*hog, "config: extract.hog");
      hf.read("cells_x", cfg.extract.hog.cells_x);
      hf.read("cells_y", cfg.extract.hog.cells_y);
      hf.read("bins", cfg.extract.hog.bins);
      hf.read("block", cfg.extract.hog.block);
      hf.finish();
    }
    ef.finish();
  }
  top.read("cache", cfg.cache);
  if (const auto* v = top.get("cache_dir")) cfg.cache_dir = resolve(base_dir, top.as<std::string>(*v, "cache_dir"));
  if (const auto* v = top.get("missing_files")) {
    auto s = top.as<std::string>(*v, "missing_files");
    if (s == "fail") {
      cfg.missing_files = dataset::MissingFilePolicy::fail;
    } else if (s == "warn") {
      cfg.missing_files = dataset::MissingFilePolicy::warn;
    } else {
      throw UsageError("config: field 'missing_files' must be 'fail' or 'warn'");
    }
  }
  top.finish();

  if (!cfg.bsif_bank.empty()) cfg.extract.bsif = features::resolve_bsif_bank(cfg.bsif_bank, base_dir);
  if (cfg.srm_kernels) {
    auto path = resolve(base_dir, *cfg.srm_kernels);
    if (!std::filesystem::exists(path)) throw UsageError("config: SRM kernel file '" + *cfg.srm_kernels + "' not found");
    cfg.extract.srm = std::make_shared<features::SrmKernelBank>(features::SrmKernelBank::load(path));
  }
  cfg.extract.validate();
  cfg.forest.validate();
  if (!(cfg.split_ratio > 0.0 && cfg.split_ratio < 1.0)) throw UsageError("config: split ratio must lie in (0,1)");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw UsageError("config file not found: " + path.string());
  return parse_run_config(read_text_file(path), path.parent_path());
}

LooPlan make_plan(const RunConfig& config, const dataset::DatasetManifest& manifest) {
  LooPlan plan;
  if (config.rounds.empty()) {
    plan = build_default_plan(manifest);
  } else {
    plan.rounds = config.rounds;
    plan.features.assign(features::kAllMethods.begin(), features::kAllMethods.end());
  }
  if (!config.features.empty()) plan.features = config.features;
  plan.split_ratio = config.split_ratio;
  plan.seed = config.seed;
  plan.forest = config.forest;
  plan.validate();
  return plan;
}

Summary summarize(const LooReport& report) {
  Summary s;
  for (const auto& c : report.cells) {
    if (std::find(s.features.begin(), s.features.end(), c.feature) == s.features.end()) s.features.push_back(c.feature);
    if (!c.ok) {
      s.failures.push_back(c.round + "/" + c.test_set + "/" + std::string(features::to_string(c.feature)) + ": " +
                           c.failure);
    }
  }
  for (const auto& fa : report.feature_averages) s.bars.push_back({fa.round, fa.feature, fa.mean_eer});
  for (const auto& ra : report.round_averages) {
    Summary::DatasetLine line{ra.round, ra.mean_eer, Method::RGB, 0.0};
    bool first = true;
    for (const auto& fa : report.feature_averages) {
      if (fa.round != ra.round) continue;
      if (first || fa.mean_eer < line.best_eer) {
        line.best_feature = fa.feature;
        line.best_eer = fa.mean_eer;
        first = false;
      }
    }
    s.datasets.push_back(line);
  }
  return s;
}

std::string summary_csv(const Summary& summary) {
  std::ostringstream out;
  out << "dataset,feature,eer,best\n";
  for (const auto& d : summary.datasets) {
    for (const auto& b : summary.bars) {
      if (b.dataset != d.dataset) continue;
      out << b.dataset << ',' << features::to_string(b.feature) << ',' << format_double(b.eer) << ','
          << (b.feature == d.best_feature ? 1 : 0) << '\n';
    }
    out << d.dataset << ",Average," << format_double(d.mean_eer) << ",0\n";
  }
  return out.str();
}

std::string summary_json(const Summary& summary) {
  json j;
  json feats = json::array();
  for (auto f : summary.features) feats.push_back(std::string(features::to_string(f)));
  j["features"] = feats;
  json datasets = json::array();
  for (const auto& d : summary.datasets) {
    json bars = json::array();
    for (const auto& b : summary.bars) {
      if (b.dataset == d.dataset) bars.push_back({{"feature", std::string(features::to_string(b.feature))}, {"eer", b.eer}});
    }
    datasets.push_back({{"name", d.dataset},
                        {"average", d.mean_eer},
                        {"best", {{"feature", std::string(features::to_string(d.best_feature))}, {"eer", d.best_eer}}},
                        {"bars", bars}});
  }
  j["datasets"] = datasets;
  j["failures"] = summary.failures;
  return j.dump(2) + "\n";
}

std::string table_csv(const LooReport& report, const LooPlan& plan) {
  std::ostringstream out;
  out << "round,test_set";
  for (auto f : plan.features) out << ',' << features::to_string(f);
  out << ",Average\n";
  for (const auto& r : plan.rounds) {
    for (const auto& t : r.test_sets) {
      out << r.held_out << ',' << t;
      std::vector<double> row;
      for (auto f : plan.features) {
        out << ',';
        for (const auto& c : report.cells) {
          if (c.ok && c.round == r.held_out && c.test_set == t && c.feature == f) {
            out << format_double(c.metrics.eer);
            row.push_back(c.metrics.eer);
          }
        }
      }
      out << ',' << (row.empty() ? "" : format_double(mean(row))) << '\n';
    }
    out << r.held_out << ',' << r.held_out << "-Avg.";
    for (auto f : plan.features) {
      out << ',';
      for (const auto& fa : report.feature_averages) {
        if (fa.round == r.held_out && fa.feature == f) out << format_double(fa.mean_eer);
      }
    }
    out << ',';
    for (const auto& ra : report.round_averages) {
      if (ra.round == r.held_out) out << format_double(ra.mean_eer);
    }
    out << '\n';
  }
  return out.str();
}

std::string report_json(const LooReport& report, const LooPlan& plan) {
  json j;
  j["format"] = 1;
  j["plan"] = plan_json(plan);
  json cells = json::array();
  for (const auto& c : report.cells) {
    json cell = {{"round", c.round},
                 {"test_set", c.test_set},
                 {"feature", std::string(features::to_string(c.feature))},
                 {"status", c.ok ? "ok" : "failed"}};
    if (c.ok) {
      cell["metrics"] = json::parse(metrics::report_to_json(c.metrics));
      cell["n_train"] = c.train_ids.size();
      cell["n_test"] = c.test_ids.size();
      cell["train_digest"] = forest::training_digest(c.train_ids);
    } else {
      cell["reason"] = c.failure;
    }
    cells.push_back(std::move(cell));
  }
  j["cells"] = cells;
  json feats = json::array();
  for (const auto& fa : report.feature_averages) {
    feats.push_back({{"round", fa.round},
                     {"feature", std::string(features::to_string(fa.feature))},
                     {"mean_eer", fa.mean_eer},
                     {"cells", fa.cells}});
  }
  json rounds = json::array();
  for (const auto& ra : report.round_averages) {
    rounds.push_back({{"round", ra.round}, {"mean_eer", ra.mean_eer}, {"cells", ra.cells}});
  }
  j["averages"] = {{"features", feats}, {"rounds", rounds}};
  return j.dump(2) + "\n";
}

void write_run_directory(const LooReport& report, const LooPlan& plan, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  write_text_file(dir / "report.json", report_json(report, plan));
  write_text_file(dir / "table.csv", table_csv(report, plan));
  auto summary = summarize(report);
  write_text_file(dir / "summary.csv", summary_csv(summary));
  write_text_file(dir / "summary.json", summary_json(summary));

  std::vector<render::BarGroup> groups;
  for (const auto& d : summary.datasets) {
    render::BarGroup g;
    g.dataset = d.dataset;
    g.average = d.mean_eer;
    for (const auto& b : summary.bars) {
      if (b.dataset == d.dataset) g.bars.emplace_back(std::string(features::to_string(b.feature)), b.eer);
    }
    groups.push_back(std::move(g));
  }
  save_png(dir / "summary.png", render::plot_bars(groups, "LOO summary (EER)"));

  for (const auto& c : report.cells) {
    if (!c.ok) continue;
    auto base = dir / "cells" / c.round / c.test_set;
    std::string name(features::to_string(c.feature));
    metrics::write_scores_csv(base / (name + ".scores.csv"), c.scores);
    write_text_file(base / (name + ".det.csv"), metrics::det_csv(metrics::det_curve(metrics::to_score_set(c.scores))));
  }
  for (const auto& r : plan.rounds) {
    for (auto f : plan.features) {
      std::vector<render::DetSeries> series;
      for (const auto& c : report.cells) {
        if (c.ok && c.round == r.held_out && c.feature == f) {
          series.push_back({c.test_set, metrics::det_curve(metrics::to_score_set(c.scores)), c.metrics.eer});
        }
      }
      if (series.empty()) continue;
      std::string name(features::to_string(f));
      save_png(dir / "det" / (r.held_out + "_" + name + ".png"),
               render::plot_det(series, name + ", " + r.held_out + " held out"));
    }
  }
}

}  // namespace smad::protocol
