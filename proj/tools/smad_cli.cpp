// smad: command-line front end. Exit codes: 0 success, 1 usage error,
// 2 data error, 3 internal error.

#include <atomic>
#include <csignal>
#include <iostream>
#include <map>
#include <memory>

#include "CLI11.hpp"
#include "json.hpp"
#include "smad/dataset.hpp"
#include "smad/error.hpp"
#include "smad/features/extract.hpp"
#include "smad/forest.hpp"
#include "smad/metrics.hpp"
#include "smad/protocol.hpp"
#include "smad/render.hpp"
#include "smad/service.hpp"

namespace fs = std::filesystem;
using namespace smad;

namespace {

struct ExtractFlags {
  int ela_quality = features::kDefaultElaQuality;
  int svd_rank = features::kDefaultSvdRank;
  int dct_block = 0;
  std::string bsif_bank;
  std::string srm_kernels;
  bool before_resize = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--ela-quality", ela_quality, "JPEG quality for ELA")->capture_default_str();
    cmd->add_option("--svd-rank", svd_rank, "Rank k of the SVD reconstruction")->capture_default_str();
    cmd->add_option("--dct-block", dct_block, "DCT block size (0 = whole image)")->capture_default_str();
    cmd->add_option("--bsif-bank", bsif_bank, "BSIF bank: shipped id like 5x5_9 or a JSON file");
    cmd->add_option("--srm-kernels", srm_kernels, "SRM kernel JSON file");
    cmd->add_flag("--before-resize", before_resize, "Extract at source resolution, then resize");
  }

  features::ExtractConfig build() const {
    features::ExtractConfig cfg;
    cfg.ela_quality = ela_quality;
    cfg.svd_rank = svd_rank;
    cfg.dct_block = dct_block;
    cfg.before_resize = before_resize;
    if (!bsif_bank.empty()) cfg.bsif = features::resolve_bsif_bank(bsif_bank);
    if (!srm_kernels.empty()) {
      if (!fs::exists(srm_kernels)) throw UsageError("SRM kernel file not found: " + srm_kernels);
      cfg.srm = std::make_shared<features::SrmKernelBank>(features::SrmKernelBank::load(srm_kernels));
    }
    cfg.validate();
    return cfg;
  }
};

struct ForestFlags {
  forest::ForestParams params;
  std::string mtry = "sqrt";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--trees", params.n_trees, "Number of trees")->capture_default_str();
    cmd->add_option("--max-depth", params.max_depth, "Maximum depth (0 = unlimited)")->capture_default_str();
    cmd->add_option("--min-leaf", params.min_samples_leaf, "Minimum samples per leaf")->capture_default_str();
    cmd->add_option("--mtry", mtry, "Features per split: sqrt, log2, all or a count")->capture_default_str();
    cmd->add_option("--seed", params.seed, "Random seed")->capture_default_str();
    cmd->add_flag("--balanced", params.balanced_class_weights, "Balance class weights");
    cmd->add_flag("!--no-bootstrap", params.bootstrap, "Train every tree on the full set");
  }

  forest::ForestParams build() const {
    auto p = params;
    if (!mtry.empty() && std::all_of(mtry.begin(), mtry.end(), ::isdigit)) {
      p.features_per_split = forest::FeatureRule::fixed;
      p.fixed_features = std::stoi(mtry);
    } else {
      p.features_per_split = forest::parse_feature_rule(mtry);
    }
    p.validate();
    return p;
  }
};

dataset::MissingFilePolicy parse_missing(const std::string& s) {
  if (s == "fail") return dataset::MissingFilePolicy::fail;
  if (s == "warn") return dataset::MissingFilePolicy::warn;
  throw UsageError("--missing must be 'fail' or 'warn'");
}

std::optional<dataset::EyePair> parse_eyes(const std::string& text) {
  if (text.empty()) return std::nullopt;
  auto parts = split(text, ',');
  if (parts.size() != 4) throw UsageError("--eyes must be lx,ly,rx,ry");
  dataset::EyePair e;
  e.left = {parse_double(trim(parts[0])), parse_double(trim(parts[1]))};
  e.right = {parse_double(trim(parts[2])), parse_double(trim(parts[3]))};
  return e;
}

std::vector<features::Method> parse_fusion(const std::string& spec) {
  std::vector<features::Method> parts;
  for (const auto& piece : split(spec, '+')) {
    auto m = features::parse_method(trim(piece));
    if (!m) throw UsageError("unknown method '" + piece + "'");
    parts.push_back(*m);
  }
  return parts;
}

features::FeatureVector vector_for(const dataset::SampleRecord& rec, const std::vector<features::Method>& parts,
                                   const features::ExtractConfig& cfg) {
  Raster raster;
  try {
    raster = load_image(rec.path);
  } catch (const DataError& e) {
    throw DataError("sample '" + rec.id + "': " + e.what());
  }
  std::vector<features::FeatureVector> vecs;
  if (cfg.before_resize) {
    auto source = dataset::crop_face_source(raster, rec.landmarks);
    for (auto m : parts) vecs.push_back(features::extract_from_source(source, m, cfg).vector);
  } else {
    auto face = dataset::preprocess_face(raster, rec.landmarks, rec.id);
    for (auto m : parts) vecs.push_back(features::extract(face, m, cfg).vector);
  }
  return vecs.size() == 1 ? vecs.front() : features::fuse_vectors(vecs);
}

std::map<std::string, Label> labels_of(const dataset::DatasetManifest& manifest) {
  std::map<std::string, Label> out;
  for (const auto& r : manifest.records) out[r.id] = r.label;
  return out;
}

void collect(const std::vector<features::FeatureRow>& rows, const std::map<std::string, Label>& labels,
             std::vector<features::FeatureVector>& X, std::vector<Label>& y, std::vector<std::string>& ids) {
  for (const auto& row : rows) {
    auto it = labels.find(row.id);
    if (it == labels.end()) throw DataError("id '" + row.id + "' is not in the manifest");
    X.push_back(row.vector);
    y.push_back(it->second);
    ids.push_back(row.id);
  }
}

std::atomic<service::HttpServer*> g_server{nullptr};

void on_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-image morphing attack detection toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Align faces to the 180x240 frame");
  std::string pre_manifest, pre_out, pre_missing = "fail";
  pre->add_option("--manifest", pre_manifest, "Dataset manifest CSV")->required();
  pre->add_option("--out", pre_out, "Output directory for aligned PNGs, JSON sidecars and aligned.csv")->required();
  pre->add_option("--missing", pre_missing, "Missing image policy: fail or warn")->capture_default_str();

  // extract
  auto* ext = app.add_subcommand("extract", "Compute feature vectors for a manifest");
  std::string ext_manifest, ext_out, ext_method, ext_missing = "fail";
  ExtractFlags ext_flags;
  ext->add_option("--manifest", ext_manifest, "Dataset manifest CSV")->required();
  ext->add_option("--method", ext_method, "Method, or methods joined with '+' for feature-level fusion")->required();
  ext->add_option("--out", ext_out, "Output vectors CSV")->required();
  ext->add_option("--missing", ext_missing, "Missing image policy: fail or warn")->capture_default_str();
  ext_flags.add_to(ext);

  // train
  auto* trn = app.add_subcommand("train", "Train a random forest on feature vectors");
  std::string trn_vectors, trn_manifest, trn_out, trn_calibration;
  ForestFlags trn_flags;
  trn->add_option("--vectors", trn_vectors, "Training vectors CSV")->required();
  trn->add_option("--manifest", trn_manifest, "Manifest providing labels")->required();
  trn->add_option("--out", trn_out, "Model JSON output")->required();
  trn->add_option("--calibration", trn_calibration, "Vectors CSV used to fix EER/BPCER10/BPCER20 thresholds");
  trn_flags.add_to(trn);

  // score
  auto* scr = app.add_subcommand("score", "Score feature vectors with a model");
  std::string scr_model, scr_vectors, scr_manifest, scr_out;
  scr->add_option("--model", scr_model, "Model JSON")->required();
  scr->add_option("--vectors", scr_vectors, "Vectors CSV")->required();
  scr->add_option("--manifest", scr_manifest, "Manifest providing labels")->required();
  scr->add_option("--out", scr_out, "Scores CSV output (id,label,score)")->required();

  // eval
  auto* evl = app.add_subcommand("eval", "Compute EER, BPCER10, BPCER20 and the DET curve");
  std::string evl_scores, evl_out, evl_label = "scores";
  evl->add_option("--scores", evl_scores, "Scores CSV")->required();
  evl->add_option("--out", evl_out, "Output directory (metrics.json, det.csv, det.png)")->required();
  evl->add_option("--label", evl_label, "Legend label for the DET plot")->capture_default_str();

  // loo
  auto* loo = app.add_subcommand("loo", "Run the leave-one-tool-out protocol");
  std::string loo_config, loo_out;
  bool loo_no_cache = false;
  loo->add_option("--config", loo_config, "Run configuration JSON")->required();
  loo->add_option("--out", loo_out, "Run directory (overrides output_dir)");
  loo->add_flag("--no-cache", loo_no_cache, "Disable the feature cache");

  // visualize
  auto* vis = app.add_subcommand("visualize", "Render feature maps for one image");
  std::string vis_image, vis_methods = "ELA,DFT,DCT2,SVD,SRM", vis_out, vis_id, vis_eyes;
  int vis_columns = 5;
  ExtractFlags vis_flags;
  vis->add_option("--image", vis_image, "Input image")->required();
  vis->add_option("--methods", vis_methods, "Comma-separated methods")->capture_default_str();
  vis->add_option("--out", vis_out, "Output directory")->required();
  vis->add_option("--id", vis_id, "Name prefix (default: image file stem)");
  vis->add_option("--eyes", vis_eyes, "Eye centres lx,ly,rx,ry in source pixels");
  vis->add_option("--columns", vis_columns, "Contact sheet columns")->capture_default_str();
  vis_flags.add_to(vis);

  // serve
  auto* srv = app.add_subcommand("serve", "Run the HTTP analysis service");
  std::vector<std::string> srv_models;
  std::string srv_host = "127.0.0.1", srv_static;
  int srv_port = 8080;
  ExtractFlags srv_flags;
  srv->add_option("--model", srv_models, "Model JSON (repeatable)");
  srv->add_option("--host", srv_host, "Bind address")->capture_default_str();
  srv->add_option("--port", srv_port, "Port (0 = any free port)")->capture_default_str();
  srv->add_option("--static-dir", srv_static, "Serve a UI bundle from this directory");
  srv_flags.add_to(srv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*pre) {
      auto manifest = dataset::load_manifest(pre_manifest, {parse_missing(pre_missing), &std::cerr});
      dataset::DatasetManifest aligned = manifest;
      parallel_for(manifest.records.size(), [&](std::size_t i) {
        const auto& rec = manifest.records[i];
        auto face = dataset::load_face(rec);
        fs::path png = fs::path(pre_out) / (rec.id + ".png");
        save_png(png, face.pixels);
        nlohmann::json side = {{"id", rec.id},
                               {"source", rec.path.string()},
                               {"source_sha256", sha256_hex(read_text_file(rec.path))},
                               {"aligned_sha256", sha256_hex(read_text_file(png))},
                               {"landmarks", rec.landmarks.has_value()}};
        write_text_file(fs::path(pre_out) / (rec.id + ".json"), side.dump(2) + "\n");
        aligned.records[i].path = fs::absolute(png);
        aligned.records[i].landmarks.reset();
      });
      dataset::write_manifest(fs::path(pre_out) / "aligned.csv", aligned);
      std::cout << "aligned " << manifest.records.size() << " faces into " << pre_out << "\n";
    } else if (*ext) {
      auto parts = parse_fusion(ext_method);
      auto cfg = ext_flags.build();
      auto manifest = dataset::load_manifest(ext_manifest, {parse_missing(ext_missing), &std::cerr});
      std::vector<features::FeatureRow> rows(manifest.records.size());
      parallel_for(rows.size(), [&](std::size_t i) {
        rows[i] = {manifest.records[i].id, vector_for(manifest.records[i], parts, cfg)};
      });
      features::write_vectors_csv(ext_out, rows);
      std::cout << "wrote " << rows.size() << " vectors of dimension "
                << (rows.empty() ? 0 : rows.front().vector.dim()) << " to " << ext_out << "\n";
    } else if (*trn) {
      auto params = trn_flags.build();
      auto labels = labels_of(dataset::load_manifest(trn_manifest, {dataset::MissingFilePolicy::warn, nullptr}));
      std::vector<features::FeatureVector> X;
      std::vector<Label> y;
      std::vector<std::string> ids;
      collect(features::read_vectors_csv(trn_vectors), labels, X, y, ids);
      auto model = forest::train_forest(X, y, params, ids);
      if (!trn_calibration.empty()) {
        std::vector<features::FeatureVector> cx;
        std::vector<Label> cy;
        std::vector<std::string> cids;
        collect(features::read_vectors_csv(trn_calibration), labels, cx, cy, cids);
        metrics::ScoreSet set;
        for (std::size_t i = 0; i < cx.size(); ++i) {
          if (cx[i].dim() != model.feature_dim) throw DataError("calibration vectors have the wrong dimension");
          (cy[i] == Label::morph ? set.morph : set.bonafide).push_back(forest::predict_score(model, cx[i]));
        }
        if (set.morph.empty() || set.bonafide.empty()) throw DataError("calibration set needs both classes");
        auto report = metrics::evaluate(set);
        model.operating_points = forest::OperatingPoints{report.eer_threshold, report.bpcer10_threshold,
                                                         report.bpcer20_threshold};
      }
      forest::save_model(model, trn_out);
      std::cout << "trained " << model.trees.size() << " trees on " << X.size() << " samples ("
                << model.method << ", dim " << model.feature_dim << ")\n";
    } else if (*scr) {
      auto model = forest::load_model(scr_model);
      auto labels = labels_of(dataset::load_manifest(scr_manifest, {dataset::MissingFilePolicy::warn, nullptr}));
      std::vector<metrics::ScoredSample> out;
      for (const auto& row : features::read_vectors_csv(scr_vectors)) {
        auto it = labels.find(row.id);
        if (it == labels.end()) throw DataError("id '" + row.id + "' is not in the manifest");
        if (row.vector.dim() != model.feature_dim) {
          throw DataError("vector '" + row.id + "' has dimension " + std::to_string(row.vector.dim()) +
                          ", model expects " + std::to_string(model.feature_dim));
        }
        out.push_back({row.id, it->second, forest::predict_score(model, row.vector)});
      }
      metrics::write_scores_csv(scr_out, out);
      std::cout << "scored " << out.size() << " samples\n";
    } else if (*evl) {
      auto samples = metrics::read_scores_csv(evl_scores);
      auto set = metrics::to_score_set(samples);
      if (set.bonafide.empty() || set.morph.empty()) throw DataError("scores need both bona fide and morph samples");
      auto report = metrics::evaluate(set);
      auto curve = metrics::det_curve(set);
      fs::path dir(evl_out);
      write_text_file(dir / "metrics.json", metrics::report_to_json(report));
      write_text_file(dir / "det.csv", metrics::det_csv(curve));
      save_png(dir / "det.png", render::plot_det({{evl_label, curve, report.eer}}, "DET"));
      std::cout << metrics::report_to_json(report);
    } else if (*loo) {
      auto cfg = protocol::load_run_config(loo_config);
      if (!loo_out.empty()) cfg.output_dir = loo_out;
      if (cfg.output_dir.empty()) throw UsageError("config: missing field 'output_dir' (or pass --out)");
      if (loo_no_cache) cfg.cache = false;
      auto manifest = dataset::load_manifest(cfg.manifest, {cfg.missing_files, &std::cerr});
      auto plan = protocol::make_plan(cfg, manifest);
      std::unique_ptr<protocol::FeatureCache> cache;
      if (cfg.cache) {
        cache = std::make_unique<protocol::FeatureCache>(cfg.cache_dir.empty() ? cfg.output_dir / "cache" : cfg.cache_dir);
      }
      auto report = protocol::run_loo(manifest, plan, {cfg.extract, cache.get(), &std::cerr});
      protocol::write_run_directory(report, plan, cfg.output_dir);
      std::size_t ok = std::count_if(report.cells.begin(), report.cells.end(), [](const auto& c) { return c.ok; });
      std::cout << "cells: " << ok << " ok, " << report.cells.size() - ok << " failed; results in "
                << cfg.output_dir.string() << "\n";
    } else if (*vis) {
      auto methods = features::parse_method_list(vis_methods);
      auto cfg = vis_flags.build();
      auto eyes = parse_eyes(vis_eyes);
      std::string id = vis_id.empty() ? fs::path(vis_image).stem().string() : vis_id;
      auto face = dataset::preprocess_face(load_image(vis_image), eyes, id);
      fs::path dir(vis_out);
      std::vector<std::pair<std::string, Raster>> tiles;
      int failures = 0;
      for (auto m : methods) {
        std::string name(features::to_string(m));
        try {
          auto out = features::extract(face, m, cfg);
          if (!out.map) throw DataError("method has no visual map");
          auto raster = render::render_map(*out.map);
          save_png(dir / (id + "_" + name + ".png"), raster);
          write_text_file(dir / (id + "_" + name + ".json"), render::map_range_json(*out.map));
          tiles.emplace_back(name, std::move(raster));
        } catch (const std::exception& e) {
          ++failures;
          std::cerr << "visualize: " << name << " failed: " << e.what() << "\n";
        }
      }
      if (tiles.empty()) throw DataError("no method rendered");
      save_png(dir / (id + "_contact.png"), render::contact_sheet(tiles, vis_columns));
      std::cout << "rendered " << tiles.size() << " of " << methods.size() << " maps into " << vis_out << "\n";
    } else if (*srv) {
      std::vector<fs::path> paths(srv_models.begin(), srv_models.end());
      auto svc = service::AnalysisService::from_files(paths, srv_flags.build());
      std::optional<fs::path> static_dir;
      if (!srv_static.empty()) static_dir = srv_static;
      service::HttpServer server(svc, static_dir);
      int port = server.bind(srv_host, srv_port);
      std::cout << "listening on http://" << srv_host << ":" << port << "/v1" << std::endl;
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.listen();
      g_server = nullptr;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
