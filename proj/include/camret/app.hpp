// Copyright 2026 The camret Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Command-line front end. Every option lives on the root command so a plain
// key=value config file (--config) can set any of them; flags given on the
// command line override the file.
//
//   camret encode        OfA / fixed-list descriptors for a dataset
//   camret class-vectors per-image class-vector sets for online aggregation
//   camret fit-pca       whitening PCA over a dataset's class vectors
//   camret index         validate and re-normalize a descriptor store
//   camret search        ranked lists for ground-truth queries
//   camret rerank        local re-ranking of an existing ranked list
//   camret evaluate      search every query and report AP / mAP
//   camret class-ranking class appearance ratios over a set of images

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "camret/dataset.hpp"
#include "camret/eval.hpp"
#include "camret/pca.hpp"
#include "camret/pipeline.hpp"
#include "camret/search.hpp"

namespace camret::cli {

struct RunConfig {
  std::string features_root;
  std::string manifest;
  std::string groundtruth;
  std::string roi_sidecar;
  std::string strategy = "ofa";
  std::size_t n_c = 64;
  std::size_t n_pca = 1;
  std::size_t qe = 0;
  std::size_t r = 0;
  std::size_t n_c_rerank = 6;
  std::size_t pca_dims = 0;
  std::string pca_dir;
  std::string pca_from;
  bool allow_same_dataset = false;
  std::string dataset_name;
  std::string class_list;
  std::string index_dir;
  std::string class_vectors_dir;
  std::string descriptors_dir;
  std::string ranked_file;
  std::string query;
  std::string out;
  std::string debug_cams;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void Require(const std::string& value, const char* flag, const char* command) {
  if (value.empty()) throw UsageError(std::string(command) + " requires " + flag);
}

inline Strategy StrategyOf(const RunConfig& cfg) {
  const auto s = ParseStrategy(cfg.strategy);
  if (!s) throw UsageError("unknown strategy '" + cfg.strategy + "' (expected ofa, ona or fixed-list)");
  if (*s == Strategy::kFixedList && cfg.class_list.empty()) {
    throw UsageError("strategy fixed-list requires --class-list");
  }
  return *s;
}

inline std::vector<int> FixedListOf(const RunConfig& cfg) {
  if (cfg.class_list.empty()) return {};
  return ReadClassList(cfg.class_list);
}

inline DatasetManifest ManifestOf(const RunConfig& cfg) {
  if (!cfg.manifest.empty()) return LoadManifest(cfg.manifest);
  if (!cfg.features_root.empty()) return LoadManifest(fs::path(cfg.features_root) / "manifest.txt");
  throw UsageError("--manifest or --features-root is required");
}

inline PcaModel ModelOf(const RunConfig& cfg, const DatasetManifest& manifest, const char* command) {
  Require(cfg.pca_dir, "--pca", command);
  PcaModel model = LoadPcaModel(cfg.pca_dir);
  if (!cfg.pca_from.empty() && model.dataset != cfg.pca_from) {
    throw UsageError("PCA at " + cfg.pca_dir + " was fitted on '" + model.dataset + "', not '" + cfg.pca_from + "'");
  }
  if (!cfg.allow_same_dataset && !model.dataset.empty() && model.dataset == manifest.dataset_name) {
    throw UsageError("PCA was fitted on '" + model.dataset +
                     "', the dataset being searched; fit it on another dataset or pass --allow-same-dataset");
  }
  return model;
}

inline std::size_t ClampClasses(std::size_t n, const DatasetManifest& manifest, std::ostream& err, const char* what) {
  if (n < 1) throw UsageError(std::string(what) + " must be >= 1");
  if (n > manifest.num_classes()) {
    err << "note: " << what << "=" << n << " exceeds the " << manifest.num_classes() << " available classes; using "
        << manifest.num_classes() << "\n";
    return manifest.num_classes();
  }
  return n;
}

inline std::vector<GroundTruth> QueriesOf(const RunConfig& cfg, const DatasetManifest& manifest, const char* command) {
  Require(cfg.groundtruth, "--groundtruth", command);
  auto gts = ParseGroundTruth(cfg.groundtruth);
  if (!cfg.query.empty()) {
    std::erase_if(gts, [&](const GroundTruth& g) { return g.query_id != cfg.query; });
    if (gts.empty()) throw NotFound("query '" + cfg.query + "' not in " + cfg.groundtruth);
  }
  if (!cfg.roi_sidecar.empty()) {
    ApplyRoiSidecar(gts, ReadRoiSidecar(cfg.roi_sidecar));
  } else {
    RescaleRois(gts, [&](const std::string& id) {
      return WithImageContext(id, [&] { return LoadBundle(manifest, id).scale; });
    });
  }
  return gts;
}

inline std::string SafeName(std::string s) {
  std::replace(s.begin(), s.end(), '/', '_');
  return s;
}

inline void WriteTextFile(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw IoError("cannot write " + path.string(), 0);
}

inline void WriteDebugCams(const fs::path& dir, const GroundTruth& gt, std::span<const RerankDetail> details) {
  const fs::path qdir = dir / SafeName(gt.query_id);
  fs::create_directories(qdir);
  std::ostringstream boxes;
  for (const auto& d : details) {
    WritePgm(d.heatmap, qdir / (SafeName(d.image_id) + ".pgm"));
    // class -1 marks the averaged top-2 heatmap
    WriteBoxLine(boxes, d.image_id, -1, d.threshold, d.box);
  }
  WriteTextFile(qdir / "boxes.txt", boxes.str());
}

struct Database {
  std::optional<Index> index;
  std::optional<ClassVectorStore> class_vectors;

  SearchDatabase view() const {
    return {index ? &*index : nullptr, class_vectors ? &*class_vectors : nullptr};
  }
};

inline Database DatabaseOf(const RunConfig& cfg, Strategy strategy, const DatasetManifest& manifest,
                           const PcaModel& model, std::size_t n_c, bool allow_encode, const char* command) {
  Database db;
  if (strategy == Strategy::kOna) {
    Require(cfg.class_vectors_dir, "--class-vectors for strategy ona", command);
    db.class_vectors = LoadClassVectorStore(cfg.class_vectors_dir, cfg.workers);
  } else if (!cfg.index_dir.empty()) {
    db.index = BuildIndex(LoadDescriptorStore(cfg.index_dir));
  } else if (allow_encode) {
    DatasetOptions opts{strategy, n_c, FixedListOf(cfg), cfg.workers};
    db.index = BuildIndex(EncodeDataset(manifest, opts, model));
  } else {
    throw UsageError(std::string(command) + " requires --index");
  }
  return db;
}

inline SearchOptions SearchOptionsOf(const RunConfig& cfg, Strategy strategy, std::size_t n_c) {
  SearchOptions opts;
  opts.strategy = strategy;
  opts.n_classes = n_c;
  opts.fixed_list = FixedListOf(cfg);
  opts.qe = cfg.qe;
  opts.rerank.depth = cfg.r;
  opts.rerank.region_classes = cfg.n_c_rerank;
  opts.rerank.workers = cfg.workers;
  return opts;
}

}  // namespace detail

inline int CmdEncode(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Strategy strategy = detail::StrategyOf(cfg);
  if (strategy == Strategy::kOna) throw UsageError("encode supports ofa and fixed-list; use class-vectors for ona");
  detail::Require(cfg.out, "--out", "encode");
  const auto manifest = detail::ManifestOf(cfg);
  const auto model = detail::ModelOf(cfg, manifest, "encode");
  const std::size_t n_c = detail::ClampClasses(cfg.n_c, manifest, err, "n-c");
  const auto store = EncodeDataset(manifest, {strategy, n_c, detail::FixedListOf(cfg), cfg.workers}, model);
  SaveDescriptorStore(store, cfg.out);
  out << "encoded " << store.ids.size() << " images into " << cfg.out << "\n";
  return 0;
}

inline int CmdClassVectors(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  detail::Require(cfg.out, "--out", "class-vectors");
  const auto manifest = detail::ManifestOf(cfg);
  WriteClassVectorStore(manifest, cfg.out, cfg.workers);
  out << "stored class vectors of " << manifest.entries.size() << " images into " << cfg.out << "\n";
  return 0;
}

inline int CmdFitPca(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  detail::Require(cfg.out, "--out", "fit-pca");
  const Strategy strategy = detail::StrategyOf(cfg);
  const auto manifest = detail::ManifestOf(cfg);
  const std::size_t n_pca = detail::ClampClasses(cfg.n_pca, manifest, err, "n-pca");
  PcaOptions pca;
  pca.components = cfg.pca_dims;
  pca.dataset = cfg.dataset_name.empty() ? manifest.dataset_name : cfg.dataset_name;
  const auto model = FitPcaOnDataset(manifest, {strategy, n_pca, detail::FixedListOf(cfg), cfg.workers}, pca);
  SavePcaModel(model, cfg.out);
  out << "fitted PCA on " << model.training_samples << " class vectors from '" << model.dataset << "' into "
      << cfg.out << "\n";
  return 0;
}

inline int CmdIndex(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  detail::Require(cfg.descriptors_dir, "--descriptors", "index");
  detail::Require(cfg.out, "--out", "index");
  const auto store = LoadDescriptorStore(cfg.descriptors_dir);
  const Index index = BuildIndex(store);
  DescriptorStore normalized;
  normalized.ids = index.ids();
  for (std::size_t i = 0; i < index.size(); ++i) normalized.descriptors.push_back(index.DescriptorAt(i));
  SaveDescriptorStore(normalized, cfg.out);
  out << "indexed " << index.size() << " descriptors of dimension " << index.dim() << " into " << cfg.out << "\n";
  return 0;
}

inline int CmdSearch(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  detail::Require(cfg.out, "--out", "search");
  const Strategy strategy = detail::StrategyOf(cfg);
  const auto manifest = detail::ManifestOf(cfg);
  const auto model = detail::ModelOf(cfg, manifest, "search");
  const std::size_t n_c = detail::ClampClasses(cfg.n_c, manifest, err, "n-c");
  const auto gts = detail::QueriesOf(cfg, manifest, "search");
  const auto db = detail::DatabaseOf(cfg, strategy, manifest, model, n_c, false, "search");
  const auto opts = detail::SearchOptionsOf(cfg, strategy, n_c);
  for (const auto& gt : gts) {
    const auto result = SearchQuery(manifest, gt, model, db.view(), opts);
    std::ostringstream text;
    WriteRankedList(text, result.ranked);
    detail::WriteTextFile(fs::path(cfg.out) / (detail::SafeName(gt.query_id) + ".txt"), text.str());
    if (!cfg.debug_cams.empty() && !result.rerank_details.empty()) {
      detail::WriteDebugCams(cfg.debug_cams, gt, result.rerank_details);
    }
  }
  out << "wrote " << gts.size() << " ranked lists into " << cfg.out << "\n";
  return 0;
}

inline int CmdRerank(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  detail::Require(cfg.ranked_file, "--ranked", "rerank");
  detail::Require(cfg.query, "--query", "rerank");
  detail::Require(cfg.out, "--out", "rerank");
  if (cfg.r < 1) throw UsageError("rerank requires --r >= 1");
  const auto manifest = detail::ManifestOf(cfg);
  const auto model = detail::ModelOf(cfg, manifest, "rerank");
  const auto gts = detail::QueriesOf(cfg, manifest, "rerank");
  const GroundTruth& gt = gts.front();

  std::ifstream in(cfg.ranked_file);
  if (!in) throw NotFound("cannot open ranked list " + cfg.ranked_file);
  const RankedList ranked = ReadRankedList(in);

  RerankOptions opts;
  opts.depth = cfg.r;
  opts.region_classes = cfg.n_c_rerank;
  opts.workers = cfg.workers;
  std::vector<RerankDetail> details;
  const FeatureBundle query = WithImageContext(gt.query_image_id, [&] { return LoadBundle(manifest, gt.query_image_id); });
  const RankedList result = Rerank(query, gt.roi, ranked, manifest, model, opts,
                                   [&](const std::string& id) { return LoadBundle(manifest, id); }, &details);
  std::ostringstream text;
  WriteRankedList(text, result);
  detail::WriteTextFile(cfg.out, text.str());
  if (!cfg.debug_cams.empty()) {
    detail::WriteDebugCams(cfg.debug_cams, gt, details);
    std::ostringstream dbg;
    WriteRerankDetails(dbg, details);
    detail::WriteTextFile(fs::path(cfg.debug_cams) / detail::SafeName(gt.query_id) / "rerank.txt", dbg.str());
  }
  out << "re-ranked top " << std::min(cfg.r, ranked.size()) << " of " << ranked.size() << " into " << cfg.out << "\n";
  return 0;
}

inline int CmdEvaluate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Strategy strategy = detail::StrategyOf(cfg);
  const auto manifest = detail::ManifestOf(cfg);
  const auto model = detail::ModelOf(cfg, manifest, "evaluate");
  const std::size_t n_c = detail::ClampClasses(cfg.n_c, manifest, err, "n-c");
  const auto gts = detail::QueriesOf(cfg, manifest, "evaluate");
  const auto db = detail::DatabaseOf(cfg, strategy, manifest, model, n_c, true, "evaluate");
  auto opts = detail::SearchOptionsOf(cfg, strategy, n_c);
  opts.rerank.workers = 1;  // parallelism is over queries

  std::vector<QueryResult> results(gts.size());
  ParallelFor(gts.size(), cfg.workers, [&](std::size_t i) {
    const auto outcome = SearchQuery(manifest, gts[i], model, db.view(), opts);
    results[i] = {gts[i].query_id, AveragePrecision(outcome.ranked, gts[i])};
  });
  for (const auto& r : results) {
    if (!r.ap) err << "warning: query " << r.query_id << " has no positives; excluded from mAP\n";
  }
  std::ostringstream report;
  WriteReport(report, results);
  if (!cfg.out.empty()) detail::WriteTextFile(cfg.out, report.str());
  out << report.str();
  return 0;
}

inline int CmdClassRanking(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto manifest = detail::ManifestOf(cfg);
  const std::size_t n_c = detail::ClampClasses(cfg.n_c, manifest, err, "n-c");
  std::vector<std::string> images;
  if (!cfg.groundtruth.empty()) {
    for (const auto& gt : ParseGroundTruth(cfg.groundtruth)) images.push_back(gt.query_image_id);
  } else {
    for (const auto& e : manifest.entries) images.push_back(e.image_id);
  }
  std::vector<std::vector<float>> scores(images.size());
  ParallelFor(images.size(), cfg.workers, [&](std::size_t i) {
    const auto b = WithImageContext(images[i], [&] { return LoadBundle(manifest, images[i]); });
    scores[i].assign(b.class_scores.data().begin(), b.class_scores.data().end());
  });
  std::ostringstream text;
  text << "# class_id\tname\tratio (top-" << n_c << " over " << images.size() << " images)\n";
  char ratio[32];
  for (const auto& cr : ClassAppearanceRanking(scores, n_c)) {
    std::snprintf(ratio, sizeof ratio, "%.6f", cr.ratio);
    text << cr.class_id << '\t' << manifest.class_names[static_cast<std::size_t>(cr.class_id)] << '\t' << ratio << '\n';
  }
  if (!cfg.out.empty()) {
    detail::WriteTextFile(cfg.out, text.str());
  } else {
    out << text.str();
  }
  return 0;
}

/// Parses `args` (without the program name) and runs one subcommand.
/// Returns 0 on success, 1 on pipeline errors, 2 on usage errors.
inline int Run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  RunConfig cfg;
  CLI::App app{"camret: CAM-weighted convolutional feature retrieval", "camret"};
  app.set_config("--config", "", "plain key=value file; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();

  app.add_option("--features-root", cfg.features_root, "dataset directory holding manifest.txt");
  app.add_option("--manifest", cfg.manifest, "dataset manifest file");
  app.add_option("--groundtruth", cfg.groundtruth, "Oxford/Paris ground-truth directory");
  app.add_option("--roi-sidecar", cfg.roi_sidecar, "query ROIs already in resized-image pixels");
  app.add_option("--strategy", cfg.strategy, "ofa | ona | fixed-list")->capture_default_str();
  app.add_option("--n-c", cfg.n_c, "classes aggregated per descriptor")->capture_default_str();
  app.add_option("--n-pca", cfg.n_pca, "classes per image used to fit PCA")->capture_default_str();
  app.add_option("--qe", cfg.qe, "query expansion depth, 0 = off")->capture_default_str();
  app.add_option("--r", cfg.r, "re-ranking depth, 0 = off")->capture_default_str();
  app.add_option("--n-c-rerank", cfg.n_c_rerank, "classes used to describe re-ranking regions")->capture_default_str();
  app.add_option("--pca-dims", cfg.pca_dims, "keep this many PCA components, 0 = all")->capture_default_str();
  app.add_option("--pca", cfg.pca_dir, "PCA model directory");
  app.add_option("--pca-from", cfg.pca_from, "dataset the PCA model must have been fitted on");
  app.add_flag("--allow-same-dataset", cfg.allow_same_dataset, "permit a PCA fitted on the evaluated dataset");
  app.add_option("--dataset-name", cfg.dataset_name, "name recorded in the PCA sidecar (default: manifest's)");
  app.add_option("--class-list", cfg.class_list, "class list for the fixed-list strategy");
  app.add_option("--index", cfg.index_dir, "descriptor store to search");
  app.add_option("--class-vectors", cfg.class_vectors_dir, "class-vector store (ona)");
  app.add_option("--descriptors", cfg.descriptors_dir, "descriptor store to index");
  app.add_option("--ranked", cfg.ranked_file, "ranked list to re-rank");
  app.add_option("--query", cfg.query, "restrict to one query id");
  app.add_option("--out", cfg.out, "output file or directory");
  app.add_option("--debug-cams", cfg.debug_cams, "write re-ranking heatmaps (PGM) and boxes here");
  app.add_option("--workers", cfg.workers, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  using Handler = int (*)(const RunConfig&, std::ostream&, std::ostream&);
  const std::vector<std::pair<std::string, std::pair<std::string, Handler>>> commands = {
      {"encode", {"descriptors for every image (ofa, fixed-list)", CmdEncode}},
      {"class-vectors", {"store per-image class vectors for online aggregation", CmdClassVectors}},
      {"fit-pca", {"fit the whitening PCA on a dataset", CmdFitPca}},
      {"index", {"validate and normalize a descriptor store", CmdIndex}},
      {"search", {"rank the dataset for ground-truth queries", CmdSearch}},
      {"rerank", {"re-rank an existing ranked list", CmdRerank}},
      {"evaluate", {"search all queries and report mAP", CmdEvaluate}},
      {"class-ranking", {"class appearance ratios", CmdClassRanking}},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, info] : commands) subs.push_back(app.add_subcommand(name, info.first));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (subs[i]->parsed()) return commands[i].second.second(cfg, out, err);
    }
    err << "usage error: no subcommand\n";
    return 2;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error [" << e.module() << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

inline int Main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return Run(args);
}

}  // namespace camret::cli
