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

// Dataset-level operations shared by the command-line front end: descriptor
// and class-vector stores, PCA fitting over a manifest, dataset encoding and
// the per-query search flow.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "camret/dataset.hpp"
#include "camret/descriptor.hpp"
#include "camret/encoder.hpp"
#include "camret/errors.hpp"
#include "camret/eval.hpp"
#include "camret/parallel.hpp"
#include "camret/pca.hpp"
#include "camret/search.hpp"
#include "camret/tensor_io.hpp"

namespace camret {

enum class Strategy { kOfa, kOna, kFixedList };

inline std::optional<Strategy> ParseStrategy(const std::string& s) {
  if (s == "ofa") return Strategy::kOfa;
  if (s == "ona") return Strategy::kOna;
  if (s == "fixed-list") return Strategy::kFixedList;
  return std::nullopt;
}

/// Class ids from a fixed-list file: first column of every non-comment line
/// (the format written by `class-ranking`).
inline std::vector<int> ReadClassList(const fs::path& path) {
  std::vector<int> ids;
  for (const auto& line : ReadLines(path)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    int id = 0;
    if (!(fields >> id)) throw FormatError(path.string() + ": bad class list line '" + line + "'");
    ids.push_back(id);
  }
  if (ids.empty()) throw FormatError(path.string() + ": class list is empty");
  return ids;
}

/// Classes used to describe `bundle` under a strategy. `n` is clamped to the
/// number of available classes.
inline std::vector<int> SelectClasses(Strategy strategy, const FeatureBundle& bundle, std::size_t n,
                                      std::span<const int> fixed_list) {
  if (n < 1) throw ArgumentError("number of classes must be >= 1");
  if (strategy == Strategy::kFixedList) {
    if (fixed_list.empty()) throw ArgumentError("fixed-list strategy needs a class list");
    const std::size_t take = std::min(n, fixed_list.size());
    return {fixed_list.begin(), fixed_list.begin() + static_cast<std::ptrdiff_t>(take)};
  }
  return TopClasses(bundle, std::min<std::size_t>(n, bundle.class_scores.size()));
}

template <typename Fn>
auto WithImageContext(const std::string& image_id, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ImageError&) {
    throw;
  } catch (const Error& e) {
    throw ImageError(e, image_id);
  }
}

// Descriptor store: descriptors.cwcf (N x K) plus ids.txt (row -> image_id).

struct DescriptorStore {
  std::vector<std::string> ids;
  std::vector<Descriptor> descriptors;
};

inline void SaveDescriptorStore(const DescriptorStore& store, const fs::path& dir) {
  if (store.ids.empty()) throw ArgumentError("descriptor store is empty");
  fs::create_directories(dir);
  const std::size_t dim = store.descriptors.front().dim();
  Tensor matrix({store.descriptors.size(), dim});
  for (std::size_t i = 0; i < store.descriptors.size(); ++i) {
    auto row = matrix.slab(i);
    std::copy(store.descriptors[i].values.begin(), store.descriptors[i].values.end(), row.begin());
  }
  WriteTensorFile(matrix, dir / "descriptors.cwcf");
  std::ofstream ids(dir / "ids.txt", std::ios::trunc);
  for (const auto& id : store.ids) ids << id << "\n";
  if (!ids) throw IoError("cannot write " + (dir / "ids.txt").string(), 0);
}

inline DescriptorStore LoadDescriptorStore(const fs::path& dir) {
  DescriptorStore store;
  const Tensor matrix = ReadTensorFile(dir / "descriptors.cwcf");
  RequireRank(matrix, 2, "descriptor matrix");
  store.ids = ReadLines(dir / "ids.txt");
  if (store.ids.size() != matrix.dim(0)) {
    throw ConsistencyError("descriptor store has " + std::to_string(matrix.dim(0)) + " rows but " +
                           std::to_string(store.ids.size()) + " ids");
  }
  for (std::size_t i = 0; i < matrix.dim(0); ++i) {
    auto row = matrix.slab(i);
    Descriptor d;
    d.values.assign(row.begin(), row.end());
    d.degenerate = std::all_of(row.begin(), row.end(), [](float v) { return v == 0.0f; });
    store.descriptors.push_back(std::move(d));
  }
  return store;
}

inline Index BuildIndex(const DescriptorStore& store) { return Index::Build(store.descriptors, store.ids); }

// Class-vector store for online aggregation: one C x K tensor per image,
// named by manifest row (000000.cwcf, ...), plus ids.txt.

inline std::string StoreFileName(std::size_t row) {
  char name[32];
  std::snprintf(name, sizeof name, "%06zu.cwcf", row);
  return name;
}

inline void WriteClassVectorStore(const DatasetManifest& manifest, const fs::path& dir, std::size_t workers) {
  fs::create_directories(dir);
  std::vector<int> all(manifest.num_classes());
  std::iota(all.begin(), all.end(), 0);
  ParallelFor(manifest.entries.size(), workers, [&](std::size_t i) {
    const auto& id = manifest.entries[i].image_id;
    WithImageContext(id, [&] {
      const FeatureBundle bundle = LoadBundle(manifest, id);
      const ClassVectorSet set = ComputeClassVectorSet(bundle, manifest, all);
      WriteTensorFile(set.vectors, dir / StoreFileName(i));
    });
  });
  std::ofstream ids(dir / "ids.txt", std::ios::trunc);
  for (const auto& e : manifest.entries) ids << e.image_id << "\n";
  if (!ids) throw IoError("cannot write " + (dir / "ids.txt").string(), 0);
}

struct ClassVectorStore {
  std::vector<std::string> ids;
  std::vector<ClassVectorSet> sets;
};

inline ClassVectorStore LoadClassVectorStore(const fs::path& dir, std::size_t workers = 1) {
  ClassVectorStore store;
  store.ids = ReadLines(dir / "ids.txt");
  store.sets.resize(store.ids.size());
  ParallelFor(store.ids.size(), workers, [&](std::size_t i) {
    ClassVectorSet& set = store.sets[i];
    set.image_id = store.ids[i];
    set.vectors = ReadTensorFile(dir / StoreFileName(i));
    RequireRank(set.vectors, 2, "class vector set");
    set.class_ids.resize(set.vectors.dim(0));
    std::iota(set.class_ids.begin(), set.class_ids.end(), 0);
  });
  return store;
}

/// Online aggregation: every stored image described with the same classes.
inline Index OnaIndex(const ClassVectorStore& store, std::span<const int> class_ids, const PcaModel& model,
                      std::size_t workers = 1) {
  std::vector<Descriptor> descriptors(store.sets.size());
  ParallelFor(store.sets.size(), workers, [&](std::size_t i) {
    descriptors[i] = WithImageContext(store.ids[i], [&] { return AggregateRows(store.sets[i], class_ids, model); });
  });
  return Index::Build(descriptors, store.ids);
}

struct DatasetOptions {
  Strategy strategy = Strategy::kOfa;
  std::size_t n_classes = 64;
  std::vector<int> fixed_list;
  std::size_t workers = 1;
};

/// PCA fitted on the class vectors of every image in the manifest, using
/// `options.n_classes` classes per image (N_Im * N_pca samples).
inline PcaModel FitPcaOnDataset(const DatasetManifest& manifest, const DatasetOptions& options,
                                PcaOptions pca_options = {}) {
  std::vector<std::vector<std::vector<double>>> per_image(manifest.entries.size());
  ParallelFor(manifest.entries.size(), options.workers, [&](std::size_t i) {
    const auto& id = manifest.entries[i].image_id;
    per_image[i] = WithImageContext(id, [&] {
      const FeatureBundle bundle = LoadBundle(manifest, id);
      const auto classes = SelectClasses(options.strategy, bundle, options.n_classes, options.fixed_list);
      return PcaTrainingVectors(ComputeClassVectorSet(bundle, manifest, classes));
    });
  });
  std::vector<std::vector<double>> training;
  for (auto& vs : per_image) {
    for (auto& v : vs) training.push_back(std::move(v));
  }
  if (pca_options.dataset.empty()) pca_options.dataset = manifest.dataset_name;
  return FitPca(training, pca_options);
}

/// Offline (per-image classes) or fixed-list descriptors for every image,
/// in manifest order.
inline DescriptorStore EncodeDataset(const DatasetManifest& manifest, const DatasetOptions& options,
                                     const PcaModel& model) {
  if (options.strategy == Strategy::kOna) {
    throw ArgumentError("online aggregation builds descriptors per query; store class vectors instead");
  }
  DescriptorStore store;
  store.ids.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) store.ids.push_back(e.image_id);
  store.descriptors.resize(manifest.entries.size());
  ParallelFor(manifest.entries.size(), options.workers, [&](std::size_t i) {
    const auto& id = manifest.entries[i].image_id;
    store.descriptors[i] = WithImageContext(id, [&] {
      const FeatureBundle bundle = LoadBundle(manifest, id);
      const auto classes = SelectClasses(options.strategy, bundle, options.n_classes, options.fixed_list);
      return EncodeWithClasses(bundle, manifest, classes, model);
    });
  });
  return store;
}

struct SearchOptions {
  Strategy strategy = Strategy::kOfa;
  std::size_t n_classes = 64;
  std::vector<int> fixed_list;
  std::size_t qe = 0;
  RerankOptions rerank;  // rerank.depth == 0 disables re-ranking
};

/// Where database descriptors come from: a prebuilt index (OfA, fixed list)
/// or stored class vectors aggregated per query (OnA).
struct SearchDatabase {
  const Index* index = nullptr;
  const ClassVectorStore* class_vectors = nullptr;
};

struct SearchOutcome {
  RankedList ranked;
  std::vector<RerankDetail> rerank_details;
};

/// Full query flow: ROI descriptor, cosine ranking, optional query expansion,
/// then optional local re-ranking of the expanded ranking.
inline SearchOutcome SearchQuery(const DatasetManifest& manifest, const GroundTruth& gt, const PcaModel& model,
                                 const SearchDatabase& db, const SearchOptions& options) {
  return WithImageContext(gt.query_image_id, [&] {
    const FeatureBundle query = LoadBundle(manifest, gt.query_image_id);
    const auto classes = SelectClasses(options.strategy, query, options.n_classes, options.fixed_list);
    const Descriptor q = EncodeWithClasses(query, manifest, classes, model, RoiCells(query, gt.roi));

    std::optional<Index> ona;
    const Index* index = db.index;
    if (options.strategy == Strategy::kOna) {
      if (!db.class_vectors) throw ArgumentError("online aggregation needs a class-vector store");
      ona = OnaIndex(*db.class_vectors, classes, model);
      index = &*ona;
    }
    if (!index) throw ArgumentError("search needs a descriptor index");

    SearchOutcome out;
    out.ranked = Query(*index, q);
    if (options.qe > 0) out.ranked = Query(*index, ExpandQuery(q, out.ranked, *index, options.qe));
    if (options.rerank.depth > 0) {
      auto loader = [&](const std::string& id) { return LoadBundle(manifest, id); };
      out.ranked = Rerank(query, gt.roi, out.ranked, manifest, model, options.rerank, loader, &out.rerank_details);
    }
    return out;
  });
}

}  // namespace camret
