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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "camret/cam.hpp"
#include "camret/dataset.hpp"
#include "camret/descriptor.hpp"
#include "camret/encoder.hpp"
#include "camret/errors.hpp"
#include "camret/parallel.hpp"
#include "camret/pca.hpp"
#include "camret/tensor.hpp"

namespace camret {

inline constexpr double kIndexNormTolerance = 1e-4;

struct RankedEntry {
  std::string image_id;
  double score = 0.0;
  bool degenerate = false;

  friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

using RankedList = std::vector<RankedEntry>;

/// Ranking order: usable entries before degenerate ones, then descending
/// score, then ascending image id.
inline bool RanksBefore(const RankedEntry& a, const RankedEntry& b) {
  if (a.degenerate != b.degenerate) return !a.degenerate;
  if (a.score != b.score) return a.score > b.score;
  return a.image_id < b.image_id;
}

/// Immutable matrix of unit-norm descriptors, searched exhaustively.
class Index {
 public:
  Index() = default;

  static Index Build(std::span<const Descriptor> descriptors, std::vector<std::string> ids) {
    if (descriptors.size() != ids.size()) {
      throw ArgumentError("index needs one id per descriptor (" + std::to_string(descriptors.size()) + " vs " +
                          std::to_string(ids.size()) + ")");
    }
    Index index;
    index.ids_ = std::move(ids);
    for (std::size_t i = 0; i < index.ids_.size(); ++i) {
      if (!index.lookup_.emplace(index.ids_[i], i).second) {
        throw DuplicateId("duplicate image id in index: " + index.ids_[i]);
      }
    }
    if (descriptors.empty()) return index;

    const std::size_t dim = descriptors.front().dim();
    if (dim == 0) throw ShapeError("descriptors have dimension 0");
    index.matrix_ = Tensor({descriptors.size(), dim});
    index.degenerate_.assign(descriptors.size(), false);
    for (std::size_t i = 0; i < descriptors.size(); ++i) {
      const auto& d = descriptors[i];
      if (d.dim() != dim) throw ShapeError("descriptor " + index.ids_[i] + " has dimension " + std::to_string(d.dim()));
      const double norm = L2Norm<float>(d.values);
      if (d.degenerate || norm == 0.0) {
        index.degenerate_[i] = true;
        continue;
      }
      if (std::abs(norm - 1.0) > kIndexNormTolerance) {
        throw NormalizationError("descriptor " + index.ids_[i] + " has norm " + std::to_string(norm));
      }
      auto row = index.matrix_.slab(i);
      for (std::size_t k = 0; k < dim; ++k) row[k] = static_cast<float>(static_cast<double>(d.values[k]) / norm);
    }
    return index;
  }

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return matrix_.empty() ? 0 : matrix_.dim(1); }
  const std::vector<std::string>& ids() const { return ids_; }
  const Tensor& matrix() const { return matrix_; }
  bool degenerate(std::size_t i) const { return degenerate_[i]; }

  std::span<const float> row(std::size_t i) const { return matrix_.slab(i); }

  std::optional<std::size_t> Find(const std::string& id) const {
    auto it = lookup_.find(id);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

  Descriptor DescriptorAt(std::size_t i) const {
    Descriptor d;
    auto r = row(i);
    d.values.assign(r.begin(), r.end());
    d.degenerate = degenerate_[i];
    return d;
  }

 private:
  Tensor matrix_;
  std::vector<std::string> ids_;
  std::vector<bool> degenerate_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

/// Cosine scores of every indexed row against `q`, fully sorted.
inline RankedList Query(const Index& index, const Descriptor& q) {
  if (index.size() > 0 && q.dim() != index.dim()) {
    throw ShapeError("query has dimension " + std::to_string(q.dim()) + ", index has " +
                     std::to_string(index.dim()));
  }
  RankedList out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    out[i].image_id = index.ids()[i];
    out[i].degenerate = index.degenerate(i);
    out[i].score = (q.degenerate || out[i].degenerate) ? 0.0 : Dot(q.values, index.row(i));
  }
  std::sort(out.begin(), out.end(), RanksBefore);
  return out;
}

/// Normalized sum of the query and the top min(qe, N) ranked descriptors.
inline Descriptor ExpandQuery(const Descriptor& q, const RankedList& ranked, const Index& index, std::size_t qe) {
  if (qe < 1) throw ArgumentError("query expansion depth must be >= 1");
  if (index.size() == 0) throw ArgumentError("cannot expand a query against an empty index");
  if (q.dim() != index.dim()) throw ShapeError("query dimension does not match index");
  std::vector<double> sum(q.values.begin(), q.values.end());
  if (q.degenerate) std::fill(sum.begin(), sum.end(), 0.0);
  const std::size_t take = std::min({qe, ranked.size(), index.size()});
  for (std::size_t r = 0; r < take; ++r) {
    const auto pos = index.Find(ranked[r].image_id);
    if (!pos) throw NotFound("ranked id '" + ranked[r].image_id + "' not in index");
    if (index.degenerate(*pos)) continue;
    auto row = index.row(*pos);
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += row[k];
  }
  const bool ok = NormalizeInPlace(sum);
  return ToDescriptor(sum, !ok);
}

struct RerankOptions {
  std::size_t depth = 0;          // R; 0 leaves the list untouched
  std::size_t region_classes = 6; // classes used to describe regions
  std::size_t heatmap_classes = 2;
  std::vector<double> thresholds = {0.01, 0.10, 0.20, 0.30, 0.40};
  std::size_t workers = 1;
};

/// Per-candidate outcome, for debugging and the rerank report.
struct RerankDetail {
  std::string image_id;
  double score = 0.0;
  bool degenerate = true;
  double threshold = 0.0;
  RegionBox box;
  bool fallback = false;  // heatmap had no positive value; whole image used
  Tensor heatmap;         // averaged heatmap on the conv grid
};

using BundleLoader = std::function<FeatureBundle(const std::string&)>;

/// Averaged normalized heatmap of `class_ids` on the target's conv grid.
inline Tensor AveragedHeatmap(const FeatureBundle& target, const DatasetManifest& manifest,
                              std::span<const int> class_ids) {
  std::vector<Cam> cams;
  cams.reserve(class_ids.size());
  for (int c : class_ids) cams.push_back({c, ClassHeatmap(target, manifest, c)});
  return AverageCams(cams);
}

/// Scores one candidate image: boxes from the averaged heatmap at every
/// threshold, each box encoded with `region_classes`, best cosine kept.
inline RerankDetail ScoreCandidate(const Descriptor& query_desc, const FeatureBundle& target,
                                   const DatasetManifest& manifest, const PcaModel& model,
                                   std::span<const int> heatmap_classes, std::span<const int> region_classes,
                                   std::span<const double> thresholds) {
  RerankDetail detail;
  detail.image_id = target.image_id;
  detail.heatmap = AveragedHeatmap(target, manifest, heatmap_classes);
  const RegionBox full = RegionBox::Full(target.conv_features.dim(1), target.conv_features.dim(2));

  std::vector<std::pair<RegionBox, Descriptor>> cache;
  bool any_fallback = false;
  for (double threshold : thresholds) {
    RegionBox box = full;
    bool fallback = false;
    try {
      box = ExtractBox(detail.heatmap, threshold);
    } catch (const DegenerateHeatmap&) {
      fallback = true;
      any_fallback = true;
    }
    auto hit = std::find_if(cache.begin(), cache.end(), [&](const auto& e) { return e.first == box; });
    if (hit == cache.end()) {
      cache.emplace_back(box, EncodeWithClasses(target, manifest, region_classes, model, box));
      hit = cache.end() - 1;
    }
    const Descriptor& region = hit->second;
    if (region.degenerate || query_desc.degenerate) continue;
    const double score = Dot(query_desc.values, region.values);
    if (detail.degenerate || score > detail.score) {
      detail.score = score;
      detail.degenerate = false;
      detail.threshold = threshold;
      detail.box = box;
      detail.fallback = fallback;
    }
  }
  if (detail.degenerate) {
    detail.score = 0.0;
    detail.box = full;
    detail.fallback = any_fallback;
    detail.threshold = thresholds.empty() ? 0.0 : thresholds.front();
  }
  return detail;
}

/// Re-scores the top `options.depth` entries by matching the query ROI
/// against CAM-derived regions of each candidate. The re-scored block is
/// re-sorted; entries beyond it keep their original order and scores.
inline RankedList Rerank(const FeatureBundle& query, const Roi& query_roi, const RankedList& ranked,
                         const DatasetManifest& manifest, const PcaModel& model, const RerankOptions& options,
                         const BundleLoader& load, std::vector<RerankDetail>* details = nullptr) {
  const std::size_t depth = std::min(options.depth, ranked.size());
  if (details) details->clear();
  if (depth == 0) return ranked;

  const std::size_t classes = manifest.num_classes();
  const auto heatmap_classes = TopClasses(query, std::min(options.heatmap_classes, classes));
  const auto region_classes = TopClasses(query, std::min(options.region_classes, classes));
  const Descriptor query_desc =
      EncodeWithClasses(query, manifest, region_classes, model, RoiCells(query, query_roi));

  std::vector<RerankDetail> scored(depth);
  ParallelFor(depth, options.workers, [&](std::size_t i) {
    const std::string& id = ranked[i].image_id;
    try {
      const FeatureBundle target = load(id);
      scored[i] = ScoreCandidate(query_desc, target, manifest, model, heatmap_classes, region_classes,
                                 options.thresholds);
    } catch (const ImageError&) {
      throw;
    } catch (const Error& e) {
      throw ImageError(e, id);
    }
  });

  RankedList out;
  out.reserve(ranked.size());
  for (const auto& d : scored) out.push_back({d.image_id, d.score, d.degenerate});
  std::sort(out.begin(), out.end(), RanksBefore);
  out.insert(out.end(), ranked.begin() + static_cast<std::ptrdiff_t>(depth), ranked.end());
  if (details) *details = std::move(scored);
  return out;
}

/// "rank<TAB>image_id<TAB>score" lines, rank starting at 1, 9 decimals.
inline void WriteRankedList(std::ostream& out, const RankedList& list) {
  char score[48];
  for (std::size_t i = 0; i < list.size(); ++i) {
    std::snprintf(score, sizeof score, "%.9f", list[i].score);
    out << (i + 1) << '\t' << list[i].image_id << '\t' << score << '\n';
  }
}

inline RankedList ReadRankedList(std::istream& in) {
  RankedList list;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::size_t rank = 0;
    RankedEntry e;
    if (!(fields >> rank >> e.image_id >> e.score)) throw FormatError("bad ranked list line: '" + line + "'");
    list.push_back(std::move(e));
  }
  return list;
}

/// Rerank debug lines: image_id, score, threshold, row_min, col_min,
/// row_max, col_max, fallback flag.
inline void WriteRerankDetails(std::ostream& out, std::span<const RerankDetail> details) {
  char buf[96];
  for (const auto& d : details) {
    std::snprintf(buf, sizeof buf, "%.9f\t%.2f", d.score, d.threshold);
    out << d.image_id << '\t' << buf << '\t' << d.box.row_min << '\t' << d.box.col_min << '\t' << d.box.row_max
        << '\t' << d.box.col_max << '\t' << (d.fallback ? "fallback" : "cam") << '\n';
  }
}

}  // namespace camret
