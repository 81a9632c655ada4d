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
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "camret/cam.hpp"
#include "camret/dataset.hpp"
#include "camret/descriptor.hpp"
#include "camret/errors.hpp"
#include "camret/pca.hpp"
#include "camret/tensor.hpp"

namespace camret {

/// Floor applied to channel sparsity before the log-ratio, so channels that
/// never fire get a large finite weight.
inline constexpr double kSparsityFloor = 1e-6;

/// Per-channel boost for rare channels: log(sum_n Q_n / Q_k).
struct ChannelWeights {
  std::vector<double> weights;
};

/// Fraction of strictly positive cells in each channel of a K x H x W stack.
inline std::vector<double> ChannelSparsity(const Tensor& features) {
  RequireRank(features, 3, "features");
  const std::size_t channels = features.dim(0);
  const double area = static_cast<double>(features.dim(1) * features.dim(2));
  std::vector<double> q(channels);
  for (std::size_t k = 0; k < channels; ++k) {
    auto plane = features.slab(k);
    const auto nonzero = std::count_if(plane.begin(), plane.end(), [](float v) { return v > 0.0f; });
    q[k] = static_cast<double>(nonzero) / area;
  }
  return q;
}

inline ChannelWeights ComputeChannelWeights(std::span<const double> sparsity) {
  if (sparsity.empty()) throw ArgumentError("channel weights need at least one channel");
  double total = 0.0;
  for (double q : sparsity) total += std::max(q, kSparsityFloor);
  ChannelWeights cw;
  cw.weights.reserve(sparsity.size());
  for (double q : sparsity) cw.weights.push_back(std::log(total / std::max(q, kSparsityFloor)));
  return cw;
}

/// f_k = cw_k * sum_{i,j} features[k,i,j] * heat[i,j]. The heatmap must be
/// on the same H x W grid as the features.
inline std::vector<double> ClassVector(const Tensor& features, const Tensor& heat, const ChannelWeights& cw) {
  RequireRank(features, 3, "features");
  RequireRank(heat, 2, "heatmap");
  if (heat.dim(0) != features.dim(1) || heat.dim(1) != features.dim(2)) {
    throw ShapeError("heatmap " + ShapeString(heat.shape()) + " does not match feature grid " +
                     ShapeString(features.shape()));
  }
  if (cw.weights.size() != features.dim(0)) {
    throw ShapeError("channel weights have " + std::to_string(cw.weights.size()) + " entries for " +
                     std::to_string(features.dim(0)) + " channels");
  }
  auto weights = heat.data();
  std::vector<double> f(features.dim(0));
  for (std::size_t k = 0; k < f.size(); ++k) {
    auto plane = features.slab(k);
    double pooled = 0.0;
    for (std::size_t c = 0; c < plane.size(); ++c) pooled += static_cast<double>(plane[c]) * weights[c];
    f[k] = cw.weights[k] * pooled;
  }
  return f;
}

/// Plain sum-pooling of each channel.
inline std::vector<double> SumPool(const Tensor& features) {
  RequireRank(features, 3, "features");
  std::vector<double> f(features.dim(0));
  for (std::size_t k = 0; k < f.size(); ++k) {
    double pooled = 0.0;
    for (float v : features.slab(k)) pooled += static_cast<double>(v);
    f[k] = pooled;
  }
  return f;
}

/// Channel-weighted sum-pooling without any spatial weighting; the
/// reference point for class vectors under a uniform heatmap.
inline std::vector<double> ChannelWeightedSumPool(const Tensor& features, const ChannelWeights& cw) {
  RequireRank(features, 3, "features");
  std::vector<double> f(features.dim(0));
  for (std::size_t k = 0; k < f.size(); ++k) {
    double pooled = 0.0;
    for (float v : features.slab(k)) pooled += static_cast<double>(v);
    f[k] = cw.weights.at(k) * pooled;
  }
  return f;
}

/// Ids of the n highest scores, best first; equal scores go to the lower id.
inline std::vector<int> TopClasses(std::span<const float> scores, std::size_t n) {
  if (n < 1 || n > scores.size()) {
    throw ArgumentError("requested " + std::to_string(n) + " top classes out of " + std::to_string(scores.size()));
  }
  std::vector<int> ids(scores.size());
  std::iota(ids.begin(), ids.end(), 0);
  auto better = [&](int a, int b) {
    const float sa = scores[a], sb = scores[b];
    const bool na = std::isnan(sa), nb = std::isnan(sb);
    if (na != nb) return nb;
    if (!na && sa != sb) return sa > sb;
    return a < b;
  };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end(), better);
  ids.resize(n);
  return ids;
}

inline std::vector<int> TopClasses(const FeatureBundle& bundle, std::size_t n) {
  return TopClasses(bundle.class_scores.data(), n);
}

struct ClassRatio {
  int class_id = 0;
  double ratio = 0.0;

  friend bool operator==(const ClassRatio&, const ClassRatio&) = default;
};

/// For every class, the fraction of score vectors whose top-n_c contains it,
/// sorted by descending ratio then ascending id.
inline std::vector<ClassRatio> ClassAppearanceRanking(std::span<const std::vector<float>> score_vectors,
                                                      std::size_t n_c) {
  if (score_vectors.empty()) throw ArgumentError("class appearance ranking needs at least one score vector");
  const std::size_t classes = score_vectors.front().size();
  std::vector<std::size_t> counts(classes, 0);
  for (const auto& scores : score_vectors) {
    if (scores.size() != classes) throw ShapeError("score vectors differ in length");
    for (int c : TopClasses(scores, n_c)) ++counts[static_cast<std::size_t>(c)];
  }
  std::vector<ClassRatio> out(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    out[c] = {static_cast<int>(c), static_cast<double>(counts[c]) / static_cast<double>(score_vectors.size())};
  }
  // Ratios share a denominator, so ordering on counts is exact.
  std::stable_sort(out.begin(), out.end(), [&](const ClassRatio& a, const ClassRatio& b) {
    return counts[static_cast<std::size_t>(a.class_id)] > counts[static_cast<std::size_t>(b.class_id)];
  });
  return out;
}

/// Pixel-space rectangle on the resized image, x to the right, y down.
struct Roi {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  friend bool operator==(const Roi&, const Roi&) = default;
};

/// Cells touched by `roi`: columns floor(x1/stride) .. ceil(x2/stride)-1,
/// rows likewise, clamped to the grid and at least one cell wide.
inline RegionBox RoiToCells(const Roi& roi, int stride, int image_width, int image_height,
                            std::size_t grid_h, std::size_t grid_w) {
  if (stride <= 0) throw RoiError("stride must be positive");
  if (!(roi.x1 < roi.x2) || !(roi.y1 < roi.y2)) throw RoiError("ROI corners are not ordered");
  if (roi.x1 < 0 || roi.y1 < 0 || roi.x2 > image_width || roi.y2 > image_height) {
    throw RoiError("ROI exceeds the " + std::to_string(image_width) + "x" + std::to_string(image_height) + " image");
  }
  auto span = [stride](double lo, double hi, std::size_t cells) {
    auto first = static_cast<std::ptrdiff_t>(std::floor(lo / stride));
    auto last = static_cast<std::ptrdiff_t>(std::ceil(hi / stride)) - 1;
    const auto max_index = static_cast<std::ptrdiff_t>(cells) - 1;
    first = std::clamp<std::ptrdiff_t>(first, 0, max_index);
    last = std::clamp<std::ptrdiff_t>(last, first, max_index);
    return std::pair<std::size_t, std::size_t>(first, last);
  };
  const auto [c0, c1] = span(roi.x1, roi.x2, grid_w);
  const auto [r0, r1] = span(roi.y1, roi.y2, grid_h);
  return {r0, c0, r1, c1};
}

inline Tensor CropFeatures(const Tensor& features, const RegionBox& box) {
  RequireRank(features, 3, "features");
  if (box.row_max >= features.dim(1) || box.col_max >= features.dim(2) || box.row_min > box.row_max ||
      box.col_min > box.col_max) {
    throw RoiError("region outside the feature grid");
  }
  Tensor out({features.dim(0), box.rows(), box.cols()});
  for (std::size_t k = 0; k < features.dim(0); ++k) {
    for (std::size_t i = 0; i < box.rows(); ++i) {
      for (std::size_t j = 0; j < box.cols(); ++j) {
        out.at(k, i, j) = features.at(k, box.row_min + i, box.col_min + j);
      }
    }
  }
  return out;
}

inline Tensor CropFeatures(const Tensor& features, const Roi& roi, int stride, int image_width, int image_height) {
  RequireRank(features, 3, "features");
  return CropFeatures(features,
                      RoiToCells(roi, stride, image_width, image_height, features.dim(1), features.dim(2)));
}

inline Tensor CropMap(const Tensor& map, const RegionBox& box) {
  RequireRank(map, 2, "map");
  Tensor out({box.rows(), box.cols()});
  for (std::size_t i = 0; i < box.rows(); ++i) {
    for (std::size_t j = 0; j < box.cols(); ++j) out.at(i, j) = map.at(box.row_min + i, box.col_min + j);
  }
  return out;
}

/// Normalized CAM of `class_id`, resized onto the bundle's conv grid.
inline Tensor ClassHeatmap(const FeatureBundle& bundle, const DatasetManifest& manifest, int class_id) {
  const Cam cam = NormalizeCam(ComputeCam(bundle.cam_features, manifest.classifier_weights, class_id));
  return ResizeMap(cam.map, bundle.conv_features.dim(1), bundle.conv_features.dim(2));
}

inline void ValidateClassIds(std::span<const int> class_ids, std::size_t num_classes) {
  if (class_ids.empty()) throw ArgumentError("class list is empty");
  std::unordered_set<int> seen;
  for (int c : class_ids) {
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
      throw IndexError("class id " + std::to_string(c) + " outside [0, " + std::to_string(num_classes) + ")");
    }
    if (!seen.insert(c).second) throw DuplicateClassError("class id " + std::to_string(c) + " listed twice");
  }
}

/// Raw (pre-PCA) class vectors of one image, one row per requested class.
struct ClassVectorSet {
  std::string image_id;
  std::vector<int> class_ids;
  Tensor vectors;  // |class_ids| x K

  std::optional<std::size_t> RowOf(int class_id) const {
    auto it = std::find(class_ids.begin(), class_ids.end(), class_id);
    if (it == class_ids.end()) return std::nullopt;
    return static_cast<std::size_t>(it - class_ids.begin());
  }
};

/// Class vectors for `class_ids`. With `region`, features and heatmaps are
/// cropped to that cell box first and channel weights come from the crop;
/// heatmaps are always normalized over the whole image.
inline ClassVectorSet ComputeClassVectorSet(const FeatureBundle& bundle, const DatasetManifest& manifest,
                                            std::span<const int> class_ids,
                                            const std::optional<RegionBox>& region = std::nullopt) {
  ValidateClassIds(class_ids, manifest.num_classes());
  const Tensor features = region ? CropFeatures(bundle.conv_features, *region) : bundle.conv_features;
  const ChannelWeights cw = ComputeChannelWeights(ChannelSparsity(features));

  ClassVectorSet set;
  set.image_id = bundle.image_id;
  set.class_ids.assign(class_ids.begin(), class_ids.end());
  set.vectors = Tensor({class_ids.size(), features.dim(0)});
  for (std::size_t r = 0; r < class_ids.size(); ++r) {
    Tensor heat = ClassHeatmap(bundle, manifest, class_ids[r]);
    if (region) heat = CropMap(heat, *region);
    const auto f = ClassVector(features, heat, cw);
    auto row = set.vectors.slab(r);
    for (std::size_t k = 0; k < f.size(); ++k) row[k] = static_cast<float>(f[k]);
  }
  return set;
}

/// Normalize, whiten, re-normalize each class vector; sum; normalize.
/// All-zero inputs are skipped; if nothing survives the result is a flagged
/// all-zero descriptor.
inline Descriptor Aggregate(std::span<const std::vector<double>> class_vectors, const PcaModel& model) {
  if (class_vectors.empty()) throw ArgumentError("cannot aggregate an empty list of class vectors");
  std::vector<double> sum(model.output_dim, 0.0);
  std::vector<double> unit, projected;
  bool any = false;
  for (const auto& v : class_vectors) {
    unit = v;
    if (!NormalizeInPlace(unit)) {
      if (unit.size() != model.input_dim) throw ShapeError("class vector dimension mismatch");
      continue;
    }
    if (!ProjectNormalized(model, unit, projected)) continue;
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += projected[i];
    any = true;
  }
  const bool ok = any && NormalizeInPlace(sum);
  return ToDescriptor(sum, !ok);
}

/// Aggregates the rows of `set` belonging to `class_ids` (every id must be
/// present in the set).
inline Descriptor AggregateRows(const ClassVectorSet& set, std::span<const int> class_ids, const PcaModel& model) {
  if (class_ids.empty()) throw ArgumentError("class list is empty");
  std::vector<std::vector<double>> rows;
  rows.reserve(class_ids.size());
  for (int c : class_ids) {
    const auto r = set.RowOf(c);
    if (!r) throw IndexError("class " + std::to_string(c) + " not stored for " + set.image_id);
    auto row = set.vectors.slab(*r);
    rows.emplace_back(row.begin(), row.end());
  }
  return Aggregate(rows, model);
}

inline Descriptor EncodeWithClasses(const FeatureBundle& bundle, const DatasetManifest& manifest,
                                    std::span<const int> class_ids, const PcaModel& model,
                                    const std::optional<RegionBox>& region = std::nullopt) {
  const ClassVectorSet set = ComputeClassVectorSet(bundle, manifest, class_ids, region);
  return AggregateRows(set, class_ids, model);
}

/// Offline aggregation: the image's own top n_c classes.
inline Descriptor EncodeOfa(const FeatureBundle& bundle, const DatasetManifest& manifest, std::size_t n_c,
                            const PcaModel& model, const std::optional<RegionBox>& region = std::nullopt) {
  const auto classes = TopClasses(bundle, n_c);
  return EncodeWithClasses(bundle, manifest, classes, model, region);
}

/// Cell box of a bundle's conv grid covered by a pixel ROI.
inline RegionBox RoiCells(const FeatureBundle& bundle, const Roi& roi) {
  return RoiToCells(roi, bundle.stride, bundle.orig_width, bundle.orig_height, bundle.conv_features.dim(1),
                    bundle.conv_features.dim(2));
}

/// L2-normalized class vectors suitable as PCA training samples; all-zero
/// vectors carry no direction and are dropped.
inline std::vector<std::vector<double>> PcaTrainingVectors(const ClassVectorSet& set) {
  std::vector<std::vector<double>> out;
  for (std::size_t r = 0; r < set.class_ids.size(); ++r) {
    auto row = set.vectors.slab(r);
    std::vector<double> v(row.begin(), row.end());
    if (NormalizeInPlace(v)) out.push_back(std::move(v));
  }
  return out;
}

}  // namespace camret
