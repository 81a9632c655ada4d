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
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "camret/errors.hpp"
#include "camret/tensor.hpp"

namespace camret {

/// Heatmap for one class over an H x W grid.
struct Cam {
  int class_id = 0;
  Tensor map;  // H x W
};

/// Inclusive cell bounds on a feature grid.
struct RegionBox {
  std::size_t row_min = 0;
  std::size_t col_min = 0;
  std::size_t row_max = 0;
  std::size_t col_max = 0;

  std::size_t rows() const { return row_max - row_min + 1; }
  std::size_t cols() const { return col_max - col_min + 1; }

  static RegionBox Full(std::size_t height, std::size_t width) {
    return {0, 0, height - 1, width - 1};
  }

  friend bool operator==(const RegionBox&, const RegionBox&) = default;
};

/// Weighted sum of the CAM-layer feature maps with one classifier row:
/// map[i,j] = sum_k features[k,i,j] * weights[class_id,k]. Not normalized.
inline Cam ComputeCam(const Tensor& cam_features, const Tensor& classifier_weights, int class_id) {
  RequireRank(cam_features, 3, "cam_features");
  RequireRank(classifier_weights, 2, "classifier_weights");
  const std::size_t channels = cam_features.dim(0);
  if (classifier_weights.dim(1) != channels) {
    throw ShapeError("classifier has " + std::to_string(classifier_weights.dim(1)) +
                     " inputs but cam_features has " + std::to_string(channels) + " channels");
  }
  if (class_id < 0 || static_cast<std::size_t>(class_id) >= classifier_weights.dim(0)) {
    throw IndexError("class_id " + std::to_string(class_id) + " outside [0, " +
                     std::to_string(classifier_weights.dim(0)) + ")");
  }

  const std::size_t h = cam_features.dim(1), w = cam_features.dim(2);
  const std::size_t cells = h * w;
  std::vector<double> acc(cells, 0.0);
  auto weights = classifier_weights.slab(static_cast<std::size_t>(class_id));
  for (std::size_t k = 0; k < channels; ++k) {
    const double wk = weights[k];
    if (wk == 0.0) continue;
    auto plane = cam_features.slab(k);
    for (std::size_t c = 0; c < cells; ++c) acc[c] += static_cast<double>(plane[c]) * wk;
  }

  Tensor map({h, w});
  for (std::size_t c = 0; c < cells; ++c) map[c] = static_cast<float>(acc[c]);
  return {class_id, std::move(map)};
}

/// Min-max scaling into [0,1]. A constant map has no localization signal and
/// becomes all zeros.
inline Cam NormalizeCam(const Cam& cam) {
  Cam out{cam.class_id, cam.map};
  auto data = out.map.data();
  if (data.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(data.begin(), data.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) {
    std::fill(data.begin(), data.end(), 0.0f);
    return out;
  }
  const double range = hi - lo;
  for (float& v : data) {
    v = static_cast<float>(std::clamp((static_cast<double>(v) - lo) / range, 0.0, 1.0));
  }
  return out;
}

/// Bilinear resize of an H x W map with half-pixel centers
/// (src = (dst + 0.5) * in / out - 0.5, clamped to the border).
inline Tensor ResizeMap(const Tensor& map, std::size_t target_h, std::size_t target_w) {
  RequireRank(map, 2, "map");
  if (target_h == 0 || target_w == 0) throw ShapeError("resize target dimensions must be >= 1");
  const std::size_t in_h = map.dim(0), in_w = map.dim(1);
  if (in_h == target_h && in_w == target_w) return map;

  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
      double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto lo = static_cast<std::size_t>(std::floor(src));
      const std::size_t hi = std::min(lo + 1, in - 1);
      t[o] = {lo, hi, src - static_cast<double>(lo)};
    }
    return t;
  };
  const auto rows = taps(in_h, target_h);
  const auto cols = taps(in_w, target_w);

  const auto [lo_it, hi_it] = std::minmax_element(map.data().begin(), map.data().end());
  const float lo = *lo_it, hi = *hi_it;

  Tensor out({target_h, target_w});
  for (std::size_t i = 0; i < target_h; ++i) {
    const auto& r = rows[i];
    for (std::size_t j = 0; j < target_w; ++j) {
      const auto& c = cols[j];
      const double top = map.at(r.lo, c.lo) + (static_cast<double>(map.at(r.lo, c.hi)) - map.at(r.lo, c.lo)) * c.frac;
      const double bot = map.at(r.hi, c.lo) + (static_cast<double>(map.at(r.hi, c.hi)) - map.at(r.hi, c.lo)) * c.frac;
      const double v = top + (bot - top) * r.frac;
      out.at(i, j) = std::clamp(static_cast<float>(v), lo, hi);
    }
  }
  return out;
}

/// Element-wise mean of equally shaped maps.
inline Tensor AverageCams(std::span<const Cam> cams) {
  if (cams.empty()) throw ArgumentError("AverageCams needs at least one map");
  const Tensor& first = cams.front().map;
  RequireRank(first, 2, "cam map");
  std::vector<double> acc(first.size(), 0.0);
  for (const auto& cam : cams) {
    if (cam.map.shape() != first.shape()) {
      throw ShapeError("cannot average maps of shapes " + ShapeString(first.shape()) +
                       " and " + ShapeString(cam.map.shape()));
    }
    auto d = cam.map.data();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += d[i];
  }
  Tensor out(first.shape());
  const double n = static_cast<double>(cams.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] / n);
  return out;
}

/// Cells kept by binarizing at threshold_fraction * max(heat), closed
/// comparison (value >= threshold).
inline std::vector<std::uint8_t> ThresholdMask(const Tensor& heat, double threshold_fraction) {
  RequireRank(heat, 2, "heatmap");
  if (!(threshold_fraction > 0.0 && threshold_fraction <= 1.0)) {
    throw ArgumentError("threshold fraction must be in (0,1]");
  }
  auto data = heat.data();
  const float peak = *std::max_element(data.begin(), data.end());
  if (!(peak > 0.0f)) throw DegenerateHeatmap("heatmap has no positive value");
  const double threshold = threshold_fraction * static_cast<double>(peak);
  std::vector<std::uint8_t> mask(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) mask[i] = static_cast<double>(data[i]) >= threshold;
  return mask;
}

/// Bounding box of the largest 8-connected component of the thresholded
/// heatmap. Equal-size components resolve to the one whose first cell comes
/// earliest in row-major order.
inline RegionBox ExtractBox(const Tensor& heat, double threshold_fraction) {
  const auto mask = ThresholdMask(heat, threshold_fraction);
  const std::size_t h = heat.dim(0), w = heat.dim(1);

  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<std::size_t> stack;
  RegionBox best{};
  std::size_t best_size = 0;

  // Row-major scan discovers components in order of their earliest cell, so
  // keeping only strictly larger ones implements the tie-break.
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || seen[start]) continue;
    RegionBox box{start / w, start % w, start / w, start % w};
    std::size_t size = 0;
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t cell = stack.back();
      stack.pop_back();
      ++size;
      const std::size_t r = cell / w, c = cell % w;
      box.row_min = std::min(box.row_min, r);
      box.row_max = std::max(box.row_max, r);
      box.col_min = std::min(box.col_min, c);
      box.col_max = std::max(box.col_max, c);
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const auto nr = static_cast<std::ptrdiff_t>(r) + dr;
          const auto nc = static_cast<std::ptrdiff_t>(c) + dc;
          if (nr < 0 || nc < 0 || nr >= static_cast<std::ptrdiff_t>(h) || nc >= static_cast<std::ptrdiff_t>(w)) continue;
          const std::size_t next = static_cast<std::size_t>(nr) * w + static_cast<std::size_t>(nc);
          if (mask[next] && !seen[next]) {
            seen[next] = 1;
            stack.push_back(next);
          }
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best = box;
    }
  }
  return best;
}

/// 8-bit binary PGM, scaled so the map maximum is 255 (negatives clip to 0).
inline void WritePgm(const Tensor& map, const std::filesystem::path& path) {
  RequireRank(map, 2, "map");
  auto data = map.data();
  const float peak = *std::max_element(data.begin(), data.end());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string(), 0);
  out << "P5\n" << map.dim(1) << " " << map.dim(0) << "\n255\n";
  for (float v : data) {
    const double scaled = peak > 0.0f ? std::clamp(static_cast<double>(v) / peak, 0.0, 1.0) * 255.0 : 0.0;
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(scaled))));
  }
  if (!out) throw IoError("write failed for " + path.string(), 0);
}

/// One line of the box debug file:
/// image_id, class_id, threshold, row_min, col_min, row_max, col_max.
inline void WriteBoxLine(std::ostream& out, const std::string& image_id, int class_id,
                         double threshold, const RegionBox& box) {
  char thr[32];
  std::snprintf(thr, sizeof thr, "%.2f", threshold);
  out << image_id << '\t' << class_id << '\t' << thr << '\t' << box.row_min << '\t'
      << box.col_min << '\t' << box.row_max << '\t' << box.col_max << '\n';
}

}  // namespace camret
