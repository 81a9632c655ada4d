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

// Synthetic datasets with planted structure.
//
// Images fall into groups. Group g owns a disjoint block of conv channels and
// a fixed positive ratio across them; every image of the group scales that
// ratio by a spatial blob shared by all of its channels. Channel sparsity is
// then equal inside the block, so every class vector of a group-g image is
// collinear with the group ratio whatever the CAM looks like, and groups are
// orthogonal before PCA.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "camret/dataset.hpp"
#include "camret/encoder.hpp"
#include "camret/eval.hpp"

namespace camret::testing {

struct FixtureOptions {
  std::uint32_t seed = 7;
  std::uint32_t pattern_seed = 1234;  // shared "theme" across datasets
  std::size_t groups = 4;
  std::size_t per_group = 5;
  std::size_t channels_per_group = 4;
  std::size_t grid = 6;      // conv grid H = W
  std::size_t cam_grid = 3;  // CAM-layer grid
  std::size_t cam_channels = 6;
  std::size_t classes = 8;
  int stride = 16;
  std::string dataset = "synthetic-a";
  // Every CAM becomes a bright one-cell border around a dark interior on the
  // conv grid, so thresholded boxes always span the whole image.
  bool frame_cams = false;
};

struct Fixture {
  FixtureOptions options;
  DatasetManifest manifest;
  std::vector<FeatureBundle> bundles;
  std::vector<std::size_t> group_of;
  std::vector<RegionBox> blob_of;
  std::vector<GroundTruth> queries;
};

inline Fixture MakeFixture(const FixtureOptions& opt) {
  Fixture fx;
  fx.options = opt;
  const std::size_t k_total = opt.groups * opt.channels_per_group;

  std::mt19937 theme(opt.pattern_seed);
  std::uniform_real_distribution<float> ratio(0.5f, 1.5f);
  std::vector<std::vector<float>> patterns(opt.groups, std::vector<float>(opt.channels_per_group));
  for (auto& p : patterns) {
    for (auto& v : p) v = ratio(theme);
  }

  std::mt19937 rng(opt.seed);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  std::uniform_real_distribution<float> signed_unit(-1.0f, 1.0f);

  const std::size_t cam_grid = opt.frame_cams ? opt.grid : opt.cam_grid;
  DatasetManifest& m = fx.manifest;
  m.dataset_name = opt.dataset;
  m.conv_layer = "conv5_1";
  m.cam_layer = "cam_conv";
  m.stride = opt.stride;
  m.cam_stride = static_cast<int>(opt.stride * opt.grid / cam_grid);
  m.classifier_weights = Tensor({opt.classes, opt.cam_channels});
  for (float& w : m.classifier_weights.data()) w = opt.frame_cams ? 0.1f + unit(rng) : signed_unit(rng);
  for (std::size_t c = 0; c < opt.classes; ++c) m.class_names.push_back("class_" + std::to_string(c));

  const std::size_t n = opt.groups * opt.per_group;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t g = i / opt.per_group;
    FeatureBundle b;
    char id[32];
    std::snprintf(id, sizeof id, "img_%03zu", i);
    b.image_id = id;
    b.stride = opt.stride;
    b.orig_width = b.orig_height = static_cast<int>(opt.grid) * opt.stride;

    // Blob of at least 2x2 cells.
    std::uniform_int_distribution<std::size_t> pos(0, opt.grid - 2);
    const std::size_t r0 = pos(rng), c0 = pos(rng);
    std::uniform_int_distribution<std::size_t> hext(r0 + 1, opt.grid - 1), wext(c0 + 1, opt.grid - 1);
    const RegionBox blob{r0, c0, hext(rng), wext(rng)};
    const float intensity = 0.5f + 2.0f * unit(rng);

    b.conv_features = Tensor({k_total, opt.grid, opt.grid});
    for (std::size_t r = blob.row_min; r <= blob.row_max; ++r) {
      for (std::size_t c = blob.col_min; c <= blob.col_max; ++c) {
        const float s = intensity * (0.2f + 0.8f * unit(rng));
        for (std::size_t j = 0; j < opt.channels_per_group; ++j) {
          b.conv_features.at(g * opt.channels_per_group + j, r, c) = patterns[g][j] * s;
        }
      }
    }

    b.cam_features = Tensor({opt.cam_channels, cam_grid, cam_grid});
    for (std::size_t k = 0; k < opt.cam_channels; ++k) {
      const float scale = 0.5f + unit(rng);
      for (std::size_t r = 0; r < cam_grid; ++r) {
        for (std::size_t c = 0; c < cam_grid; ++c) {
          float v = unit(rng);
          if (opt.frame_cams) {
            const bool border = r == 0 || c == 0 || r + 1 == cam_grid || c + 1 == cam_grid;
            v = border ? scale : 0.0f;
          }
          b.cam_features.at(k, r, c) = v;
        }
      }
    }

    b.class_scores = Tensor({opt.classes});
    for (std::size_t c = 0; c < opt.classes; ++c) {
      b.class_scores[c] = signed_unit(rng) + ((c % opt.groups) == g ? 1.0f : 0.0f);
    }

    m.entries.push_back({b.image_id, "bundles/" + b.image_id});
    fx.bundles.push_back(std::move(b));
    fx.group_of.push_back(g);
    fx.blob_of.push_back(blob);
  }
  m.Reindex();

  for (std::size_t g = 0; g < opt.groups; ++g) {
    const std::size_t qi = g * opt.per_group;
    GroundTruth gt;
    gt.query_id = "group" + std::to_string(g) + "_1";
    gt.query_image_id = fx.bundles[qi].image_id;
    const RegionBox& blob = fx.blob_of[qi];
    const double s = opt.stride;
    gt.roi = {blob.col_min * s, blob.row_min * s, (blob.col_max + 1) * s, (blob.row_max + 1) * s};
    for (std::size_t i = 0; i < n; ++i) {
      if (fx.group_of[i] == g) gt.good.insert(fx.bundles[i].image_id);
    }
    fx.queries.push_back(std::move(gt));
  }
  return fx;
}

/// Writes the dataset (manifest, weights, class names, bundles) under `root`
/// and the ground truth in Oxford layout under `root/gt`.
inline void WriteFixture(const Fixture& fx, const std::filesystem::path& root) {
  DatasetManifest m = fx.manifest;
  m.root = root;
  WriteManifest(root, m);
  for (std::size_t i = 0; i < fx.bundles.size(); ++i) {
    WriteBundle(root / fx.manifest.entries[i].relative_path, fx.bundles[i]);
  }
  const auto gt_dir = root / "gt";
  std::filesystem::create_directories(gt_dir);
  for (const auto& gt : fx.queries) {
    std::ofstream q(gt_dir / (gt.query_id + "_query.txt"));
    q << gt.query_image_id << " " << gt.roi.x1 << " " << gt.roi.y1 << " " << gt.roi.x2 << " " << gt.roi.y2 << "\n";
    std::ofstream good(gt_dir / (gt.query_id + "_good.txt"));
    for (const auto& id : gt.good) good << id << "\n";
    std::ofstream ok(gt_dir / (gt.query_id + "_ok.txt"));
    for (const auto& id : gt.ok) ok << id << "\n";
    std::ofstream junk(gt_dir / (gt.query_id + "_junk.txt"));
    for (const auto& id : gt.junk) junk << id << "\n";
  }
}

/// Loads bundles straight from memory, for tests that skip the filesystem.
inline BundleLoader MemoryLoader(const Fixture& fx) {
  return [&fx](const std::string& id) -> FeatureBundle {
    for (const auto& b : fx.bundles) {
      if (b.image_id == id) return b;
    }
    throw NotFound("image_id '" + id + "' not in fixture");
  };
}

}  // namespace camret::testing
