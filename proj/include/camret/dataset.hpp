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

// On-disk dataset layout written by the feature extractor:
//
//   <root>/manifest.txt         "#key=value" header lines, then one
//                               "image_id<TAB>relative_dir" record per line
//   <root>/<weights>            classifier weights, C x K'
//   <root>/<class_names>        one class name per line, C lines
//   <root>/<relative_dir>/conv.cwcf    retrieval-layer features, K x H x W
//   <root>/<relative_dir>/cam.cwcf     CAM-layer features, K' x H' x W'
//   <root>/<relative_dir>/scores.cwcf  classifier scores, C
//   <root>/<relative_dir>/meta.txt     orig_width, orig_height, scale

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "camret/errors.hpp"
#include "camret/tensor.hpp"
#include "camret/tensor_io.hpp"

namespace camret {

namespace fs = std::filesystem;

struct ManifestEntry {
  std::string image_id;
  std::string relative_path;
};

struct DatasetManifest {
  fs::path root;
  std::string dataset_name;
  std::string conv_layer;
  std::string cam_layer;
  int stride = 16;
  int cam_stride = 16;
  std::string weights_file = "classifier_weights.cwcf";
  std::string class_names_file = "class_names.txt";
  Tensor classifier_weights;  // C x K'
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> entries;
  std::map<std::string, std::string> extra_headers;

  std::size_t num_classes() const { return class_names.size(); }
  std::size_t cam_channels() const { return classifier_weights.dim(1); }

  std::optional<std::size_t> Find(const std::string& image_id) const {
    if (lookup_.size() != entries.size()) Reindex();
    auto it = lookup_.find(image_id);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

  void Reindex() const {
    lookup_.clear();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (!lookup_.emplace(entries[i].image_id, i).second) {
        throw ConsistencyError("duplicate image_id in manifest: " + entries[i].image_id);
      }
    }
  }

 private:
  mutable std::unordered_map<std::string, std::size_t> lookup_;
};

/// Everything the engine needs about one image.
struct FeatureBundle {
  std::string image_id;
  Tensor conv_features;  // K x H x W
  Tensor cam_features;   // K' x H' x W'
  Tensor class_scores;   // C
  int orig_width = 0;    // resized image, pixels
  int orig_height = 0;
  int stride = 16;       // pixels per conv_features cell
  double scale = 1.0;    // resized / original, used to map ground-truth ROIs

  friend bool operator==(const FeatureBundle&, const FeatureBundle&) = default;
};

namespace detail {

inline std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline int ParsePositiveInt(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size() || v <= 0) throw std::invalid_argument(value);
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw FormatError("header '" + key + "' expects a positive integer, got '" + value + "'");
  }
}

inline std::map<std::string, std::string> ReadKeyValueFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    line = Trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(path.string() + ": expected key=value, got '" + line + "'");
    out[Trim(line.substr(0, eq))] = Trim(line.substr(eq + 1));
  }
  return out;
}

}  // namespace detail

inline std::vector<std::string> ReadLines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

/// Parses a manifest and the shared classifier weights / class names it
/// references. Relative paths resolve against the manifest's directory.
inline DatasetManifest LoadManifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw NotFound("cannot open manifest " + manifest_path.string());

  DatasetManifest m;
  m.root = manifest_path.parent_path();
  std::optional<int> declared_classes;
  bool cam_stride_set = false;

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;  // plain comment
      const std::string key = detail::Trim(line.substr(1, eq - 1));
      const std::string value = detail::Trim(line.substr(eq + 1));
      if (key == "dataset") m.dataset_name = value;
      else if (key == "classes") declared_classes = detail::ParsePositiveInt(key, value);
      else if (key == "conv_layer") m.conv_layer = value;
      else if (key == "cam_layer") m.cam_layer = value;
      else if (key == "stride") m.stride = detail::ParsePositiveInt(key, value);
      else if (key == "cam_stride") { m.cam_stride = detail::ParsePositiveInt(key, value); cam_stride_set = true; }
      else if (key == "weights") m.weights_file = value;
      else if (key == "class_names") m.class_names_file = value;
      else m.extra_headers[key] = value;
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw FormatError(manifest_path.string() + ":" + std::to_string(lineno) +
                        ": expected 'image_id<TAB>path'");
    }
    m.entries.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  if (!cam_stride_set) m.cam_stride = m.stride;

  m.classifier_weights = ReadTensorFile(m.root / m.weights_file);
  RequireRank(m.classifier_weights, 2, "classifier weights");
  m.class_names = ReadLines(m.root / m.class_names_file);
  if (m.class_names.size() != m.classifier_weights.dim(0)) {
    throw ConsistencyError("class_names has " + std::to_string(m.class_names.size()) +
                           " entries but classifier weights have " +
                           std::to_string(m.classifier_weights.dim(0)) + " rows");
  }
  if (declared_classes && static_cast<std::size_t>(*declared_classes) != m.class_names.size()) {
    throw ConsistencyError("manifest declares " + std::to_string(*declared_classes) +
                           " classes but weights have " + std::to_string(m.class_names.size()));
  }
  m.Reindex();
  return m;
}

inline void RequireNonNegative(const Tensor& t, const std::string& what) {
  for (float v : t.data()) {
    if (!(v >= 0.0f)) throw FormatError(what + " contains a negative or NaN entry");
  }
}

/// Loads and cross-validates one image's tensors. Never modifies files.
inline FeatureBundle LoadBundle(const DatasetManifest& manifest, const std::string& image_id) {
  const auto pos = manifest.Find(image_id);
  if (!pos) throw NotFound("image_id '" + image_id + "' not in manifest");
  const fs::path dir = manifest.root / manifest.entries[*pos].relative_path;

  FeatureBundle b;
  b.image_id = image_id;
  b.conv_features = ReadTensorFile(dir / "conv.cwcf");
  b.cam_features = ReadTensorFile(dir / "cam.cwcf");
  b.class_scores = ReadTensorFile(dir / "scores.cwcf");
  RequireRank(b.conv_features, 3, "conv_features");
  RequireRank(b.cam_features, 3, "cam_features");
  RequireRank(b.class_scores, 1, "class_scores");
  RequireNonNegative(b.conv_features, "conv_features of " + image_id);
  RequireNonNegative(b.cam_features, "cam_features of " + image_id);

  if (b.class_scores.dim(0) != manifest.num_classes()) {
    throw ConsistencyError("class_scores of " + image_id + " has length " +
                           std::to_string(b.class_scores.dim(0)) + ", classifier has " +
                           std::to_string(manifest.num_classes()) + " classes");
  }
  if (b.cam_features.dim(0) != manifest.cam_channels()) {
    throw ConsistencyError("cam_features of " + image_id + " has " +
                           std::to_string(b.cam_features.dim(0)) +
                           " channels, classifier expects " +
                           std::to_string(manifest.cam_channels()));
  }

  b.stride = manifest.stride;
  const fs::path meta_path = dir / "meta.txt";
  if (fs::exists(meta_path)) {
    const auto meta = detail::ReadKeyValueFile(meta_path);
    if (auto it = meta.find("orig_width"); it != meta.end()) b.orig_width = detail::ParsePositiveInt(it->first, it->second);
    if (auto it = meta.find("orig_height"); it != meta.end()) b.orig_height = detail::ParsePositiveInt(it->first, it->second);
    if (auto it = meta.find("stride"); it != meta.end()) b.stride = detail::ParsePositiveInt(it->first, it->second);
    if (auto it = meta.find("scale"); it != meta.end()) {
      try {
        b.scale = std::stod(it->second);
      } catch (const std::exception&) {
        throw FormatError("meta.txt of " + image_id + ": bad scale '" + it->second + "'");
      }
      if (!(b.scale > 0.0)) throw FormatError("meta.txt of " + image_id + ": scale must be positive");
    }
  }
  if (b.stride <= 0) throw ConsistencyError("stride of " + image_id + " must be positive");
  if (b.orig_width == 0) b.orig_width = static_cast<int>(b.conv_features.dim(2)) * b.stride;
  if (b.orig_height == 0) b.orig_height = static_cast<int>(b.conv_features.dim(1)) * b.stride;
  return b;
}

/// Writes a bundle directory in the extractor's layout. Used by tests and the
/// fixture generator; the production writer is the Python exporter.
inline void WriteBundle(const fs::path& dir, const FeatureBundle& b) {
  fs::create_directories(dir);
  WriteTensorFile(b.conv_features, dir / "conv.cwcf");
  WriteTensorFile(b.cam_features, dir / "cam.cwcf");
  WriteTensorFile(b.class_scores, dir / "scores.cwcf");
  std::ofstream meta(dir / "meta.txt", std::ios::trunc);
  std::ostringstream scale;
  scale.precision(17);
  scale << b.scale;
  meta << "orig_width=" << b.orig_width << "\n"
       << "orig_height=" << b.orig_height << "\n"
       << "stride=" << b.stride << "\n"
       << "scale=" << scale.str() << "\n";
  if (!meta) throw IoError("cannot write " + (dir / "meta.txt").string(), 0);
}

/// Writes manifest.txt, the weights tensor and the class-name list.
inline void WriteManifest(const fs::path& root, const DatasetManifest& m) {
  fs::create_directories(root);
  WriteTensorFile(m.classifier_weights, root / m.weights_file);
  {
    std::ofstream names(root / m.class_names_file, std::ios::trunc);
    for (const auto& n : m.class_names) names << n << "\n";
  }
  std::ofstream out(root / "manifest.txt", std::ios::trunc);
  if (!m.dataset_name.empty()) out << "#dataset=" << m.dataset_name << "\n";
  out << "#classes=" << m.class_names.size() << "\n";
  if (!m.conv_layer.empty()) out << "#conv_layer=" << m.conv_layer << "\n";
  if (!m.cam_layer.empty()) out << "#cam_layer=" << m.cam_layer << "\n";
  out << "#stride=" << m.stride << "\n"
      << "#cam_stride=" << m.cam_stride << "\n"
      << "#weights=" << m.weights_file << "\n"
      << "#class_names=" << m.class_names_file << "\n";
  for (const auto& [k, v] : m.extra_headers) out << "#" << k << "=" << v << "\n";
  for (const auto& e : m.entries) out << e.image_id << "\t" << e.relative_path << "\n";
  if (!out) throw IoError("cannot write " + (root / "manifest.txt").string(), 0);
}

}  // namespace camret
