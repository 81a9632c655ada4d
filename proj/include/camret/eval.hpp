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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "camret/dataset.hpp"
#include "camret/encoder.hpp"
#include "camret/errors.hpp"
#include "camret/search.hpp"

namespace camret {

/// One benchmark query: the query image, its region of interest in
/// resized-image pixels, and its relevance tiers.
struct GroundTruth {
  std::string query_id;
  std::string query_image_id;
  Roi roi;
  std::set<std::string> good;
  std::set<std::string> ok;
  std::set<std::string> junk;

  bool IsPositive(const std::string& id) const { return good.count(id) || ok.count(id); }
  std::size_t num_positives() const { return good.size() + ok.size(); }
};

namespace detail {

inline std::set<std::string> ReadIdSet(const std::filesystem::path& path, const std::string& query_id) {
  std::ifstream in(path);
  if (!in) throw FormatError("query '" + query_id + "': missing " + path.filename().string());
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    line = Trim(line);
    if (!line.empty()) ids.insert(line);
  }
  return ids;
}

}  // namespace detail

/// Reads an Oxford/Paris ground-truth directory: for each
/// `<q>_query.txt` ("stem x1 y1 x2 y2"), the sibling `<q>_good.txt`,
/// `<q>_ok.txt` and `<q>_junk.txt` lists. Queries come back sorted by id.
/// ROIs are left in original-image pixels; see RescaleRois.
inline std::vector<GroundTruth> ParseGroundTruth(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw FormatError("ground-truth directory not found: " + dir.string());
  const std::string suffix = "_query.txt";
  std::vector<std::string> query_ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      query_ids.push_back(name.substr(0, name.size() - suffix.size()));
    }
  }
  std::sort(query_ids.begin(), query_ids.end());

  std::vector<GroundTruth> out;
  out.reserve(query_ids.size());
  for (const auto& qid : query_ids) {
    GroundTruth gt;
    gt.query_id = qid;
    std::ifstream in(dir / (qid + suffix));
    std::string line;
    std::getline(in, line);
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string t; fields >> t;) tokens.push_back(t);
    if (tokens.size() != 5) {
      throw FormatError("query '" + qid + "': expected image stem and 4 ROI coordinates, got " +
                        std::to_string(tokens.empty() ? 0 : tokens.size() - 1) + " coordinates");
    }
    gt.query_image_id = tokens[0];
    if (gt.query_image_id.rfind("oxc1_", 0) == 0) gt.query_image_id.erase(0, 5);
    double c[4];
    for (int i = 0; i < 4; ++i) {
      try {
        std::size_t used = 0;
        c[i] = std::stod(tokens[1 + i], &used);
        if (used != tokens[1 + i].size()) throw std::invalid_argument(tokens[1 + i]);
      } catch (const std::exception&) {
        throw FormatError("query '" + qid + "': bad ROI coordinate '" + tokens[1 + i] + "'");
      }
    }
    gt.roi = {c[0], c[1], c[2], c[3]};
    if (!(gt.roi.x1 < gt.roi.x2) || !(gt.roi.y1 < gt.roi.y2)) {
      throw FormatError("query '" + qid + "': ROI corners are not ordered");
    }
    gt.good = detail::ReadIdSet(dir / (qid + "_good.txt"), qid);
    gt.ok = detail::ReadIdSet(dir / (qid + "_ok.txt"), qid);
    gt.junk = detail::ReadIdSet(dir / (qid + "_junk.txt"), qid);
    for (const auto& id : gt.good) {
      if (gt.ok.count(id) || gt.junk.count(id)) throw FormatError("query '" + qid + "': '" + id + "' in several tiers");
    }
    for (const auto& id : gt.ok) {
      if (gt.junk.count(id)) throw FormatError("query '" + qid + "': '" + id + "' in several tiers");
    }
    out.push_back(std::move(gt));
  }
  return out;
}

/// Scales each ROI by the resize factor of its query image.
inline void RescaleRois(std::vector<GroundTruth>& gts, const std::function<double(const std::string&)>& scale_of) {
  for (auto& gt : gts) {
    const double s = scale_of(gt.query_image_id);
    gt.roi = {gt.roi.x1 * s, gt.roi.y1 * s, gt.roi.x2 * s, gt.roi.y2 * s};
  }
}

/// ROI sidecar written by the extractor: "query_id<TAB>x1<TAB>y1<TAB>x2<TAB>y2"
/// already in resized-image pixels.
inline std::map<std::string, Roi> ReadRoiSidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open ROI sidecar " + path.string());
  std::map<std::string, Roi> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string qid;
    Roi r;
    if (!(fields >> qid >> r.x1 >> r.y1 >> r.x2 >> r.y2)) throw FormatError("bad ROI sidecar line: '" + line + "'");
    out[qid] = r;
  }
  return out;
}

inline void ApplyRoiSidecar(std::vector<GroundTruth>& gts, const std::map<std::string, Roi>& rois) {
  for (auto& gt : gts) {
    auto it = rois.find(gt.query_id);
    if (it == rois.end()) throw FormatError("query '" + gt.query_id + "' missing from ROI sidecar");
    gt.roi = it->second;
  }
}

/// Average precision with junk removed and positives = good + ok. Each hit
/// adds (1/P) * (p_prev + p_hit) / 2, where p_hit is the precision at the
/// hit and p_prev the precision at the previous hit (1 before the first).
/// Returns nothing when the query has no positives.
inline std::optional<double> AveragePrecision(std::span<const std::string> ranked_ids, const GroundTruth& gt) {
  const std::size_t positives = gt.num_positives();
  if (positives == 0) return std::nullopt;
  std::unordered_set<std::string> seen;
  double ap = 0.0;
  double prev_precision = 1.0;
  std::size_t rank = 0, hits = 0;
  for (const auto& id : ranked_ids) {
    if (gt.junk.count(id) || !seen.insert(id).second) continue;
    ++rank;
    if (!gt.IsPositive(id)) continue;
    ++hits;
    const double precision = static_cast<double>(hits) / static_cast<double>(rank);
    ap += (prev_precision + precision) / 2.0 / static_cast<double>(positives);
    prev_precision = precision;
  }
  return ap;
}

inline std::optional<double> AveragePrecision(const RankedList& ranked, const GroundTruth& gt) {
  std::vector<std::string> ids;
  ids.reserve(ranked.size());
  for (const auto& e : ranked) ids.push_back(e.image_id);
  return AveragePrecision(ids, gt);
}

inline double MeanAveragePrecision(std::span<const double> aps) {
  if (aps.empty()) throw ArgumentError("mAP of an empty list is undefined");
  double s = 0.0;
  for (double ap : aps) s += ap;
  return s / static_cast<double>(aps.size());
}

struct QueryResult {
  std::string query_id;
  std::optional<double> ap;
};

/// Per-query AP lines then the mAP line, 4 decimals. Queries with no
/// positives print "undefined" and are left out of the mean.
inline double WriteReport(std::ostream& out, std::span<const QueryResult> results) {
  std::vector<double> defined;
  char buf[32];
  for (const auto& r : results) {
    if (r.ap) {
      std::snprintf(buf, sizeof buf, "%.4f", *r.ap);
      out << r.query_id << '\t' << buf << '\n';
      defined.push_back(*r.ap);
    } else {
      out << r.query_id << "\tundefined\n";
    }
  }
  const double map = MeanAveragePrecision(defined);
  std::snprintf(buf, sizeof buf, "%.4f", map);
  out << "mAP\t" << buf << '\n';
  return map;
}

}  // namespace camret
