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

#include <cmath>
#include <span>
#include <vector>

namespace camret {

/// Unit-length image representation. All-zero vectors come from degenerate
/// aggregations and are flagged so rankings can place them last.
struct Descriptor {
  std::vector<float> values;
  bool degenerate = false;

  std::size_t dim() const { return values.size(); }

  friend bool operator==(const Descriptor&, const Descriptor&) = default;
};

inline double Dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

template <typename T>
double L2Norm(std::span<const T> v) {
  double s = 0.0;
  for (T x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

/// Scales `v` to unit length in place. Returns false (and leaves `v` at zero)
/// when it has no length to normalize.
inline bool NormalizeInPlace(std::vector<double>& v) {
  const double n = L2Norm<double>(v);
  if (!(n > 0.0) || !std::isfinite(n)) {
    std::fill(v.begin(), v.end(), 0.0);
    return false;
  }
  for (double& x : v) x /= n;
  return true;
}

inline Descriptor ToDescriptor(const std::vector<double>& v, bool degenerate) {
  Descriptor d;
  d.values.assign(v.size(), 0.0f);
  d.degenerate = degenerate;
  if (!degenerate) {
    for (std::size_t i = 0; i < v.size(); ++i) d.values[i] = static_cast<float>(v[i]);
  }
  return d;
}

}  // namespace camret
