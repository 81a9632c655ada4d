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
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "camret/dataset.hpp"
#include "camret/descriptor.hpp"
#include "camret/errors.hpp"
#include "camret/tensor.hpp"
#include "camret/tensor_io.hpp"

namespace camret {

inline constexpr double kWhiteningEpsilon = 1e-8;

/// Mean-centering plus whitened principal-axis projection.
///
/// `projection` is row-major, one row per kept component, ordered by
/// descending eigenvalue and scaled by 1/sqrt(eigenvalue + epsilon). Values
/// are kept at f32 precision so a model read back from disk is identical to
/// the one that was fitted.
struct PcaModel {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::vector<double> mean;         // input_dim
  std::vector<double> projection;   // output_dim x input_dim
  std::vector<double> eigenvalues;  // output_dim, descending
  double epsilon = kWhiteningEpsilon;
  std::string dataset;
  std::size_t training_samples = 0;

  static PcaModel Identity(std::size_t dim) {
    PcaModel m;
    m.input_dim = m.output_dim = dim;
    m.mean.assign(dim, 0.0);
    m.projection.assign(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) m.projection[i * dim + i] = 1.0;
    m.eigenvalues.assign(dim, 1.0);
    m.epsilon = 0.0;
    return m;
  }
};

struct PcaOptions {
  double epsilon = kWhiteningEpsilon;
  std::size_t components = 0;  // 0 keeps all
  std::string dataset;
};

namespace detail {
inline double RoundToFloat(double v) { return static_cast<double>(static_cast<float>(v)); }
}  // namespace detail

/// Fits a whitening PCA on L2-normalized vectors (population covariance).
inline PcaModel FitPca(std::span<const std::vector<double>> training, const PcaOptions& options = {}) {
  if (training.size() < 2) {
    throw InsufficientData("PCA needs at least 2 training vectors, got " + std::to_string(training.size()));
  }
  const std::size_t dim = training.front().size();
  if (dim == 0) throw ArgumentError("PCA training vectors are empty");
  const std::size_t n = training.size();

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = training[i];
    if (v.size() != dim) throw ShapeError("PCA training vectors differ in length");
    const double norm = L2Norm<double>(v);
    if (std::abs(norm - 1.0) > 1e-6) {
      throw ArgumentError("PCA training vector " + std::to_string(i) + " is not L2-normalized (norm " +
                          std::to_string(norm) + ")");
    }
    for (std::size_t j = 0; j < dim; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
  }

  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw ArgumentError("PCA eigendecomposition failed");

  const std::size_t keep = options.components == 0 ? dim : std::min(options.components, dim);
  PcaModel model;
  model.input_dim = dim;
  model.output_dim = keep;
  model.epsilon = options.epsilon;
  model.dataset = options.dataset;
  model.training_samples = n;
  model.mean.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) model.mean[j] = detail::RoundToFloat(mean(static_cast<Eigen::Index>(j)));
  model.projection.resize(keep * dim);
  model.eigenvalues.resize(keep);
  // Eigen orders eigenvalues ascending.
  for (std::size_t r = 0; r < keep; ++r) {
    const auto col = static_cast<Eigen::Index>(dim - 1 - r);
    const double lambda = std::max(solver.eigenvalues()(col), 0.0);
    const double scale = 1.0 / std::sqrt(lambda + options.epsilon);
    model.eigenvalues[r] = detail::RoundToFloat(lambda);
    for (std::size_t j = 0; j < dim; ++j) {
      model.projection[r * dim + j] =
          detail::RoundToFloat(solver.eigenvectors()(static_cast<Eigen::Index>(j), col) * scale);
    }
  }
  return model;
}

/// projection * (v - mean), unnormalized. `v` must have input_dim entries.
inline std::vector<double> ProjectRaw(const PcaModel& model, std::span<const double> v) {
  if (v.size() != model.input_dim) {
    throw ShapeError("PCA expects dimension " + std::to_string(model.input_dim) + ", got " +
                     std::to_string(v.size()));
  }
  std::vector<double> centered(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) centered[j] = v[j] - model.mean[j];
  std::vector<double> out(model.output_dim, 0.0);
  for (std::size_t r = 0; r < model.output_dim; ++r) {
    const double* row = &model.projection[r * model.input_dim];
    double s = 0.0;
    for (std::size_t j = 0; j < model.input_dim; ++j) s += row[j] * centered[j];
    out[r] = s;
  }
  return out;
}

/// Whitens and re-normalizes. Returns false when the result is degenerate:
/// an all-zero input, or an input equal to the mean.
inline bool ProjectNormalized(const PcaModel& model, std::span<const double> v, std::vector<double>& out) {
  const bool zero_input = std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
  if (zero_input) {
    if (v.size() != model.input_dim) throw ShapeError("PCA input dimension mismatch");
    out.assign(model.output_dim, 0.0);
    return false;
  }
  out = ProjectRaw(model, v);
  return NormalizeInPlace(out);
}

inline Descriptor ApplyPca(const PcaModel& model, std::span<const double> v) {
  std::vector<double> out;
  const bool ok = ProjectNormalized(model, v, out);
  return ToDescriptor(out, !ok);
}

/// Writes mean.cwcf, projection.cwcf, eigenvalues.cwcf and the pca.txt
/// sidecar into `dir`.
inline void SavePcaModel(const PcaModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto to_tensor = [](const std::vector<double>& v, Tensor::Shape shape) {
    std::vector<float> f(v.begin(), v.end());
    return Tensor(std::move(shape), std::move(f));
  };
  WriteTensorFile(to_tensor(model.mean, {model.input_dim}), dir / "mean.cwcf");
  WriteTensorFile(to_tensor(model.projection, {model.output_dim, model.input_dim}), dir / "projection.cwcf");
  WriteTensorFile(to_tensor(model.eigenvalues, {model.output_dim}), dir / "eigenvalues.cwcf");
  std::ofstream side(dir / "pca.txt", std::ios::trunc);
  char eps[40];
  std::snprintf(eps, sizeof eps, "%.17g", model.epsilon);
  side << "epsilon=" << eps << "\n"
       << "dataset=" << model.dataset << "\n"
       << "training_samples=" << model.training_samples << "\n"
       << "input_dim=" << model.input_dim << "\n"
       << "output_dim=" << model.output_dim << "\n";
  if (!side) throw IoError("cannot write " + (dir / "pca.txt").string(), 0);
}

inline PcaModel LoadPcaModel(const std::filesystem::path& dir) {
  const auto side = detail::ReadKeyValueFile(dir / "pca.txt");
  PcaModel m;
  const Tensor mean = ReadTensorFile(dir / "mean.cwcf");
  const Tensor proj = ReadTensorFile(dir / "projection.cwcf");
  RequireRank(mean, 1, "PCA mean");
  RequireRank(proj, 2, "PCA projection");
  if (proj.dim(1) != mean.dim(0)) throw ConsistencyError("PCA projection and mean disagree on dimension");
  m.input_dim = mean.dim(0);
  m.output_dim = proj.dim(0);
  m.mean.assign(mean.data().begin(), mean.data().end());
  m.projection.assign(proj.data().begin(), proj.data().end());
  if (std::filesystem::exists(dir / "eigenvalues.cwcf")) {
    const Tensor ev = ReadTensorFile(dir / "eigenvalues.cwcf");
    m.eigenvalues.assign(ev.data().begin(), ev.data().end());
  }
  if (auto it = side.find("epsilon"); it != side.end()) m.epsilon = std::stod(it->second);
  if (auto it = side.find("dataset"); it != side.end()) m.dataset = it->second;
  if (auto it = side.find("training_samples"); it != side.end()) m.training_samples = std::stoull(it->second);
  return m;
}

}  // namespace camret
