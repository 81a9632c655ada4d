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

#include <cstdint>
#include <stdexcept>
#include <string>

namespace camret {

/// Root of every error raised by the library. `module()` names the subsystem
/// that detected the problem so front ends can produce useful diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

#define CAMRET_DEFINE_ERROR(Name, Module)                                  \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& what) : Error(Module, what) {}        \
  };

CAMRET_DEFINE_ERROR(FormatError, "format")

// tensor_store
CAMRET_DEFINE_ERROR(TruncationError, "tensor_store")
CAMRET_DEFINE_ERROR(NotFound, "tensor_store")
CAMRET_DEFINE_ERROR(ConsistencyError, "tensor_store")

// shared by the numeric modules
CAMRET_DEFINE_ERROR(ShapeError, "tensor")
CAMRET_DEFINE_ERROR(IndexError, "cam_engine")
CAMRET_DEFINE_ERROR(ArgumentError, "argument")
CAMRET_DEFINE_ERROR(DegenerateHeatmap, "cam_engine")

// encoder
CAMRET_DEFINE_ERROR(InsufficientData, "encoder")
CAMRET_DEFINE_ERROR(DuplicateClassError, "encoder")
CAMRET_DEFINE_ERROR(RoiError, "encoder")

// search
CAMRET_DEFINE_ERROR(DuplicateId, "search")
CAMRET_DEFINE_ERROR(NormalizationError, "search")

#undef CAMRET_DEFINE_ERROR

/// Sink or source failure. Carries the byte offset at which it happened.
class IoError : public Error {
 public:
  IoError(const std::string& what, std::uint64_t offset)
      : Error("tensor_store", what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Wraps an error raised while processing one image, so the CLI can report
/// both the module and the image id.
class ImageError : public Error {
 public:
  ImageError(const Error& cause, std::string image_id)
      : Error(cause.module(), image_id + ": " + cause.what()),
        image_id_(std::move(image_id)) {}

  const std::string& image_id() const noexcept { return image_id_; }

 private:
  std::string image_id_;
};

}  // namespace camret
