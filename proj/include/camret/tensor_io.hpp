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

// Binary tensor file layout, all fields little-endian:
//
//   offset  size        field
//   0       4           magic "CWCF"
//   4       4           version (u32) = 1
//   8       4           dtype (u32) = 1 (f32)
//   12      4           ndim (u32), 1..4
//   16      4*ndim      dims (u32 each)
//   ...     4*prod      payload, f32 row-major

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "camret/errors.hpp"
#include "camret/tensor.hpp"

namespace camret {

inline constexpr std::array<char, 4> kTensorMagic = {'C', 'W', 'C', 'F'};
inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::uint32_t kDtypeF32 = 1;
inline constexpr std::uint32_t kDtypeF64 = 2;

namespace detail {

inline void PutU32(unsigned char* out, std::uint32_t v) {
  out[0] = static_cast<unsigned char>(v);
  out[1] = static_cast<unsigned char>(v >> 8);
  out[2] = static_cast<unsigned char>(v >> 16);
  out[3] = static_cast<unsigned char>(v >> 24);
}

inline std::uint32_t GetU32(const unsigned char* in) {
  return static_cast<std::uint32_t>(in[0]) |
         (static_cast<std::uint32_t>(in[1]) << 8) |
         (static_cast<std::uint32_t>(in[2]) << 16) |
         (static_cast<std::uint32_t>(in[3]) << 24);
}

class CountingWriter {
 public:
  explicit CountingWriter(std::ostream& out) : out_(out) {}

  void Write(const void* bytes, std::size_t n) {
    out_.write(static_cast<const char*>(bytes), static_cast<std::streamsize>(n));
    if (!out_) throw IoError("tensor write failed", offset_);
    offset_ += n;
  }

  std::uint64_t offset() const { return offset_; }

 private:
  std::ostream& out_;
  std::uint64_t offset_ = 0;
};

// Reads exactly n bytes or returns the number actually read.
inline std::size_t ReadSome(std::istream& in, void* bytes, std::size_t n) {
  in.read(static_cast<char*>(bytes), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount());
}

}  // namespace detail

/// Serializes `t` to `out`. Returns the number of bytes written,
/// 16 + 4*ndim + 4*size.
inline std::uint64_t WriteTensor(const Tensor& t, std::ostream& out) {
  if (t.empty()) throw ShapeError("cannot write a tensor without shape");
  detail::CountingWriter writer(out);

  std::vector<unsigned char> header(16 + 4 * t.ndim());
  std::copy(kTensorMagic.begin(), kTensorMagic.end(), header.begin());
  detail::PutU32(&header[4], kTensorVersion);
  detail::PutU32(&header[8], kDtypeF32);
  detail::PutU32(&header[12], static_cast<std::uint32_t>(t.ndim()));
  for (std::size_t i = 0; i < t.ndim(); ++i) {
    detail::PutU32(&header[16 + 4 * i], static_cast<std::uint32_t>(t.dim(i)));
  }
  writer.Write(header.data(), header.size());

  constexpr std::size_t kChunk = 1 << 14;
  std::vector<unsigned char> buf;
  auto data = t.data();
  for (std::size_t begin = 0; begin < data.size(); begin += kChunk) {
    const std::size_t end = std::min(data.size(), begin + kChunk);
    buf.resize(4 * (end - begin));
    for (std::size_t i = begin; i < end; ++i) {
      detail::PutU32(&buf[4 * (i - begin)], std::bit_cast<std::uint32_t>(data[i]));
    }
    writer.Write(buf.data(), buf.size());
  }
  return writer.offset();
}

/// Parses one tensor from `in`, leaving the stream positioned after it.
inline Tensor ReadTensor(std::istream& in) {
  unsigned char fixed[16];
  const std::size_t got = detail::ReadSome(in, fixed, 4);
  if (got < 4 || !std::equal(kTensorMagic.begin(), kTensorMagic.end(), fixed)) {
    throw FormatError("bad tensor magic, expected \"CWCF\"");
  }
  if (detail::ReadSome(in, fixed + 4, 12) != 12) {
    throw TruncationError("tensor header truncated");
  }
  const std::uint32_t version = detail::GetU32(fixed + 4);
  const std::uint32_t dtype = detail::GetU32(fixed + 8);
  const std::uint32_t ndim = detail::GetU32(fixed + 12);
  if (version != kTensorVersion) {
    throw FormatError("unsupported tensor version " + std::to_string(version));
  }
  if (dtype == kDtypeF64) {
    throw FormatError("64-bit tensors are not accepted; store f32");
  }
  if (dtype != kDtypeF32) {
    throw FormatError("unknown tensor dtype " + std::to_string(dtype));
  }
  if (ndim < 1 || ndim > Tensor::kMaxDims) {
    throw FormatError("tensor ndim " + std::to_string(ndim) + " outside 1..4");
  }

  std::vector<unsigned char> dims_raw(4 * ndim);
  if (detail::ReadSome(in, dims_raw.data(), dims_raw.size()) != dims_raw.size()) {
    throw TruncationError("tensor shape truncated");
  }
  Tensor::Shape shape(ndim);
  for (std::uint32_t i = 0; i < ndim; ++i) {
    shape[i] = detail::GetU32(&dims_raw[4 * i]);
    if (shape[i] == 0) throw FormatError("tensor dimension of size 0");
  }

  // Read in chunks so a lying header cannot force a huge allocation up front.
  const std::size_t count = Tensor::Product(shape);
  std::vector<float> data;
  constexpr std::size_t kChunk = 1 << 16;
  std::vector<unsigned char> buf;
  while (data.size() < count) {
    const std::size_t want = std::min(kChunk, count - data.size());
    buf.resize(4 * want);
    const std::size_t read = detail::ReadSome(in, buf.data(), buf.size());
    if (read != buf.size()) {
      throw TruncationError("tensor payload truncated: header declares " +
                            std::to_string(count) + " values, found " +
                            std::to_string(data.size() + read / 4));
    }
    for (std::size_t i = 0; i < want; ++i) {
      data.push_back(std::bit_cast<float>(detail::GetU32(&buf[4 * i])));
    }
  }
  return Tensor(std::move(shape), std::move(data));
}

inline std::uint64_t WriteTensorFile(const Tensor& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing", 0);
  const auto n = WriteTensor(t, out);
  out.flush();
  if (!out) throw IoError("flush failed for " + path.string(), n);
  return n;
}

/// Reads a whole file as one tensor; trailing bytes are a length mismatch.
inline Tensor ReadTensorFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open tensor file " + path.string());
  try {
    Tensor t = ReadTensor(in);
    if (in.peek() != std::char_traits<char>::eof()) {
      throw TruncationError("trailing bytes after tensor payload");
    }
    return t;
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const TruncationError& e) {
    throw TruncationError(path.string() + ": " + e.what());
  }
}

}  // namespace camret
