/*
Copyright 2026 The csfp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

// TNSR tensor files:
//   "TNSR" | u8 version=1 | u8 ndim | 2 reserved zero bytes
//   | ndim x u32 dims | product(dims) x f32 values, row-major.
// All integers and floats little-endian.

#pragma once

#include <cmath>
#include <filesystem>
#include <limits>

#include "csfp/binary.hpp"
#include "csfp/tensor.hpp"

namespace csfp {

inline constexpr std::uint8_t kTnsrVersion = 1;

inline Bytes encode_tnsr(const Tensor& t) {
  if (t.rank() > 255) throw Error(Errc::kInvalidDims, "too many dims for TNSR");
  ByteWriter w;
  w.raw("TNSR");
  w.u8(kTnsrVersion);
  w.u8(static_cast<std::uint8_t>(t.rank()));
  w.u8(0);
  w.u8(0);
  for (std::size_t d : t.dims()) {
    if (d > std::numeric_limits<std::uint32_t>::max()) {
      throw Error(Errc::kInvalidDims, "dim too large for TNSR");
    }
    w.u32(static_cast<std::uint32_t>(d));
  }
  for (double v : t.data()) {
    const auto f = static_cast<float>(v);
    if (!std::isfinite(f)) {
      throw Error(Errc::kInvalidValue, "value overflows f32 storage");
    }
    w.f32(f);
  }
  return w.take();
}

inline Tensor decode_tnsr(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.str(4) != "TNSR") throw Error(Errc::kFormat, "bad TNSR magic");
  if (r.u8() != kTnsrVersion) throw Error(Errc::kFormat, "unsupported TNSR version");
  const std::size_t ndim = r.u8();
  if (r.u8() != 0 || r.u8() != 0) {
    throw Error(Errc::kFormat, "TNSR reserved bytes not zero");
  }
  if (ndim == 0) throw Error(Errc::kFormat, "TNSR has no dims");
  std::vector<std::size_t> dims(ndim);
  std::size_t count = 1;
  for (auto& d : dims) {
    d = r.u32();
    if (d == 0) throw Error(Errc::kFormat, "TNSR dim is zero");
    if (count > r.remaining() / d) {
      throw Error(Errc::kFormat, "TNSR dims exceed payload");
    }
    count *= d;
  }
  if (r.remaining() != count * 4) {
    throw Error(Errc::kFormat, "TNSR payload length does not match dims");
  }
  std::vector<double> data(count);
  for (auto& v : data) {
    v = r.f32();
    if (!std::isfinite(v)) throw Error(Errc::kFormat, "TNSR value not finite");
  }
  return Tensor(std::move(dims), std::move(data));
}

inline void write_tnsr(const std::filesystem::path& path, const Tensor& t) {
  write_file(path, encode_tnsr(t));
}

inline Tensor read_tnsr(const std::filesystem::path& path) {
  return decode_tnsr(read_file(path));
}

}  // namespace csfp
