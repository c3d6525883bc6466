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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace csfp {

enum class Errc {
  kIo,
  kFormat,
  kInvalidDims,
  kInvalidValue,
  kIndexOutOfRange,
  kDegenerateInput,
  kChainError,
  kUnknownLayer,
  kChannelMismatch,
  kDimMismatch,
  kEmptyStack,
  kIdenticalImages,
  kTooSmall,
  kInvalidSpec,
  kEmptyCorpus,
  kDegenerateData,
  kTooFew,
};

constexpr std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kIo: return "IoError";
    case Errc::kFormat: return "FormatError";
    case Errc::kInvalidDims: return "InvalidDims";
    case Errc::kInvalidValue: return "InvalidValue";
    case Errc::kIndexOutOfRange: return "IndexOutOfRange";
    case Errc::kDegenerateInput: return "DegenerateInput";
    case Errc::kChainError: return "ChainError";
    case Errc::kUnknownLayer: return "UnknownLayer";
    case Errc::kChannelMismatch: return "ChannelMismatch";
    case Errc::kDimMismatch: return "DimMismatch";
    case Errc::kEmptyStack: return "EmptyStack";
    case Errc::kIdenticalImages: return "IdenticalImages";
    case Errc::kTooSmall: return "TooSmall";
    case Errc::kInvalidSpec: return "InvalidSpec";
    case Errc::kEmptyCorpus: return "EmptyCorpus";
    case Errc::kDegenerateData: return "DegenerateData";
    case Errc::kTooFew: return "TooFew";
  }
  return "Unknown";
}

// Every failure in the library is reported as an Error carrying one of the
// codes above; callers branch on code() rather than on message text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace csfp
