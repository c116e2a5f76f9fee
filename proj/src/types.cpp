/*
 * Copyright 2026 The maco-sim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "maco/types.hpp"

namespace maco {

std::string_view precision_name(Precision p) {
  switch (p) {
    case Precision::FP64: return "fp64";
    case Precision::FP32x2: return "fp32";
    case Precision::FP16x4: return "fp16";
  }
  return "?";
}

std::optional<Precision> parse_precision(std::string_view s) {
  if (s == "fp64" || s == "FP64") return Precision::FP64;
  if (s == "fp32" || s == "FP32" || s == "FP32x2" || s == "fp32x2") return Precision::FP32x2;
  if (s == "fp16" || s == "FP16" || s == "FP16x4" || s == "fp16x4") return Precision::FP16x4;
  return std::nullopt;
}

std::string_view exception_name(ExceptionType e) {
  switch (e) {
    case ExceptionType::None: return "None";
    case ExceptionType::ParamFault: return "ParamFault";
    case ExceptionType::FloatingPoint: return "FloatingPoint";
    case ExceptionType::PageFault: return "PageFault";
    case ExceptionType::DataAbort: return "DataAbort";
  }
  return "?";
}

}  // namespace maco
