/*
 * Copyright 2026 The StaleFL Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <iosfwd>

#include "stalefl/nn.hpp"

namespace stalefl {

// Binary checkpoint, little-endian:
//   "SFLW" | u32 version | u32 dim count | u32 dims... | f32 values...
// Values are narrowed to f32; the activation is not stored and is supplied
// when loading.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ParamVector& params, std::ostream& out);
void save_checkpoint(const ParamVector& params, const std::filesystem::path& path);

ParamVector load_checkpoint(std::istream& in,
                            Activation activation = Activation::kRelu);
ParamVector load_checkpoint(const std::filesystem::path& path,
                            Activation activation = Activation::kRelu);

}  // namespace stalefl
