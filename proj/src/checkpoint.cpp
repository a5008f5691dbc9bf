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

#include "stalefl/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "stalefl/errors.hpp"

namespace stalefl {
namespace {

constexpr std::array<char, 4> kMagic = {'S', 'F', 'L', 'W'};

void write_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> bytes = {
      static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
      static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes.data(), bytes.size());
}

std::uint32_t read_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), b.size())) {
    throw FormatError("checkpoint truncated");
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const ParamVector& params, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  write_u32(out, kCheckpointVersion);
  const auto& dims = params.arch().layer_dims;
  write_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (std::size_t d : dims) write_u32(out, static_cast<std::uint32_t>(d));
  for (double v : params.values()) {
    write_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  if (!out) throw FormatError("failed to write checkpoint");
}

void save_checkpoint(const ParamVector& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  save_checkpoint(params, out);
}

ParamVector load_checkpoint(std::istream& in, Activation activation) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw FormatError("not a checkpoint (bad magic)");
  }
  const std::uint32_t version = read_u32(in);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = read_u32(in);
  if (count < 2 || count > 1024) throw FormatError("implausible layer count");
  ModelArch arch;
  arch.activation = activation;
  for (std::uint32_t i = 0; i < count; ++i) arch.layer_dims.push_back(read_u32(in));
  arch.validate();
  std::vector<double> values(arch.num_params());
  for (double& v : values) v = std::bit_cast<float>(read_u32(in));
  return ParamVector(std::move(arch), std::move(values));
}

ParamVector load_checkpoint(const std::filesystem::path& path, Activation activation) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return load_checkpoint(in, activation);
}

}  // namespace stalefl
