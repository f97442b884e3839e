// Copyright 2026 The Roomprint Authors. All Rights Reserved.
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
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace roomprint {

// Self-describing little-endian container of named arrays used by the model
// files. Layout:
//
//   magic[8]            e.g. "RPLGMM1\0"
//   u32 version         currently 1
//   u32 entry count
//   per entry:
//     u16 name length, name bytes
//     u8  type          0 = float64 array, 1 = string list
//     float64: u32 rank, u64 dims[rank], f64 data[prod(dims)] (row-major)
//     strings: u32 count, per string u32 length + bytes
struct Float64Array {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;
};

class Container {
 public:
  static constexpr std::uint32_t kVersion = 1;

  explicit Container(std::string magic) : magic_(std::move(magic)) {}

  const std::string& magic() const noexcept { return magic_; }

  void put(const std::string& name, Float64Array array);
  void put(const std::string& name, std::vector<double> vector);
  void put_scalar(const std::string& name, double value);
  void put_strings(const std::string& name, std::vector<std::string> values);

  const Float64Array& array(const std::string& name) const;
  double scalar(const std::string& name) const;
  const std::vector<std::string>& strings(const std::string& name) const;
  bool has(const std::string& name) const;

  std::string serialize() const;
  static Container parse(const std::string& bytes, const std::string& expected_magic);

  void save(const std::filesystem::path& path) const;
  static Container load(const std::filesystem::path& path, const std::string& expected_magic);

 private:
  std::string magic_;
  std::map<std::string, Float64Array> arrays_;
  std::map<std::string, std::vector<std::string>> strings_;
};

// 64-bit FNV-1a, used for content-addressed cache keys.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

}  // namespace roomprint
