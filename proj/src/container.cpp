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

#include "roomprint/container.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "roomprint/error.hpp"

namespace roomprint {
namespace {

constexpr std::size_t kMagicBytes = 8;
constexpr std::uint8_t kTypeFloat64 = 0;
constexpr std::uint8_t kTypeStrings = 1;

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
  }
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error(ErrorKind::kCorruptFile, "truncated container");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void Container::put(const std::string& name, Float64Array array) {
  std::uint64_t count = 1;
  for (auto d : array.dims) count *= d;
  if (count != array.data.size()) throw Error(ErrorKind::kInvalidArgument, "array dims do not match data: " + name);
  arrays_[name] = std::move(array);
}

void Container::put(const std::string& name, std::vector<double> vector) {
  Float64Array a;
  a.dims = {vector.size()};
  a.data = std::move(vector);
  put(name, std::move(a));
}

void Container::put_scalar(const std::string& name, double value) { put(name, std::vector<double>{value}); }

void Container::put_strings(const std::string& name, std::vector<std::string> values) {
  strings_[name] = std::move(values);
}

const Float64Array& Container::array(const std::string& name) const {
  const auto it = arrays_.find(name);
  if (it == arrays_.end()) throw Error(ErrorKind::kCorruptFile, "missing array '" + name + "'");
  return it->second;
}

double Container::scalar(const std::string& name) const {
  const auto& a = array(name);
  if (a.data.size() != 1) throw Error(ErrorKind::kCorruptFile, "'" + name + "' is not a scalar");
  return a.data.front();
}

const std::vector<std::string>& Container::strings(const std::string& name) const {
  const auto it = strings_.find(name);
  if (it == strings_.end()) throw Error(ErrorKind::kCorruptFile, "missing string list '" + name + "'");
  return it->second;
}

bool Container::has(const std::string& name) const {
  return arrays_.contains(name) || strings_.contains(name);
}

std::string Container::serialize() const {
  std::string out = magic_;
  out.resize(kMagicBytes, '\0');
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(arrays_.size() + strings_.size()));
  for (const auto& [name, a] : arrays_) {
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    put_le<std::uint8_t>(out, kTypeFloat64);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.dims.size()));
    for (auto d : a.dims) put_le<std::uint64_t>(out, d);
    for (double v : a.data) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  for (const auto& [name, list] : strings_) {
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    put_le<std::uint8_t>(out, kTypeStrings);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(list.size()));
    for (const auto& s : list) {
      put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
      out += s;
    }
  }
  return out;
}

Container Container::parse(const std::string& bytes, const std::string& expected_magic) {
  Reader r(bytes);
  std::string magic = r.take(kMagicBytes);
  std::string expected = expected_magic;
  expected.resize(kMagicBytes, '\0');
  if (magic != expected) throw Error(ErrorKind::kUnsupportedFormat, "bad magic, expected " + expected_magic);
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw Error(ErrorKind::kUnsupportedFormat, "container version " + std::to_string(version));

  Container c(expected_magic);
  const auto entries = r.get<std::uint32_t>();
  for (std::uint32_t e = 0; e < entries; ++e) {
    const auto name_len = r.get<std::uint16_t>();
    std::string name = r.take(name_len);
    const auto type = r.get<std::uint8_t>();
    if (type == kTypeFloat64) {
      Float64Array a;
      const auto rank = r.get<std::uint32_t>();
      std::uint64_t count = 1;
      for (std::uint32_t i = 0; i < rank; ++i) {
        a.dims.push_back(r.get<std::uint64_t>());
        count *= a.dims.back();
      }
      if (count > bytes.size() / 8) throw Error(ErrorKind::kCorruptFile, "array '" + name + "' exceeds file");
      a.data.resize(count);
      for (auto& v : a.data) v = std::bit_cast<double>(r.get<std::uint64_t>());
      c.arrays_[name] = std::move(a);
    } else if (type == kTypeStrings) {
      const auto count = r.get<std::uint32_t>();
      std::vector<std::string> list;
      for (std::uint32_t i = 0; i < count; ++i) list.push_back(r.take(r.get<std::uint32_t>()));
      c.strings_[name] = std::move(list);
    } else {
      throw Error(ErrorKind::kCorruptFile, "unknown entry type");
    }
  }
  if (!r.done()) throw Error(ErrorKind::kCorruptFile, "trailing bytes");
  return c;
}

void Container::save(const std::filesystem::path& path) const {
  const std::string bytes = serialize();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorKind::kIo, "short write " + path.string());
}

Container Container::load(const std::filesystem::path& path, const std::string& expected_magic) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse(bytes, expected_magic);
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace roomprint
