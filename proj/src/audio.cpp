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

#include "roomprint/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include "roomprint/error.hpp"
#include "roomprint/fft.hpp"

namespace roomprint {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

double decode_sample(const unsigned char* p, std::uint16_t format, int bits) {
  if (format == kFormatFloat) {
    if (bits == 32) {
      return static_cast<double>(std::bit_cast<float>(read_u32(p)));
    }
    std::uint64_t raw = 0;
    for (int i = 0; i < 8; ++i) raw |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(raw);
  }
  switch (bits) {
    case 8:
      return (static_cast<int>(p[0]) - 128) / 128.0;
    case 16:
      return static_cast<std::int16_t>(read_u16(p)) / 32768.0;
    case 24: {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    case 32:
      return static_cast<std::int32_t>(read_u32(p)) / 2147483648.0;
  }
  return 0.0;
}

// Kaiser window value at normalized position x in [-1, 1].
double kaiser(double x, double beta) {
  const double arg = std::max(0.0, 1.0 - x * x);
  return std::cyl_bessel_i(0.0, beta * std::sqrt(arg)) / std::cyl_bessel_i(0.0, beta);
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

}  // namespace

void validate(const AudioBuffer& audio) {
  if (audio.sample_rate_hz <= 0) throw Error(ErrorKind::kInvalidArgument, "sample rate must be positive");
  if (audio.samples.empty()) throw Error(ErrorKind::kInvalidArgument, "empty audio buffer");
  for (double s : audio.samples) {
    if (!std::isfinite(s)) throw Error(ErrorKind::kInvalidArgument, "non-finite sample");
  }
}

AudioBuffer read_audio(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < 12) throw Error(ErrorKind::kCorruptFile, path.string());
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorKind::kUnsupportedFormat, path.string() + " is not RIFF/WAVE");
  }

  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw Error(ErrorKind::kCorruptFile, path.string());
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      if (format == kFormatExtensible) {
        if (size < 26) throw Error(ErrorKind::kCorruptFile, path.string());
        format = read_u16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (body + size > bytes.size()) throw Error(ErrorKind::kCorruptFile, path.string() + " (truncated data)");
      data = bytes.data() + body;
      data_size = size;
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt || data == nullptr) throw Error(ErrorKind::kCorruptFile, path.string() + " (missing chunk)");

  const bool pcm_ok = format == kFormatPcm && (bits == 8 || bits == 16 || bits == 24 || bits == 32);
  const bool float_ok = format == kFormatFloat && (bits == 32 || bits == 64);
  if (!pcm_ok && !float_ok) {
    throw Error(ErrorKind::kUnsupportedFormat,
                "format tag " + std::to_string(format) + ", " + std::to_string(bits) + " bits");
  }
  if (channels == 0 || rate == 0) throw Error(ErrorKind::kCorruptFile, path.string());

  const std::size_t stride = static_cast<std::size_t>(bits / 8) * channels;
  const std::size_t frames = data_size / stride;
  AudioBuffer out;
  out.sample_rate_hz = static_cast<int>(rate);
  out.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      acc += decode_sample(data + i * stride + c * (bits / 8), format, bits);
    }
    out.samples[i] = acc / channels;
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio, WavEncoding encoding) {
  const bool as_float = encoding == WavEncoding::kFloat32;
  const std::uint16_t bits = as_float ? 32 : 16;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(audio.samples.size() * (bits / 8));

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, as_float ? kFormatFloat : kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate_hz) * (bits / 8));
  put_u16(out, bits / 8);
  put_u16(out, bits);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : audio.samples) {
    if (as_float) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
    } else {
      const double clamped = std::clamp(s, -1.0, 32767.0 / 32768.0);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(clamped * 32768.0))));
    }
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(ErrorKind::kIo, "short write " + path.string());
}

AudioBuffer resample(const AudioBuffer& audio, int target_hz) {
  validate(audio);
  if (target_hz < 8000) throw Error(ErrorKind::kInvalidArgument, "target rate must be >= 8 kHz");
  if (target_hz == audio.sample_rate_hz) return audio;

  const int g = std::gcd(audio.sample_rate_hz, target_hz);
  const std::int64_t up = target_hz / g;
  const std::int64_t down = audio.sample_rate_hz / g;
  const std::int64_t ratio = std::max(up, down);

  // 32 zero crossings per side at the lower of the two rates: 64 taps per
  // output phase. Cutoff sits at the lower Nyquist frequency.
  constexpr int kZeroCrossings = 32;
  constexpr double kBeta = 8.6;
  const std::int64_t half = kZeroCrossings * ratio;
  const double cutoff = 0.5 / static_cast<double>(ratio);  // cycles per prototype sample
  std::vector<double> taps(static_cast<std::size_t>(2 * half + 1));
  for (std::int64_t n = -half; n <= half; ++n) {
    const double x = static_cast<double>(n);
    taps[static_cast<std::size_t>(n + half)] =
        static_cast<double>(up) * 2.0 * cutoff * sinc(2.0 * cutoff * x) * kaiser(x / static_cast<double>(half), kBeta);
  }

  const auto in_len = static_cast<std::int64_t>(audio.samples.size());
  const std::int64_t out_len = (in_len * up + down - 1) / down;
  AudioBuffer out;
  out.sample_rate_hz = target_hz;
  out.samples.assign(static_cast<std::size_t>(out_len), 0.0);
  for (std::int64_t m = 0; m < out_len; ++m) {
    const std::int64_t t = m * down;  // position on the upsampled grid
    // Input index n contributes taps[t + half - n*up] when that index is valid.
    std::int64_t n_lo = (t - half + up - 1);
    n_lo = n_lo >= 0 ? n_lo / up : -((-n_lo) / up);
    const std::int64_t n_hi = (t + half) / up;
    double acc = 0.0;
    for (std::int64_t n = std::max<std::int64_t>(0, n_lo); n <= std::min(n_hi, in_len - 1); ++n) {
      acc += audio.samples[static_cast<std::size_t>(n)] * taps[static_cast<std::size_t>(t + half - n * up)];
    }
    out.samples[static_cast<std::size_t>(m)] = acc;
  }
  return out;
}

std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  // Keep the longer sequence as the streamed input.
  if (b.size() > a.size()) std::swap(a, b);
  const std::size_t out_len = a.size() + b.size() - 1;
  std::vector<double> out(out_len, 0.0);

  if (b.size() <= 32) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    }
    return out;
  }

  const std::size_t block = std::max<std::size_t>(next_power_of_two(b.size()), 4096);
  const std::size_t n = next_power_of_two(block + b.size() - 1);
  RealFft fft(n);
  std::vector<std::complex<double>> kernel(fft.bins());
  std::vector<std::complex<double>> spec(fft.bins());
  std::vector<double> time(n);
  fft.forward(b, kernel);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t start = 0; start < a.size(); start += block) {
    const std::size_t len = std::min(block, a.size() - start);
    fft.forward(a.subspan(start, len), spec);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= kernel[k];
    fft.inverse(spec, time);
    const std::size_t valid = std::min(n, out_len - start);
    for (std::size_t i = 0; i < valid; ++i) out[start + i] += time[i] * scale;
  }
  return out;
}

AudioBuffer convolve_rir(const AudioBuffer& speech, const AudioBuffer& rir) {
  validate(speech);
  validate(rir);
  if (speech.sample_rate_hz != rir.sample_rate_hz) {
    throw Error(ErrorKind::kConfigMismatch, "speech and RIR sample rates differ");
  }
  AudioBuffer out;
  out.sample_rate_hz = speech.sample_rate_hz;
  out.samples = fft_convolve(speech.samples, rir.samples);
  double peak = 0.0;
  for (double s : out.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.0) {
    const double gain = 0.9 / peak;
    for (double& s : out.samples) s *= gain;
  }
  return out;
}

}  // namespace roomprint
