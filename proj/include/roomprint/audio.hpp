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

#include <filesystem>
#include <span>
#include <vector>

namespace roomprint {

// Mono PCM signal. Samples are nominally in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate_hz = 0;

  std::size_t size() const noexcept { return samples.size(); }
  double duration_s() const noexcept {
    return sample_rate_hz > 0 ? static_cast<double>(samples.size()) / sample_rate_hz : 0.0;
  }
};

// Throws kInvalidArgument unless the rate is positive, the buffer is
// non-empty and every sample is finite.
void validate(const AudioBuffer& audio);

// Reads a RIFF/WAVE file (PCM 8/16/24/32-bit or IEEE float 32/64-bit,
// WAVE_FORMAT_EXTENSIBLE included). Multi-channel input is downmixed by
// averaging. Integer PCM is scaled by 1/2^(bits-1).
AudioBuffer read_audio(const std::filesystem::path& path);

enum class WavEncoding { kFloat32, kPcm16 };

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               WavEncoding encoding = WavEncoding::kFloat32);

// Rational polyphase resampler with a Kaiser-windowed sinc prototype.
// Same-rate input is returned unchanged.
AudioBuffer resample(const AudioBuffer& audio, int target_hz);

// Full linear convolution via FFT overlap-add, no normalization.
std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b);

// Reverberant rendering of dry speech: full convolution, then peak-normalized
// to 0.9. Throws kConfigMismatch on differing sample rates.
AudioBuffer convolve_rir(const AudioBuffer& speech, const AudioBuffer& rir);

}  // namespace roomprint
