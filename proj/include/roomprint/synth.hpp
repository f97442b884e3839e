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
#include <string>
#include <vector>

#include "roomprint/audio.hpp"

namespace roomprint {

// Formant-synthesized speech-like signal: glottal pulse trains through
// time-varying vowel resonators, fricative noise, plosive bursts and pauses
// over a -60 dB noise floor. Speaker traits (F0 range, vocal-tract scale)
// derive from `speaker`, the segment sequence from `utterance`.
AudioBuffer synthesize_speech(double duration_s, std::uint64_t speaker, std::uint64_t utterance,
                              int sample_rate_hz = 16000);

// White noise under the envelope exp(-t / tau) with tau = rt60 / (3 ln 10).
AudioBuffer exponential_rir(double rt60_s, double length_s, int sample_rate_hz, std::uint64_t seed);

// RT60 control points; decay rates are blended between neighbouring
// points with raised-cosine masks on a log-frequency axis.
struct RirSpec {
  std::vector<double> rt60_s;
  std::vector<double> control_hz;  // empty -> log-spaced over 125 Hz .. 4 kHz
  std::uint64_t seed = 1;
  double length_s = 0.0;        // 0 -> 2 max(rt60) + 0.1 s
  double direct_gain = 1.0;     // direct impulse relative to the largest tail sample
};

std::vector<double> default_control_frequencies(std::size_t count);

// "synth:<rt1>/<rt2>/...[:seed=N][:len=S][:direct=G]". Throws kInvalidArgument.
RirSpec parse_rir_spec(const std::string& text);
std::string format_rir_spec(const RirSpec& spec);
bool is_rir_spec(const std::string& text);

AudioBuffer synthesize_rir(const RirSpec& spec, int sample_rate_hz);

// "synth:speaker=S:utt=U:dur=D" names a generated dry utterance.
struct SpeechSpec {
  std::uint64_t speaker = 0;
  std::uint64_t utterance = 0;
  double duration_s = 4.0;
};

SpeechSpec parse_speech_spec(const std::string& text);
std::string format_speech_spec(const SpeechSpec& spec);
bool is_speech_spec(const std::string& text);

}  // namespace roomprint
