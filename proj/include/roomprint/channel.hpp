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
#include <vector>

#include "roomprint/audio.hpp"
#include "roomprint/speech_model.hpp"

namespace roomprint {

// Mean-normalized natural-log channel magnitude on the one-sided bin grid.
struct ChannelEstimate {
  std::vector<double> log_magnitude;
  double bin_hz = 0.0;
  std::size_t n_frames_used = 0;
  std::size_t posterior_underflow_rows = 0;

  std::size_t bins() const noexcept { return log_magnitude.size(); }
};

// Blind estimate: average over frames of (recording log-power - ideal speech
// log-power), both mean-normalized, halved to convert power to magnitude.
// Throws kConfigMismatch on a sample-rate mismatch and kSignalTooShort for
// recordings under one second or with no frames after the RASTA warm-up.
ChannelEstimate estimate_channel(const AudioBuffer& recording, const SpeechModel& model);

// Same estimate from precomputed front-end output.
ChannelEstimate estimate_channel(const FrontEnd& front_end, const SpeechModel& model);

// Three-bin moving average for display; endpoints average the available bins.
std::vector<double> smooth3(const std::vector<double>& values);

// CSV with header "freq_hz,log_magnitude", values printed round-trip exact.
void write_channel_csv(const std::filesystem::path& path, const ChannelEstimate& estimate);
ChannelEstimate read_channel_csv(const std::filesystem::path& path);

}  // namespace roomprint
