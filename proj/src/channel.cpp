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

#include "roomprint/channel.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "roomprint/error.hpp"

namespace roomprint {

ChannelEstimate estimate_channel(const FrontEnd& front_end, const SpeechModel& model) {
  const RowMatrix& observed = front_end.spectra.values;
  if (observed.rows() == 0) throw Error(ErrorKind::kSignalTooShort, "no frames after warm-up");
  if (observed.cols() != model.bins()) throw Error(ErrorKind::kConfigMismatch, "spectral grid differs from the model");

  const ProbMatrix posteriors = mixture_posteriors(model, front_end.cepstra);
  const SpectraMatrix ideal = ideal_speech_from_posteriors(model, posteriors);

  const Eigen::RowVectorXd diff = (observed - ideal.values).colwise().mean();
  ChannelEstimate out;
  out.bin_hz = front_end.spectra.bin_hz;
  out.n_frames_used = static_cast<std::size_t>(observed.rows());
  out.posterior_underflow_rows = posteriors.underflow_rows;
  out.log_magnitude.resize(static_cast<std::size_t>(diff.size()));
  for (long k = 0; k < diff.size(); ++k) out.log_magnitude[static_cast<std::size_t>(k)] = 0.5 * diff[k];
  return out;
}

ChannelEstimate estimate_channel(const AudioBuffer& recording, const SpeechModel& model) {
  validate(recording);
  if (recording.sample_rate_hz != model.frame_config.sample_rate_hz) {
    throw Error(ErrorKind::kConfigMismatch, "recording at " + std::to_string(recording.sample_rate_hz) +
                                                " Hz, model at " + std::to_string(model.frame_config.sample_rate_hz) +
                                                " Hz");
  }
  if (recording.samples.size() < static_cast<std::size_t>(recording.sample_rate_hz)) {
    throw Error(ErrorKind::kSignalTooShort, "recording shorter than 1 s");
  }
  return estimate_channel(compute_front_end(recording, model.frame_config), model);
}

std::vector<double> smooth3(const std::vector<double>& values) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    double sum = values[i];
    int n = 1;
    if (i > 0) {
      sum += values[i - 1];
      ++n;
    }
    if (i + 1 < values.size()) {
      sum += values[i + 1];
      ++n;
    }
    out[i] = sum / n;
  }
  return out;
}

void write_channel_csv(const std::filesystem::path& path, const ChannelEstimate& estimate) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  f << "freq_hz,log_magnitude\n";
  char line[96];
  for (std::size_t k = 0; k < estimate.log_magnitude.size(); ++k) {
    std::snprintf(line, sizeof line, "%.17g,%.17g\n", estimate.bin_hz * static_cast<double>(k),
                  estimate.log_magnitude[k]);
    f << line;
  }
}

ChannelEstimate read_channel_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::string line;
  if (!std::getline(f, line) || line.rfind("freq_hz,log_magnitude", 0) != 0) {
    throw Error(ErrorKind::kUnsupportedFormat, path.string() + " lacks the channel CSV header");
  }
  ChannelEstimate out;
  std::vector<double> freqs;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorKind::kCorruptFile, "bad channel CSV row");
    freqs.push_back(std::stod(line.substr(0, comma)));
    out.log_magnitude.push_back(std::stod(line.substr(comma + 1)));
  }
  if (out.log_magnitude.size() < 2) throw Error(ErrorKind::kCorruptFile, "channel CSV has fewer than 2 bins");
  out.bin_hz = freqs[1] - freqs[0];
  for (double v : out.log_magnitude) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kCorruptFile, "non-finite channel value");
  }
  return out;
}

}  // namespace roomprint
