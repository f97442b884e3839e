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

#include "roomprint/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <random>
#include <sstream>

#include "roomprint/error.hpp"
#include "roomprint/fft.hpp"

namespace roomprint {
namespace {

struct Vowel {
  double f1, f2, f3;
};

// Adult male formant targets (Hz).
constexpr std::array<Vowel, 10> kVowels{{
    {270, 2290, 3010},  // i
    {390, 1990, 2550},  // I
    {530, 1840, 2480},  // E
    {660, 1720, 2410},  // ae
    {520, 1190, 2390},  // V
    {730, 1090, 2440},  // a
    {570, 840, 2410},   // O
    {440, 1020, 2240},  // U
    {300, 870, 2240},   // u
    {490, 1350, 1690},  // 3r
}};

constexpr double kF4 = 3500.0;

enum class Segment { kVowel, kNasal, kFricative, kPlosive, kPause };

struct Tracks {
  std::vector<double> voice;     // voicing amplitude
  std::vector<double> frication;
  std::vector<double> fric_hz;
  std::array<std::vector<double>, 4> formant;
  std::array<std::vector<double>, 4> bandwidth;

  explicit Tracks(std::size_t n) : voice(n, 0.0), frication(n, 0.0), fric_hz(n, 4000.0) {
    for (auto& f : formant) f.assign(n, 0.0);
    for (auto& b : bandwidth) b.assign(n, 0.0);
  }
};

// Raised-cosine on/off ramps of `ramp` samples.
double envelope(std::size_t i, std::size_t len, std::size_t ramp) {
  ramp = std::min(ramp, len / 2);
  if (ramp == 0) return 1.0;
  if (i < ramp) return 0.5 - 0.5 * std::cos(M_PI * static_cast<double>(i) / static_cast<double>(ramp));
  if (i + ramp >= len) return 0.5 - 0.5 * std::cos(M_PI * static_cast<double>(len - 1 - i) / static_cast<double>(ramp));
  return 1.0;
}

class Resonator {
 public:
  double step(double x, double freq, double bw, double fs) {
    const double r = std::exp(-M_PI * bw / fs);
    const double a1 = 2.0 * r * std::cos(2.0 * M_PI * freq / fs);
    const double a2 = -r * r;
    const double y = (1.0 - a1 - a2) * x + a1 * y1_ + a2 * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double y1_ = 0.0, y2_ = 0.0;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

double parse_number(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::kInvalidArgument, "bad number '" + s + "' in " + context);
  }
}

}  // namespace

AudioBuffer synthesize_speech(double duration_s, std::uint64_t speaker, std::uint64_t utterance, int sample_rate_hz) {
  if (!(duration_s > 0.0) || sample_rate_hz < 8000) throw Error(ErrorKind::kInvalidArgument, "bad speech duration or rate");
  const double fs = sample_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));

  std::mt19937_64 speaker_rng(0x5eed5eedULL ^ (speaker * 0x9e3779b97f4a7c15ULL));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double f0_base = 80.0 + 170.0 * unit(speaker_rng);
  // Higher voices go with shorter vocal tracts.
  const double tract_scale = 0.85 + 0.3 * (f0_base - 80.0) / 170.0 + 0.06 * (unit(speaker_rng) - 0.5);
  const double breathiness = 0.01 + 0.04 * unit(speaker_rng);
  const double fric_gain = 0.15 + 0.2 * unit(speaker_rng);

  std::mt19937_64 rng(speaker * 1000003ULL + utterance * 0x2545f4914f6cdd1dULL + 17);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  auto ms = [&](double lo, double hi) { return static_cast<std::size_t>(uniform(lo, hi) * fs / 1000.0); };

  Tracks tr(n);
  const std::size_t ramp = static_cast<std::size_t>(0.01 * fs);
  Vowel current = kVowels[static_cast<std::size_t>(unit(rng) * kVowels.size()) % kVowels.size()];
  std::size_t t = ms(80, 250);  // leading silence
  bool force_vowel = false;
  while (t < n) {
    Segment seg = Segment::kVowel;
    if (!force_vowel) {
      const double u = unit(rng);
      seg = u < 0.5 ? Segment::kVowel : u < 0.62 ? Segment::kNasal : u < 0.78 ? Segment::kFricative
            : u < 0.9 ? Segment::kPlosive : Segment::kPause;
    }
    force_vowel = false;
    std::size_t len = 0;
    switch (seg) {
      case Segment::kVowel: {
        current = kVowels[static_cast<std::size_t>(unit(rng) * kVowels.size()) % kVowels.size()];
        len = ms(80, 250);
        const double amp = uniform(0.6, 1.0);
        for (std::size_t i = 0; i < len && t + i < n; ++i) {
          const std::size_t k = t + i;
          tr.voice[k] = amp * envelope(i, len, ramp);
          tr.formant[0][k] = current.f1;
          tr.formant[1][k] = current.f2;
          tr.formant[2][k] = current.f3;
        }
        break;
      }
      case Segment::kNasal: {
        len = ms(50, 110);
        for (std::size_t i = 0; i < len && t + i < n; ++i) {
          const std::size_t k = t + i;
          tr.voice[k] = 0.35 * envelope(i, len, ramp);
          tr.formant[0][k] = 260.0;
          tr.formant[1][k] = 1150.0;
          tr.formant[2][k] = 2500.0;
        }
        break;
      }
      case Segment::kFricative: {
        len = ms(60, 160);
        const double center = uniform(2500.0, 6500.0);
        const bool voiced = unit(rng) < 0.3;
        for (std::size_t i = 0; i < len && t + i < n; ++i) {
          const std::size_t k = t + i;
          tr.frication[k] = fric_gain * envelope(i, len, ramp);
          tr.fric_hz[k] = center;
          if (voiced) tr.voice[k] = 0.25 * envelope(i, len, ramp);
          tr.formant[0][k] = current.f1;
          tr.formant[1][k] = current.f2;
          tr.formant[2][k] = current.f3;
        }
        break;
      }
      case Segment::kPlosive: {
        const std::size_t closure = ms(30, 70);
        const std::size_t burst = ms(10, 25);
        const double center = uniform(1500.0, 4500.0);
        len = closure + burst;
        for (std::size_t i = 0; i < burst && t + closure + i < n; ++i) {
          const std::size_t k = t + closure + i;
          tr.frication[k] = 1.5 * fric_gain * std::exp(-static_cast<double>(i) / (0.004 * fs));
          tr.fric_hz[k] = center;
        }
        force_vowel = true;
        break;
      }
      case Segment::kPause:
        len = ms(120, 400);
        break;
    }
    t += len;
  }

  // Formant and bandwidth tracks glide between targets (20 ms one-pole).
  const double glide = std::exp(-1.0 / (0.02 * fs));
  std::array<double, 4> state{current.f1, current.f2, current.f3, kF4};
  for (std::size_t k = 0; k < n; ++k) {
    if (tr.formant[0][k] > 0.0) {
      for (int f = 0; f < 3; ++f) state[static_cast<std::size_t>(f)] = glide * state[static_cast<std::size_t>(f)] + (1.0 - glide) * tr.formant[static_cast<std::size_t>(f)][k];
    }
    for (std::size_t f = 0; f < 4; ++f) {
      tr.formant[f][k] = std::min(state[f] * tract_scale, 0.45 * fs);
      tr.bandwidth[f][k] = 50.0 + 0.06 * tr.formant[f][k];
    }
  }

  std::vector<double> out(n, 0.0);
  std::array<Resonator, 4> tract;
  Resonator fric_res;
  double phase = 0.0;
  double drift = 0.0;
  double g1 = 0.0, g2 = 0.0;
  double fric_prev = 0.0;
  double rad_prev = 0.0;
  double period_jitter = 1.0;
  double shimmer = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double time = static_cast<double>(k) / fs;
    drift = 0.9995 * drift + 0.0005 * gauss(rng);
    const double f0 = f0_base * (1.0 + 0.12 * std::sin(2.0 * M_PI * 0.7 * time + static_cast<double>(utterance % 7)) +
                                 2.0 * drift - 0.08 * time / duration_s);
    phase += f0 * period_jitter / fs;
    double pulse = 0.0;
    if (phase >= 1.0) {
      phase -= 1.0;
      pulse = shimmer;
      period_jitter = 1.0 + 0.01 * gauss(rng);
      shimmer = 1.0 + 0.05 * gauss(rng);
    }
    // Glottal flow: two real poles near DC give the -12 dB/oct source slope.
    g1 = 0.96 * g1 + pulse;
    g2 = 0.96 * g2 + g1;
    const double source = tr.voice[k] * (0.04 * g2 + breathiness * gauss(rng));

    double v = source;
    for (std::size_t f = 0; f < 4; ++f) v = tract[f].step(v, tr.formant[f][k], tr.bandwidth[f][k], fs);

    double fric = 0.0;
    if (tr.frication[k] > 0.0) {
      const double white = gauss(rng);
      fric = fric_res.step(white - fric_prev, tr.fric_hz[k], 0.5 * tr.fric_hz[k], fs) * tr.frication[k];
      fric_prev = white;
    }
    const double y = v + fric;
    out[k] = y - 0.97 * rad_prev;
    rad_prev = y;
  }

  double peak = 0.0;
  for (double s : out) peak = std::max(peak, std::abs(s));
  const double scale = peak > 0.0 ? 0.5 / peak : 1.0;
  std::normal_distribution<double> floor_noise(0.0, 0.5e-3);
  for (double& s : out) s = s * scale + floor_noise(rng);
  return {std::move(out), sample_rate_hz};
}

AudioBuffer exponential_rir(double rt60_s, double length_s, int sample_rate_hz, std::uint64_t seed) {
  if (!(rt60_s > 0.0) || !(length_s > 0.0) || sample_rate_hz <= 0) throw Error(ErrorKind::kInvalidArgument, "bad RIR parameters");
  const auto n = static_cast<std::size_t>(std::llround(length_s * sample_rate_hz));
  const double tau = rt60_s / (3.0 * std::log(10.0));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  AudioBuffer h{std::vector<double>(n), sample_rate_hz};
  for (std::size_t i = 0; i < n; ++i) h.samples[i] = gauss(rng) * std::exp(-static_cast<double>(i) / sample_rate_hz / tau);
  return h;
}

std::vector<double> default_control_frequencies(std::size_t count) {
  if (count == 0) return {};
  if (count == 1) return {1000.0};
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = 125.0 * std::pow(32.0, static_cast<double>(i) / static_cast<double>(count - 1));
  }
  return out;
}

bool is_rir_spec(const std::string& text) {
  return text.rfind("synth:", 0) == 0 && text.size() > 6 && (std::isdigit(static_cast<unsigned char>(text[6])) || text[6] == '.');
}

RirSpec parse_rir_spec(const std::string& text) {
  if (!is_rir_spec(text)) throw Error(ErrorKind::kInvalidArgument, "not a synthetic RIR spec: " + text);
  const auto parts = split(text.substr(6), ':');
  RirSpec spec;
  for (const auto& v : split(parts[0], '/')) {
    const double rt = parse_number(v, text);
    if (!(rt > 0.0)) throw Error(ErrorKind::kInvalidArgument, "RT60 must be positive in " + text);
    spec.rt60_s.push_back(rt);
  }
  if (spec.rt60_s.empty()) throw Error(ErrorKind::kInvalidArgument, "no RT60 values in " + text);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const auto eq = parts[i].find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::kInvalidArgument, "bad option '" + parts[i] + "' in " + text);
    const std::string key = parts[i].substr(0, eq);
    const std::string value = parts[i].substr(eq + 1);
    if (key == "seed") {
      spec.seed = static_cast<std::uint64_t>(parse_number(value, text));
    } else if (key == "len") {
      spec.length_s = parse_number(value, text);
    } else if (key == "direct") {
      spec.direct_gain = parse_number(value, text);
    } else {
      throw Error(ErrorKind::kInvalidArgument, "unknown option '" + key + "' in " + text);
    }
  }
  return spec;
}

std::string format_rir_spec(const RirSpec& spec) {
  std::ostringstream out;
  out.precision(17);
  out << "synth:";
  for (std::size_t i = 0; i < spec.rt60_s.size(); ++i) out << (i ? "/" : "") << spec.rt60_s[i];
  out << ":seed=" << spec.seed;
  if (spec.length_s > 0.0) out << ":len=" << spec.length_s;
  if (spec.direct_gain != 1.0) out << ":direct=" << spec.direct_gain;
  return out.str();
}

AudioBuffer synthesize_rir(const RirSpec& spec, int sample_rate_hz) {
  if (spec.rt60_s.empty()) throw Error(ErrorKind::kInvalidArgument, "RIR spec without RT60 values");
  const std::vector<double> controls =
      spec.control_hz.empty() ? default_control_frequencies(spec.rt60_s.size()) : spec.control_hz;
  if (controls.size() != spec.rt60_s.size()) throw Error(ErrorKind::kInvalidArgument, "control and RT60 counts differ");
  const double max_rt = *std::max_element(spec.rt60_s.begin(), spec.rt60_s.end());
  const double length = spec.length_s > 0.0 ? spec.length_s : 2.0 * max_rt + 0.1;
  const auto n = static_cast<std::size_t>(std::llround(length * sample_rate_hz));
  if (n < 2) throw Error(ErrorKind::kInvalidArgument, "RIR too short");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> noise(n);
  for (double& v : noise) v = gauss(rng);

  std::vector<double> h(n, 0.0);
  auto add_band = [&](const std::vector<double>& band, double rt) {
    const double tau = rt / (3.0 * std::log(10.0));
    for (std::size_t i = 0; i < n; ++i) h[i] += band[i] * std::exp(-static_cast<double>(i) / sample_rate_hz / tau);
  };

  if (spec.rt60_s.size() == 1) {
    add_band(noise, spec.rt60_s[0]);
  } else {
    RealFft fft(n);
    std::vector<std::complex<double>> spectrum(n / 2 + 1);
    fft.forward(noise, spectrum);
    std::vector<double> log_ctrl(controls.size());
    std::transform(controls.begin(), controls.end(), log_ctrl.begin(), [](double f) { return std::log2(f); });
    std::vector<std::complex<double>> masked(spectrum.size());
    std::vector<double> band(n);
    for (std::size_t b = 0; b < controls.size(); ++b) {
      for (std::size_t k = 0; k < spectrum.size(); ++k) {
        const double f = static_cast<double>(k) * sample_rate_hz / static_cast<double>(n);
        const double u = std::log2(std::max(f, 1.0));
        double w = 0.0;
        if (u <= log_ctrl.front()) {
          w = b == 0 ? 1.0 : 0.0;
        } else if (u >= log_ctrl.back()) {
          w = b + 1 == controls.size() ? 1.0 : 0.0;
        } else {
          std::size_t seg = 0;
          while (u > log_ctrl[seg + 1]) ++seg;
          const double x = (u - log_ctrl[seg]) / (log_ctrl[seg + 1] - log_ctrl[seg]);
          const double c = std::cos(0.5 * M_PI * x);
          if (b == seg) w = c * c;
          else if (b == seg + 1) w = 1.0 - c * c;
        }
        masked[k] = spectrum[k] * (w / static_cast<double>(n));
      }
      fft.inverse(masked, band);
      add_band(band, spec.rt60_s[b]);
    }
  }
  double peak = 0.0;
  for (double v : h) peak = std::max(peak, std::abs(v));
  h[0] += spec.direct_gain * peak;
  return {std::move(h), sample_rate_hz};
}

bool is_speech_spec(const std::string& text) { return text.rfind("synth:speaker=", 0) == 0; }

SpeechSpec parse_speech_spec(const std::string& text) {
  if (!is_speech_spec(text)) throw Error(ErrorKind::kInvalidArgument, "not a synthetic speech spec: " + text);
  SpeechSpec spec;
  for (const auto& part : split(text.substr(6), ':')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::kInvalidArgument, "bad field '" + part + "' in " + text);
    const std::string key = part.substr(0, eq);
    const double value = parse_number(part.substr(eq + 1), text);
    if (key == "speaker") spec.speaker = static_cast<std::uint64_t>(value);
    else if (key == "utt") spec.utterance = static_cast<std::uint64_t>(value);
    else if (key == "dur") spec.duration_s = value;
    else throw Error(ErrorKind::kInvalidArgument, "unknown field '" + key + "' in " + text);
  }
  if (!(spec.duration_s > 0.0)) throw Error(ErrorKind::kInvalidArgument, "duration must be positive in " + text);
  return spec;
}

std::string format_speech_spec(const SpeechSpec& spec) {
  std::ostringstream out;
  out.precision(17);
  out << "synth:speaker=" << spec.speaker << ":utt=" << spec.utterance << ":dur=" << spec.duration_s;
  return out.str();
}

}  // namespace roomprint
