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

#include "roomprint/roomprint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <complex>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "roomprint/error.hpp"
#include "roomprint/parallel.hpp"

namespace roomprint {
namespace {

using cd = std::complex<double>;

cd bilinear(cd s, double fs2) { return (fs2 + s) / (fs2 - s); }

Biquad section_from_poles(cd p1, cd p2, double b0, double b1, double b2) {
  const cd sum = p1 + p2;
  const cd prod = p1 * p2;
  return {b0, b1, b2, -sum.real(), prod.real()};
}

// Groups digital poles into conjugate pairs (or pairs of real poles).
std::vector<std::pair<cd, cd>> pair_poles(std::vector<cd> poles) {
  std::vector<std::pair<cd, cd>> pairs;
  std::vector<cd> reals;
  for (const cd& p : poles) {
    if (std::abs(p.imag()) <= 1e-12 * std::max(1.0, std::abs(p))) {
      reals.push_back({p.real(), 0.0});
    } else if (p.imag() > 0.0) {
      pairs.emplace_back(p, std::conj(p));
    }
  }
  std::sort(reals.begin(), reals.end(), [](cd x, cd y) { return x.real() < y.real(); });
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) pairs.emplace_back(reals[i], reals[i + 1]);
  if (reals.size() % 2 == 1) pairs.emplace_back(reals.back(), cd{0.0, 0.0});
  return pairs;
}

void normalize_gain(SosFilter& f, double omega) {
  const double g = f.magnitude(omega);
  if (g > 0.0 && !f.sections.empty()) {
    auto& s = f.sections.front();
    s.b0 /= g;
    s.b1 /= g;
    s.b2 /= g;
  }
}

void check_alpha(double alpha) {
  if (!(alpha >= 1.0) || !std::isfinite(alpha)) throw Error(ErrorKind::kInvalidArgument, "alpha must be >= 1");
}

// Fit over [start_db, end_db]; throws when the window is not covered.
double fit_decay(const DecayCurve& curve, double start_db, double end_db) {
  const auto& e = curve.edc_db;
  if (e.empty() || *std::min_element(e.begin(), e.end()) > end_db) {
    throw Error(ErrorKind::kInsufficientDecay, "curve does not reach " + std::to_string(end_db) + " dB");
  }
  double st = 0.0, se = 0.0, stt = 0.0, ste = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (e[i] > start_db) continue;
    if (e[i] < end_db) break;
    const double t = curve.times[i];
    st += t;
    se += e[i];
    stt += t * t;
    ste += t * e[i];
    ++count;
  }
  if (count < 2) throw Error(ErrorKind::kInsufficientDecay, "fewer than two points in the fit window");
  const double n = static_cast<double>(count);
  const double denom = n * stt - st * st;
  const double slope = denom > 0.0 ? (n * ste - st * se) / denom : 0.0;
  if (!(slope < 0.0)) throw Error(ErrorKind::kInsufficientDecay, "non-decaying fit");
  return -60.0 / slope;
}

}  // namespace

double midband_frequency(int band_index, int octave_fraction) {
  if (octave_fraction < 1) throw Error(ErrorKind::kInvalidArgument, "octave fraction must be >= 1");
  const double b = band_index;
  const double B = octave_fraction;
  const double exponent = octave_fraction % 2 == 1 ? (b - 30.0) / B : (2.0 * b - 59.0) / (2.0 * B);
  return std::exp2(exponent) * kReferenceHz;
}

Band make_band(int band_index, int octave_fraction) {
  Band band;
  band.index = band_index;
  band.f_mid = midband_frequency(band_index, octave_fraction);
  const double half = std::exp2(1.0 / (2.0 * octave_fraction));
  band.f_lower = band.f_mid / half;
  band.f_upper = band.f_mid * half;
  return band;
}

Filterbank design_filterbank(int octave_fraction, double f_min, double f_max, int sample_rate_hz) {
  if (octave_fraction < 1) throw Error(ErrorKind::kInvalidArgument, "octave fraction must be >= 1");
  if (sample_rate_hz <= 0) throw Error(ErrorKind::kInvalidArgument, "sample rate must be positive");
  const double nyquist = sample_rate_hz / 2.0;
  if (!(f_min > 0.0 && f_min < f_max && f_max <= nyquist)) {
    throw Error(ErrorKind::kInvalidArgument, "need 0 < f_min < f_max <= Nyquist");
  }
  const double cap = std::min(f_max, kNyquistCap * nyquist);

  Filterbank bank;
  bank.octave_fraction = octave_fraction;
  bank.sample_rate_hz = sample_rate_hz;
  // Smallest b whose upper edge exceeds f_min, found from the closed form and
  // then nudged to absorb rounding.
  const double B = octave_fraction;
  const double offset = octave_fraction % 2 == 1 ? 30.0 : 29.5;
  int b = static_cast<int>(std::floor(B * std::log2(f_min / kReferenceHz) + offset - 0.5)) - 2;
  while (make_band(b, octave_fraction).f_upper <= f_min) ++b;
  for (; make_band(b, octave_fraction).f_mid <= cap * (1.0 + 1e-12); ++b) {
    bank.bands.push_back(make_band(b, octave_fraction));
  }
  if (bank.bands.empty()) throw Error(ErrorKind::kNoBands);
  return bank;
}

std::vector<double> SosFilter::apply(std::span<const double> x) const {
  std::vector<double> y(x.begin(), x.end());
  for (const auto& s : sections) {
    double z1 = 0.0, z2 = 0.0;
    for (double& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

double SosFilter::magnitude(double omega) const {
  const cd z1 = std::polar(1.0, -omega);
  const cd z2 = z1 * z1;
  cd h = 1.0;
  for (const auto& s : sections) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return std::abs(h);
}

SosFilter design_band_filter(double f_lower, double f_upper, int sample_rate_hz, int prototype_order) {
  const double fs = sample_rate_hz;
  const double nyquist = fs / 2.0;
  if (!(f_lower > 0.0 && f_lower < f_upper && f_lower < kNyquistCap * nyquist)) {
    throw Error(ErrorKind::kInvalidArgument, "invalid band edges");
  }
  const int n = prototype_order;
  const double fs2 = 2.0 * fs;
  std::vector<cd> prototype;
  for (int k = 0; k < n; ++k) prototype.push_back(std::polar(1.0, M_PI * (2.0 * k + n + 1) / (2.0 * n)));

  SosFilter filter;
  const double wl = fs2 * std::tan(M_PI * f_lower / fs);
  if (f_upper >= kNyquistCap * nyquist) {
    std::vector<cd> poles;
    for (const cd& p : prototype) poles.push_back(bilinear(wl / p, fs2));
    for (const auto& [p1, p2] : pair_poles(poles)) {
      const bool first_order = p2 == cd{0.0, 0.0};
      filter.sections.push_back(first_order ? Biquad{1.0, -1.0, 0.0, -p1.real(), 0.0}
                                            : section_from_poles(p1, p2, 1.0, -2.0, 1.0));
    }
    normalize_gain(filter, M_PI);
    return filter;
  }

  const double wu = fs2 * std::tan(M_PI * f_upper / fs);
  const double w0 = std::sqrt(wl * wu);
  const double bw = wu - wl;
  std::vector<cd> poles;
  for (const cd& p : prototype) {
    const cd half = p * bw / 2.0;
    const cd root = std::sqrt(half * half - w0 * w0);
    poles.push_back(bilinear(half + root, fs2));
    poles.push_back(bilinear(half - root, fs2));
  }
  for (const auto& [p1, p2] : pair_poles(poles)) filter.sections.push_back(section_from_poles(p1, p2, 1.0, 0.0, -1.0));
  normalize_gain(filter, 2.0 * std::atan(w0 / fs2));
  return filter;
}

AudioBuffer apply_bandpass(const AudioBuffer& signal, double f_lower, double f_upper) {
  validate(signal);
  const double bin = static_cast<double>(signal.sample_rate_hz) / static_cast<double>(signal.samples.size());
  const double upper = std::min(f_upper, signal.sample_rate_hz / 2.0);
  if (upper - f_lower < 2.0 * bin) throw Error(ErrorKind::kBandUnresolvable);
  const SosFilter filter = design_band_filter(f_lower, f_upper, signal.sample_rate_hz);

  std::vector<double> y = filter.apply(signal.samples);
  std::reverse(y.begin(), y.end());
  y = filter.apply(y);
  std::reverse(y.begin(), y.end());
  return {std::move(y), signal.sample_rate_hz};
}

DecayCurve schroeder_decay(const AudioBuffer& band_signal) {
  validate(band_signal);
  const auto& h = band_signal.samples;
  std::size_t last = h.size();
  while (last > 0 && h[last - 1] == 0.0) --last;
  if (last == 0) throw Error(ErrorKind::kZeroEnergy);

  std::vector<double> tail(last);
  double acc = 0.0;
  for (std::size_t i = last; i-- > 0;) {
    acc += h[i] * h[i];
    tail[i] = acc;
  }
  const double total = tail.front();
  DecayCurve curve;
  curve.times.resize(last);
  curve.edc_db.resize(last);
  for (std::size_t i = 0; i < last; ++i) {
    curve.times[i] = static_cast<double>(i) / band_signal.sample_rate_hz;
    curve.edc_db[i] = 10.0 * std::log10(tail[i] / total);
  }
  curve.edc_db.front() = 0.0;
  return curve;
}

double estimate_rt60(const DecayCurve& curve, double alpha, const Rt60Options& options) {
  check_alpha(alpha);
  return fit_decay(curve, options.start_db, options.start_db - 60.0 / alpha);
}

BandRt60 estimate_rt60_with_fallback(const DecayCurve& curve, double alpha, const Rt60Options& options) {
  check_alpha(alpha);
  std::vector<double> ladder{alpha};
  for (double fallback : {2.0, 3.0}) {
    if (fallback > ladder.back()) ladder.push_back(fallback);
  }
  BandRt60 out;
  for (double a : ladder) {
    try {
      out.rt60_s = estimate_rt60(curve, a, options);
      out.alpha_used = a;
      return out;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kInsufficientDecay) throw;
    }
  }
  out.failed = true;
  const double deepest = curve.edc_db.empty() ? 0.0 : *std::min_element(curve.edc_db.begin(), curve.edc_db.end());
  const double end_db = std::max(deepest, options.start_db - 60.0);
  out.alpha_used = ladder.back();
  out.rt60_s = std::numeric_limits<double>::quiet_NaN();
  if (options.start_db - end_db >= 10.0) {
    try {
      out.rt60_s = fit_decay(curve, options.start_db, end_db);
      out.alpha_used = 60.0 / (options.start_db - end_db);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kInsufficientDecay) throw;
    }
  }
  return out;
}

std::vector<double> Roomprint::features() const {
  if (!log_transformed) return rt60_s;
  std::vector<double> out(rt60_s.size());
  std::transform(rt60_s.begin(), rt60_s.end(), out.begin(), [](double v) { return std::log(v); });
  return out;
}

Roomprint compute_roomprint(const AudioBuffer& rir_estimate, const Filterbank& bank, double alpha, bool log_transform) {
  RoomprintOptions options;
  options.alpha = alpha;
  options.log_transform = log_transform;
  return compute_roomprint(rir_estimate, bank, options);
}

Roomprint compute_roomprint(const AudioBuffer& rir_estimate, const Filterbank& bank, const RoomprintOptions& options) {
  validate(rir_estimate);
  check_alpha(options.alpha);
  if (rir_estimate.sample_rate_hz != bank.sample_rate_hz) {
    throw Error(ErrorKind::kConfigMismatch, "RIR and filterbank sample rates differ");
  }

  const std::size_t count = bank.bands.size();
  Roomprint rp;
  rp.octave_fraction = bank.octave_fraction;
  rp.alpha = options.alpha;
  rp.log_transformed = options.log_transform;
  rp.rt60_s.assign(count, 0.0);
  rp.alpha_used.assign(count, options.alpha);
  std::vector<char> failed(count, 0);

  parallel_for(count, [&](std::size_t i) {
    const Band& band = bank.bands[i];
    const BandRt60 r =
        estimate_rt60_with_fallback(schroeder_decay(apply_bandpass(rir_estimate, band.f_lower, band.f_upper)), options.alpha, options.rt60);
    rp.rt60_s[i] = r.rt60_s;
    rp.alpha_used[i] = r.alpha_used;
    failed[i] = r.failed;
  });

  for (std::size_t i = 0; i < count; ++i) {
    rp.band_midbands_hz.push_back(bank.bands[i].f_mid);
    rp.band_indices.push_back(bank.bands[i].index);
    if (failed[i]) rp.failed_bands.push_back(bank.bands[i].index);
  }
  rp.valid = rp.failed_bands.empty();
  return rp;
}

void write_roomprint_csv(const std::filesystem::path& path, const Roomprint& roomprint) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  char buf[40];
  for (std::size_t i = 0; i < roomprint.band_midbands_hz.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", roomprint.band_midbands_hz[i]);
    f << (i ? "," : "") << buf;
  }
  f << "\n";
  for (std::size_t i = 0; i < roomprint.rt60_s.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", roomprint.rt60_s[i]);
    f << (i ? "," : "") << buf;
  }
  f << "\n";
}

std::string roomprint_to_json(const Roomprint& rp) {
  nlohmann::json j;
  j["octave_fraction"] = rp.octave_fraction;
  j["alpha"] = rp.alpha;
  j["log_transformed"] = rp.log_transformed;
  j["valid"] = rp.valid;
  j["band_indices"] = rp.band_indices;
  j["band_midbands_hz"] = rp.band_midbands_hz;
  j["alpha_used"] = rp.alpha_used;
  j["failed_bands"] = rp.failed_bands;
  nlohmann::json rt = nlohmann::json::array();
  for (double v : rp.rt60_s) rt.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
  j["rt60_s"] = std::move(rt);
  return j.dump(2);
}

Roomprint roomprint_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Roomprint rp;
    rp.octave_fraction = j.at("octave_fraction").get<int>();
    rp.alpha = j.at("alpha").get<double>();
    rp.log_transformed = j.at("log_transformed").get<bool>();
    rp.valid = j.at("valid").get<bool>();
    rp.band_indices = j.at("band_indices").get<std::vector<int>>();
    rp.band_midbands_hz = j.at("band_midbands_hz").get<std::vector<double>>();
    rp.alpha_used = j.at("alpha_used").get<std::vector<double>>();
    rp.failed_bands = j.at("failed_bands").get<std::vector<int>>();
    for (const auto& v : j.at("rt60_s")) {
      rp.rt60_s.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    }
    if (rp.rt60_s.size() != rp.band_midbands_hz.size()) throw Error(ErrorKind::kCorruptFile, "roomprint length mismatch");
    return rp;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kCorruptFile, e.what());
  }
}

void write_roomprint_json(const std::filesystem::path& path, const Roomprint& roomprint) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  f << roomprint_to_json(roomprint) << "\n";
}

Roomprint read_roomprint_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return roomprint_from_json(ss.str());
}

}  // namespace roomprint
