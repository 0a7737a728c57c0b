#include "duetsep/toy/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "duetsep/dataset.hpp"
#include "duetsep/error.hpp"
#include "duetsep/rng.hpp"

namespace duetsep::toy {

void TimbreParams::validate() const {
  require(feedback > 0.0 && feedback < 1.0, "string feedback must lie strictly inside (0, 1)");
  require(brightness > 0.0 && brightness <= 1.0, "brightness must be in (0, 1]");
  require(pick_position >= 0.0 && pick_position < 1.0, "pick position must be in [0, 1)");
  require(excitation_gain >= 0.0, "excitation gain must be non-negative");
}

TimbreParams timbre_a() { return {0.55, 0.996, 0.13, 1.0}; }
TimbreParams timbre_b() { return {0.50, 0.995, 0.17, 1.0}; }

double midi_to_hz(int pitch) { return 440.0 * std::pow(2.0, (pitch - 69) / 12.0); }

namespace {

constexpr double kReleaseSeconds = 0.01;
constexpr double kPeak = 0.5;

void release_and_normalize(std::vector<double>& y, int sample_rate) {
  const auto release = std::min<std::size_t>(y.size(), static_cast<std::size_t>(kReleaseSeconds * sample_rate));
  for (std::size_t i = 0; i < release; ++i) {
    y[y.size() - 1 - i] *= static_cast<double>(i) / static_cast<double>(release);
  }
  double peak = 0.0;
  for (double v : y) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : y) v *= kPeak / peak;
  }
}

}  // namespace

AudioBuffer karplus_strong(int pitch, double duration, int sample_rate, const TimbreParams& timbre,
                           std::uint64_t seed) {
  timbre.validate();
  require(duration > 0.0, "note duration must be positive");
  const double f0 = midi_to_hz(pitch);
  require(f0 < sample_rate / 4.0, "pitch " + std::to_string(pitch) + " is too high for the sample rate");
  const auto delay = static_cast<std::size_t>(std::lround(sample_rate / f0 - 0.5));
  const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));

  // Excitation: one period of noise, lowpassed, then the pick-position comb.
  Rng rng(seed);
  std::vector<double> burst(delay);
  double state = 0.0;
  for (double& v : burst) {
    state = timbre.brightness * rng.uniform(-1.0, 1.0) + (1.0 - timbre.brightness) * state;
    v = timbre.excitation_gain * state;
  }
  const auto pick = static_cast<std::size_t>(std::lround(timbre.pick_position * static_cast<double>(delay)));
  if (pick > 0) {
    const auto raw = burst;
    for (std::size_t i = pick; i < delay; ++i) burst[i] = raw[i] - raw[i - pick];
  }

  std::vector<double> y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double v = i < delay ? burst[i] : 0.0;
    if (i >= delay + 1) {
      v += timbre.feedback * 0.5 * (y[i - delay] + y[i - delay - 1]);
    } else if (i >= delay) {
      v += timbre.feedback * 0.5 * y[i - delay];
    }
    y[i] = v;
  }
  release_and_normalize(y, sample_rate);
  return AudioBuffer::mono(sample_rate, std::move(y));
}

AudioBuffer additive_tone(int pitch, double duration, int sample_rate) {
  require(duration > 0.0, "note duration must be positive");
  const double f0 = midi_to_hz(pitch);
  require(f0 < sample_rate / 4.0, "pitch " + std::to_string(pitch) + " is too high for the sample rate");
  const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
  std::vector<double> y(n, 0.0);
  for (int k = 1; k * f0 < 0.45 * sample_rate; ++k) {
    const double amp = 1.0 / std::pow(static_cast<double>(k), 1.2);
    const double decay = 1.5 + 0.8 * k;
    const double w = 2.0 * std::numbers::pi * k * f0 / sample_rate;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / sample_rate;
      y[i] += amp * std::exp(-decay * t) * std::sin(w * static_cast<double>(i));
    }
  }
  release_and_normalize(y, sample_rate);
  return AudioBuffer::mono(sample_rate, std::move(y));
}

// ---------------------------------------------------------------------------
// Scores

namespace {

struct Line {
  std::vector<double> onsets;
  std::vector<double> offsets;
  std::vector<int> pitches;
};

// Monophonic line: gaps uniform in [0.4, 1.6] x mean gap, legato factor in
// [0.7, 1.0], pitches on a random walk that never repeats a pitch.
Line random_line(const ScoreParams& p, double rate, Rng& rng) {
  Line line;
  const double mean_gap = 1.0 / rate;
  const int hi = p.lowest_pitch + static_cast<int>(p.pitch_count) - 1;
  int pitch = static_cast<int>(rng.uniform_int(p.lowest_pitch, hi));
  double t = rng.uniform(0.0, mean_gap);
  while (t < p.duration) {
    const double gap = mean_gap * rng.uniform(0.4, 1.6);
    const double length = gap * rng.uniform(0.7, 1.0);
    line.onsets.push_back(t);
    line.offsets.push_back(std::min(t + length, p.duration));
    line.pitches.push_back(pitch);
    int step = 0;
    while (step == 0) step = static_cast<int>(rng.uniform_int(-3, 3));
    pitch += step;
    if (pitch < p.lowest_pitch) pitch = p.lowest_pitch + (p.lowest_pitch - pitch);
    if (pitch > hi) pitch = hi - (pitch - hi);
    pitch = std::clamp(pitch, p.lowest_pitch, hi);
    t += gap;
  }
  return line;
}

}  // namespace

ToyScore generate_score(const ScoreParams& params, std::uint64_t seed) {
  require(params.duration > 0.0 && params.density > 0.0, "score duration and density must be positive");
  require(params.pitch_count >= 2, "score needs at least two pitches");
  Rng rng(seed);
  ToyScore score{params, {}};
  const double per_source = params.density / 2.0;
  const Line first = random_line(params, per_source, rng);
  Line second;
  if (params.style == ScoreStyle::independent) {
    second = random_line(params, per_source, rng);
  } else {
    second = first;
    for (int& pitch : second.pitches) {
      if (rng.bernoulli(params.unison_probability)) continue;
      const int interval = rng.bernoulli(0.5) ? 3 + static_cast<int>(rng.uniform_int(0, 1)) : 8 + static_cast<int>(rng.uniform_int(0, 1));
      pitch = pitch - interval >= params.lowest_pitch ? pitch - interval : pitch + 12 - interval;
      pitch = std::clamp(pitch, params.lowest_pitch, params.lowest_pitch + static_cast<int>(params.pitch_count) - 1);
    }
  }
  for (int s = 0; s < 2; ++s) {
    const Line& l = s == 0 ? first : second;
    for (std::size_t i = 0; i < l.onsets.size(); ++i) {
      if (l.offsets[i] > l.onsets[i]) score.notes.push_back({l.pitches[i], l.onsets[i], l.offsets[i], s});
    }
  }
  return score;
}

Duet synth_duet(const ToyScore& score, const DuetRender& render, std::uint64_t seed) {
  const int sr = render.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(score.params.duration * sr));
  std::array<std::vector<double>, 2> stems{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (const auto& note : score.notes) {
    note.validate();
    const auto start = static_cast<std::size_t>(std::llround(note.onset * sr));
    const double length = note.offset - note.onset;
    const AudioBuffer tone =
        render.voices[note.source] == Voice::karplus_strong
            ? karplus_strong(note.pitch, length, sr, render.timbres[note.source],
                             derive_seed(seed, "pitch", static_cast<std::uint64_t>(note.pitch)))
            : additive_tone(note.pitch, length, sr);
    auto& stem = stems[note.source];
    const auto samples = tone.channel(0);
    for (std::size_t i = 0; i < samples.size() && start + i < n; ++i) stem[start + i] += samples[i];
  }
  Duet duet;
  duet.stems = {AudioBuffer::mono(sr, std::move(stems[0])), AudioBuffer::mono(sr, std::move(stems[1]))};
  duet.mixture = dataset::make_mixture(duet.stems[0], duet.stems[1]);
  auto rolls = scores::rasterize(score.notes, render.roll_frame_rate, score.params.duration,
                                 score.params.pitch_count, score.params.lowest_pitch);
  duet.rolls = {std::move(rolls[0]), std::move(rolls[1])};
  duet.score = score;
  return duet;
}

}  // namespace duetsep::toy
