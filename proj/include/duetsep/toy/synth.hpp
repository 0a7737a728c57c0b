#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "duetsep/audio.hpp"
#include "duetsep/scores.hpp"

namespace duetsep::toy {

/// Plucked-string voice. `feedback` is the loop gain and must stay in (0, 1).
struct TimbreParams {
  /// One-pole lowpass coefficient on the excitation; 1 passes white noise.
  double brightness = 0.5;
  double feedback = 0.996;
  /// Relative pluck position for the excitation comb; 0 disables it.
  double pick_position = 0.13;
  double excitation_gain = 1.0;

  void validate() const;
};

/// Two stock voices used by the benchmark and the metric study.
TimbreParams timbre_a();
TimbreParams timbre_b();

double midi_to_hz(int pitch);

/// Karplus-Strong delay-line string: lowpassed noise burst of one period,
/// two-point averaging loop with the given feedback, delay
/// round(rate/f0 - 0.5), a 10 ms release at the end, peak-normalized to 0.5.
AudioBuffer karplus_strong(int pitch, double duration, int sample_rate, const TimbreParams& timbre,
                           std::uint64_t seed);

/// Additive stand-in for a piano: decaying sine partials with fixed phases.
AudioBuffer additive_tone(int pitch, double duration, int sample_rate);

enum class ScoreStyle {
  /// Two independent monophonic lines.
  independent,
  /// Second line shares the first line's rhythm; each note is a unison with
  /// `unison_probability`, otherwise a third or sixth below.
  homorhythmic,
};

struct ScoreParams {
  double duration = 8.0;
  /// Combined notes per second over both sources.
  double density = 7.0;
  int lowest_pitch = 52;
  std::size_t pitch_count = 16;
  ScoreStyle style = ScoreStyle::independent;
  double unison_probability = 0.5;
};

struct ToyScore {
  ScoreParams params;
  std::vector<scores::NoteEvent> notes;
};

ToyScore generate_score(const ScoreParams& params, std::uint64_t seed);

struct Duet {
  std::array<AudioBuffer, 2> stems;
  AudioBuffer mixture;
  std::array<scores::PianoRoll, 2> rolls;
  ToyScore score;
};

enum class Voice { karplus_strong, additive };

struct DuetRender {
  std::array<TimbreParams, 2> timbres{timbre_a(), timbre_b()};
  std::array<Voice, 2> voices{Voice::karplus_strong, Voice::karplus_strong};
  int sample_rate = 8000;
  double roll_frame_rate = 100.0;
};

/// Stems are the sums of the rendered notes. The string excitation depends on
/// (seed, pitch) only, so equal pitches sound alike in both parts the way a
/// sample-based instrument would. Rolls come from scores::rasterize.
Duet synth_duet(const ToyScore& score, const DuetRender& render, std::uint64_t seed);

}  // namespace duetsep::toy
