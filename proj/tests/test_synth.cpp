#include <doctest.h>

#include <cmath>

#include "duetsep/error.hpp"
#include "duetsep/toy/synth.hpp"
#include "support.hpp"

using namespace duetsep;
using namespace duetsep::toy;

TEST_CASE("silent excitation gives silence") {
  auto t = timbre_a();
  t.excitation_gain = 0.0;
  const auto y = karplus_strong(60, 0.5, 8000, t, 1);
  for (double v : y.channel(0)) CHECK(v == 0.0);
}

TEST_CASE("string period from autocorrelation") {
  const auto y = karplus_strong(69, 1.0, 22050, timbre_a(), 3);
  const auto x = y.channel(0);
  std::size_t best = 0;
  double best_r = -1e300;
  for (std::size_t lag = 20; lag <= 100; ++lag) {
    double r = 0.0;
    for (std::size_t i = 0; i + lag < x.size(); ++i) r += x[i] * x[i + lag];
    if (r > best_r) {
      best_r = r;
      best = lag;
    }
  }
  CHECK(std::abs(static_cast<double>(best) - 50.0) <= 1.0);
}

TEST_CASE("pluck energy decays") {
  for (int pitch : {52, 60, 67}) {
    const auto y = karplus_strong(pitch, 1.0, 8000, timbre_b(), 11);
    const auto x = y.channel(0);
    const std::size_t w = 400;
    double prev = 1e300;
    for (std::size_t start = w; start + w <= x.size(); start += w) {
      double e = 0.0;
      for (std::size_t i = start; i < start + w; ++i) e += x[i] * x[i];
      CHECK(e <= prev);
      prev = e;
    }
  }
}

TEST_CASE("timbre and pitch preconditions") {
  auto t = timbre_a();
  t.feedback = 1.0;
  CHECK_THROWS_AS(karplus_strong(60, 0.5, 8000, t, 1), InvalidArgument);
  CHECK_THROWS_AS(karplus_strong(120, 0.5, 8000, timbre_a(), 1), InvalidArgument);
  CHECK(midi_to_hz(69) == 440.0);
}

TEST_CASE("empty and single-note scores") {
  ToyScore empty;
  empty.params.duration = 1.0;
  const auto d = synth_duet(empty, {}, 1);
  for (const auto& s : d.stems)
    for (double v : s.channel(0)) CHECK(v == 0.0);
  CHECK(d.rolls[0].active_count() == 0);
  CHECK(d.rolls[1].active_count() == 0);

  ToyScore one;
  one.params.duration = 1.0;
  one.notes = {{60, 0.1, 0.5, 0}};
  const auto e = synth_duet(one, {}, 1);
  for (double v : e.stems[1].channel(0)) CHECK(v == 0.0);
  CHECK(e.rolls[1].active_count() == 0);
  CHECK(e.rolls[0].active_count() > 0);
  CHECK(e.stems[0].frames() == 8000);
}

TEST_CASE("rolls and stems agree") {
  ScoreParams p;
  p.duration = 6.0;
  const auto score = generate_score(p, 17);
  const auto d = synth_duet(score, {}, 17);
  for (const auto& n : score.notes) {
    CHECK(n.pitch >= p.lowest_pitch);
    CHECK(n.pitch < p.lowest_pitch + static_cast<int>(p.pitch_count));
    CHECK(n.offset <= p.duration);
  }
  // Mixture is the stem average; a stem is silent wherever its roll is empty
  // and no earlier note still rings.
  for (std::size_t i = 0; i < d.mixture.frames(); ++i)
    CHECK(d.mixture.channel(0)[i] == doctest::Approx(0.5 * (d.stems[0].channel(0)[i] + d.stems[1].channel(0)[i])));
  for (int s = 0; s < 2; ++s) {
    const auto& roll = d.rolls[s];
    const auto x = d.stems[s].channel(0);
    for (std::size_t t = 0; t < roll.frames(); ++t) {
      bool any = false;
      for (std::size_t q = 0; q < roll.pitches(); ++q) any = any || roll.active(q, t);
      double e = 0.0;
      for (std::size_t i = t * 80; i < (t + 1) * 80; ++i) e += x[i] * x[i];
      if (!any) CHECK(e == 0.0);
    }
  }
}

TEST_CASE("onset density over 30 s") {
  ScoreParams p;
  p.duration = 30.0;
  p.density = 7.0;
  const auto d = synth_duet(generate_score(p, 23), {}, 23);
  const double onsets = static_cast<double>(scores::count_runs(d.rolls[0]) + scores::count_runs(d.rolls[1]));
  CHECK(std::abs(onsets / 30.0 - 7.0) <= 1.5);
}

TEST_CASE("homorhythmic scores share onsets") {
  ScoreParams p;
  p.duration = 10.0;
  p.style = ScoreStyle::homorhythmic;
  p.unison_probability = 0.5;
  const auto s = generate_score(p, 5);
  std::vector<scores::NoteEvent> a, b;
  for (const auto& n : s.notes) (n.source == 0 ? a : b).push_back(n);
  REQUIRE(a.size() == b.size());
  std::size_t unisons = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].onset == b[i].onset);
    const int interval = ((a[i].pitch - b[i].pitch) % 12 + 12) % 12;
    CHECK((interval == 0 || interval == 3 || interval == 4 || interval == 8 || interval == 9));
    unisons += a[i].pitch == b[i].pitch;
  }
  CHECK(unisons > 0);
  CHECK(unisons < a.size());
}

TEST_CASE("generation is deterministic") {
  ScoreParams p;
  p.duration = 3.0;
  CHECK(generate_score(p, 9).notes == generate_score(p, 9).notes);
  CHECK(generate_score(p, 9).notes != generate_score(p, 10).notes);
  const auto s = generate_score(p, 9);
  CHECK(synth_duet(s, {}, 2).mixture == synth_duet(s, {}, 2).mixture);
}
