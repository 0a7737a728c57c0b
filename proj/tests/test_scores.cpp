#include <doctest.h>

#include <algorithm>

#include "duetsep/error.hpp"
#include "duetsep/scores.hpp"
#include "support.hpp"

using namespace duetsep;
using scores::NoteEvent;
using scores::PianoRoll;

TEST_CASE("note csv parse and bounds") {
  const auto ev = scores::parse_notes_csv("source,pitch,onset,offset\n0,60,0.000000,0.100000\n");
  REQUIRE(ev.size() == 1);
  CHECK(ev[0] == NoteEvent{60, 0.0, 0.1, 0});
  CHECK_THROWS_AS(scores::parse_notes_csv("source,pitch,onset,offset\n0,128,0.0,0.1\n"), InvalidArgument);
  CHECK_THROWS_AS(scores::parse_notes_csv("source,pitch,onset,offset\n0,60,0.2,0.1\n"), InvalidArgument);
  CHECK_THROWS_AS(scores::parse_notes_csv("0,60,0.0,0.1\n"), InvalidArgument);
  CHECK_THROWS_AS(scores::parse_notes_csv("source,pitch,onset,offset\n0,60,0.0\n"), InvalidArgument);
}

TEST_CASE("note csv round trip of 1000 events") {
  testing::TempDir dir("notes");
  Rng rng(4);
  std::vector<NoteEvent> ev;
  for (int i = 0; i < 1000; ++i) {
    const auto on = rng.uniform_int(0, 10'000'000);
    const auto len = rng.uniform_int(1, 2'000'000);
    ev.push_back({static_cast<int>(rng.uniform_int(0, 127)), on / 1e6, (on + len) / 1e6,
                  static_cast<int>(rng.uniform_int(0, 1))});
  }
  scores::write_notes_csv(ev, dir / "n.csv");
  CHECK(scores::read_notes_csv(dir / "n.csv") == ev);
}

TEST_CASE("rasterize by positive overlap") {
  const std::vector<NoteEvent> one{{60, 0.005, 0.095, 0}};
  const auto rolls = scores::rasterize(one, 100.0, 1.0);
  REQUIRE(rolls.size() == 2);
  CHECK(rolls[0].frames() == 100);
  for (std::size_t p = 0; p < 128; ++p)
    for (std::size_t t = 0; t < 100; ++t) CHECK(rolls[0].active(p, t) == (p == 60 && t <= 9));
  CHECK(rolls[1].active_count() == 0);

  // A note ending exactly on a frame boundary does not touch the next frame.
  const std::vector<NoteEvent> edge{{60, 0.0, 0.1, 0}};
  CHECK(scores::rasterize(edge, 100.0, 1.0)[0].active_count() == 10);

  CHECK(scores::rasterize(std::vector<NoteEvent>{}, 100.0, 1.0)[0].active_count() == 0);

  const std::vector<NoteEvent> two{{64, 0.0, 0.05, 1}, {64, 0.03, 0.12, 1}};
  const auto u = scores::rasterize(two, 100.0, 1.0)[1];
  for (std::size_t t = 0; t < 100; ++t) CHECK(u.active(64, t) == (t < 12));
}

TEST_CASE("rasterize with a pitch offset") {
  const std::vector<NoteEvent> ev{{52, 0.0, 0.1, 0}, {67, 0.0, 0.1, 1}};
  const auto r = scores::rasterize(ev, 100.0, 0.5, 16, 52);
  CHECK(r[0].pitches() == 16);
  CHECK(r[0].active(0, 0));
  CHECK(r[1].active(15, 0));
  const std::vector<NoteEvent> out_of_range{{68, 0.0, 0.1, 0}};
  CHECK_THROWS_AS(scores::rasterize(out_of_range, 100.0, 0.5, 16, 52), InvalidArgument);
}

TEST_CASE("downsample max-pools and keeps every active pitch") {
  PianoRoll r(1, 4, 100.0, 0);
  r.set(0, 2);
  const auto d = scores::downsample_activity(r, 4);
  CHECK(d.frames() == 1);
  CHECK(d.active(0, 0));
  CHECK(scores::downsample_activity(r, 1) == r);

  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    PianoRoll x(8, 37, 100.0, 0);
    for (int k = 0; k < 6; ++k) x.set(rng.uniform_int(0, 7), rng.uniform_int(0, 36));
    for (std::size_t factor : {2u, 3u, 5u, 16u, 64u}) {
      const auto y = scores::downsample_activity(x, factor);
      CHECK(y.frames() == (37 + factor - 1) / factor);
      for (std::size_t p = 0; p < 8; ++p) {
        for (std::size_t t = 0; t < 37; ++t)
          if (x.active(p, t)) CHECK(y.active(p, t / factor));
      }
    }
  }
}

TEST_CASE("temporal conditioning plane") {
  std::array<PianoRoll, 2> silent{PianoRoll(128, 400, 100.0, 0), PianoRoll(128, 400, 100.0, 1)};
  const auto plane = scores::align_for_temporal_branch(silent, 176400, 44100, 64);
  CHECK(scores::temporal_frames(176400, 64) == 2757);
  CHECK(plane.size() == 256u * 2757u);
  CHECK(std::all_of(plane.begin(), plane.end(), [](double v) { return v == 0.0; }));

  // Source 1 pitch 3 active in roll frame 10 = samples [4410, 4851) at 44.1 kHz.
  auto rolls = silent;
  rolls[1].set(3, 10);
  const auto p2 = scores::align_for_temporal_branch(rolls, 176400, 44100, 64);
  for (std::size_t j = 0; j < 2757; ++j) {
    const bool overlap = j * 64 < 4851 && (j + 1) * 64 > 4410;
    CHECK((p2[(128 + 3) * 2757 + j] == 1.0) == overlap);
  }
}

TEST_CASE("spectral conditioning plane") {
  const StftConfig c(4096, 1024);
  std::array<PianoRoll, 2> rolls{PianoRoll(128, 400, 100.0, 0), PianoRoll(128, 400, 100.0, 1)};
  const auto zero = scores::align_for_spectral_branch(rolls, c, 176400, 44100);
  const std::size_t tf = c.frame_count(176400);
  CHECK(zero.size() == 2u * 128u * tf);
  CHECK(std::all_of(zero.begin(), zero.end(), [](double v) { return v == 0.0; }));
  for (std::size_t t = 0; t < 400; ++t) rolls[0].set(40, t);
  const auto full = scores::align_for_spectral_branch(rolls, c, 176400, 44100);
  for (std::size_t t = 0; t < tf; ++t) {
    CHECK(full[40 * tf + t] == 1.0);
    CHECK(full[(128 + 40) * tf + t] == 0.0);
  }

  const auto planes = scores::make_conditioning(rolls, 176400, 44100, 64, c);
  CHECK(planes.temporal_shape() == std::array<std::size_t, 2>{256, 2757});
  CHECK(planes.spectral_shape() == std::array<std::size_t, 3>{2, 128, tf});
}

TEST_CASE("label degradation") {
  Rng rng(12);
  PianoRoll r(16, 200, 100.0, 0);
  for (int k = 0; k < 60; ++k) r.set(rng.uniform_int(0, 15), rng.uniform_int(0, 199));
  CHECK(scores::degrade_labels(r, 0.0, 0, 5) == r);
  CHECK(scores::degrade_labels(r, 1.0, 3, 5).active_count() == 0);
  CHECK(scores::degrade_labels(r, 0.3, 2, 5) == scores::degrade_labels(r, 0.3, 2, 5));

  PianoRoll runs(1, 3000, 100.0, 0);
  for (std::size_t t = 0; t < 3000; t += 3) runs.set(0, t);
  REQUIRE(scores::count_runs(runs) == 1000);
  const auto kept = scores::count_runs(scores::degrade_labels(runs, 0.5, 0, 77));
  const double dropped = 1.0 - kept / 1000.0;
  CHECK(std::abs(dropped - 0.5) <= 0.05);
}

TEST_CASE("crop_roll pads with silence") {
  PianoRoll r(2, 10, 100.0, 1);
  r.set(1, 9);
  const auto c = scores::crop_roll(r, 8, 5);
  CHECK(c.frames() == 5);
  CHECK(c.source() == 1);
  CHECK(c.active(1, 1));
  CHECK(c.active_count() == 1);
}

TEST_CASE("roll binary format round trip") {
  testing::TempDir dir("roll");
  PianoRoll r(16, 33, 100.0, 1);
  r.set(3, 4);
  r.set(15, 32);
  scores::write_roll(r, dir / "r.bin");
  CHECK(scores::read_roll(dir / "r.bin") == r);
  const auto bytes = scores::encode_roll(r);
  CHECK(bytes.size() == 16u + 16u * 33u);
  CHECK(scores::decode_roll(bytes) == r);
  CHECK_THROWS_AS(scores::decode_roll(std::span(bytes).first(20)), Error);
}

TEST_CASE("notes in window") {
  const std::vector<NoteEvent> ev{{60, 0.5, 1.5, 0}, {62, 2.0, 3.0, 1}, {64, 0.0, 0.2, 0}};
  const auto w = scores::notes_in_window(ev, 1.0, 1.5);
  REQUIRE(w.size() == 2);
  CHECK(w[0] == NoteEvent{60, 0.0, 0.5, 0});
  CHECK(w[1] == NoteEvent{62, 1.0, 1.5, 1});
}
