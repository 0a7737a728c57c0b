#include <doctest.h>

#include <set>

#include "duetsep/dataset.hpp"
#include "duetsep/error.hpp"
#include "support.hpp"

using namespace duetsep;
using dataset::Split;

namespace {

dataset::Manifest fake_manifest(std::size_t n) {
  dataset::Manifest m;
  for (std::size_t i = 0; i < n; ++i) {
    dataset::TrackEntry e;
    e.track_id = "t" + std::to_string(i);
    e.stems = {e.track_id + "/guitar1.wav", e.track_id + "/guitar2.wav"};
    e.duration = 1.0;
    m.entries.push_back(e);
  }
  return m;
}

AudioBuffer stereo(std::size_t n, std::uint64_t seed) {
  return AudioBuffer(8000, {testing::noise(n, seed), testing::noise(n, seed + 1)});
}

}  // namespace

TEST_CASE("mixture is the stem average") {
  CHECK(dataset::make_mixture(AudioBuffer::mono(8000, {1.0}), AudioBuffer::mono(8000, {0.0})).channel(0)[0] == 0.5);
  const auto a = stereo(100, 1);
  CHECK(dataset::make_mixture(a, a) == a);
  const auto m = dataset::make_mixture(AudioBuffer::mono(8000, {1.0, 1.0, 1.0}), AudioBuffer::mono(8000, {1.0}));
  CHECK(m.frames() == 3);
  CHECK(m.channel(0)[0] == 1.0);
  CHECK(m.channel(0)[2] == 0.5);
}

TEST_CASE("track-level split") {
  const auto s = dataset::split(fake_manifest(10), 0.8, 3);
  CHECK(s.count(Split::train) == 8);
  CHECK(s.count(Split::val) == 2);
  CHECK(dataset::split(fake_manifest(10), 0.8, 3).splits == s.splits);
  const auto big = dataset::split(fake_manifest(35), 0.8, 1);
  CHECK(big.count(Split::train) == 28);
  CHECK(big.count(Split::val) == 7);

  // Test tracks stay put and the split is a partition.
  auto m = fake_manifest(12);
  m.splits = std::map<std::string, Split>{{"t0", Split::test}, {"t5", Split::test}};
  const auto p = dataset::split(m, 0.8, 9);
  CHECK(p.splits->at("t0") == Split::test);
  CHECK(p.splits->at("t5") == Split::test);
  CHECK(p.count(Split::train) + p.count(Split::val) + p.count(Split::test) == 12);
  CHECK(p.splits->size() == 12);

  CHECK_THROWS_AS(dataset::split(fake_manifest(1), 0.8, 0), InvalidArgument);
}

TEST_CASE("manifest json round trip and scan") {
  testing::TempDir dir("manifest");
  for (const char* id : {"b", "a"}) {
    std::filesystem::create_directories(dir / id);
    write_wav(AudioBuffer::mono(8000, testing::noise(800, 1, 0.1)), dir.path() / id / "guitar1.wav");
    write_wav(AudioBuffer::mono(8000, testing::noise(800, 2, 0.1)), dir.path() / id / "guitar2.wav");
  }
  std::filesystem::create_directories(dir / "incomplete");
  const auto m = dataset::scan_directory(dir.path(), dataset::SubsetTag::synthetic);
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[0].track_id == "a");
  CHECK(m.sample_rate == 8000);
  CHECK(m.entries[0].duration == doctest::Approx(0.1));
  CHECK_FALSE(m.entries[0].mixture.has_value());

  const auto back = dataset::manifest_from_json(dataset::manifest_to_json(m));
  CHECK(dataset::manifest_to_json(back) == dataset::manifest_to_json(m));
  CHECK_THROWS_AS(dataset::manifest_from_json("{\"format\": \"other\"}"), InvalidArgument);
}

TEST_CASE("augmentation identity and fixed gain") {
  const auto a = stereo(4000, 10), b = stereo(4000, 20);
  dataset::AugmentConfig id;
  id.channel_swap_probability = 0.0;
  id.remix_probability = 0.0;
  id.amplitude_lo = id.amplitude_hi = 1.0;
  id.crop_seconds = 0.0;
  Rng rng(1);
  const auto out = dataset::augment(a, b, {}, id, rng);
  CHECK(out.first == a);
  CHECK(out.second == b);

  auto half = id;
  half.amplitude_lo = half.amplitude_hi = 0.5;
  half.crop_seconds = 0.25;
  const auto h = dataset::augment(a, b, {}, half, rng);
  REQUIRE(h.first.frames() == 2000);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 2000; ++i) {
      CHECK(h.first.channel(c)[i] == 0.5 * a.channel(c)[h.offsets[0] + i]);
      CHECK(h.second.channel(c)[i] == 0.5 * b.channel(c)[h.offsets[1] + i]);
    }
  CHECK(h.offsets[0] == h.offsets[1]);
}

TEST_CASE("channel swap exchanges left and right") {
  const auto a = stereo(100, 30);
  dataset::AugmentConfig c;
  c.channel_swap_probability = 1.0;
  c.remix_probability = 0.0;
  c.amplitude_lo = c.amplitude_hi = 1.0;
  c.crop_seconds = 0.0;
  Rng rng(2);
  const auto out = dataset::augment(a, a, {}, c, rng);
  CHECK(out.first == AudioBuffer(8000, {a.data()[1], a.data()[0]}));
}

TEST_CASE("augmented mixtures are stem averages") {
  const auto a = stereo(20000, 40), b = stereo(20000, 50);
  const std::vector<AudioBuffer> pool{stereo(30000, 60), stereo(15000, 70)};
  dataset::AugmentConfig c;
  c.crop_seconds = 1.0;
  c.remix_probability = 0.5;
  bool saw_remix = false;
  for (std::uint64_t epoch = 0; epoch < 20; ++epoch) {
    auto rng = dataset::augmentation_rng(5, "track", epoch);
    const auto out = dataset::augment(a, b, pool, c, rng);
    saw_remix = saw_remix || out.remix_index.has_value();
    CHECK(out.mixture == dataset::make_mixture(out.first, out.second));
    CHECK(out.first.frames() == 8000);
  }
  CHECK(saw_remix);
  auto r1 = dataset::augmentation_rng(5, "track", 3), r2 = dataset::augmentation_rng(5, "track", 3);
  CHECK(dataset::augment(a, b, pool, c, r1).mixture == dataset::augment(a, b, pool, c, r2).mixture);
}

TEST_CASE("report emission and parsing") {
  CHECK(dataset::emit_report({}) == "training_combo,source,permutation,sdr,si_sdr,sar,sir\n");
  metrics::MetricReport rep;
  rep.assignment = {0, 1};
  rep.per_source = {{1.234567, 2.5, metrics::kInf, -3.0}, {0.1, 0.2, 0.3, 0.4}};
  const auto csv = dataset::emit_report({{"R", rep}, {"R+S", rep}});
  const auto lines = dataset::parse_report(csv);
  REQUIRE(lines.size() == 4);
  CHECK(lines[1].combo == "R");
  CHECK(lines[1].source == "G2");
  CHECK(lines[3].combo == "R+S");
  CHECK(std::abs(lines[0].values.sdr - 1.234567) < 1e-4);
  CHECK(lines[0].values.sar == metrics::kInf);
  CHECK(lines[0].values.sir == -3.0);
}
