#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <numbers>

#include "duetsep/audio.hpp"
#include "duetsep/error.hpp"
#include "duetsep/fft.hpp"
#include "duetsep/stft.hpp"
#include "support.hpp"

using namespace duetsep;

namespace {

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s += static_cast<char>((v >> (8 * i)) & 0xff);
}
void put_u16(std::string& s, std::uint16_t v) {
  s += static_cast<char>(v & 0xff);
  s += static_cast<char>(v >> 8);
}

// Minimal PCM-16 writer, independent of the library.
std::string pcm16_file(int rate, int channels, const std::vector<std::int16_t>& interleaved) {
  std::string s = "RIFF";
  put_u32(s, static_cast<std::uint32_t>(36 + 2 * interleaved.size()));
  s += "WAVEfmt ";
  put_u32(s, 16);
  put_u16(s, 1);
  put_u16(s, static_cast<std::uint16_t>(channels));
  put_u32(s, static_cast<std::uint32_t>(rate));
  put_u32(s, static_cast<std::uint32_t>(rate * channels * 2));
  put_u16(s, static_cast<std::uint16_t>(channels * 2));
  put_u16(s, 16);
  s += "data";
  put_u32(s, static_cast<std::uint32_t>(2 * interleaved.size()));
  for (auto v : interleaved) put_u16(s, static_cast<std::uint16_t>(v));
  return s;
}

std::uint32_t data_chunk_size(const std::string& bytes) {
  const auto pos = bytes.find("data");
  REQUIRE(pos != std::string::npos);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + 4 + i])) << (8 * i);
  return v;
}

}  // namespace

TEST_CASE("buffer rejects ragged channels") {
  CHECK_THROWS_AS(AudioBuffer(8000, {{0.0, 1.0}, {0.0}}), InvalidArgument);
}

TEST_CASE("pcm16 file decodes by 1/32768 scaling") {
  testing::TempDir dir("wav");
  std::ofstream(dir / "a.wav", std::ios::binary) << pcm16_file(44100, 2, {16384, -16384});
  const auto b = read_wav(dir / "a.wav");
  CHECK(b.sample_rate() == 44100);
  CHECK(b.channels() == 2);
  REQUIRE(b.frames() == 1);
  CHECK(b.channel(0)[0] == 0.5);
  CHECK(b.channel(1)[0] == -0.5);
}

TEST_CASE("pcm16 quantization clips at full scale") {
  CHECK(to_pcm16(1.0) == 32767);
  CHECK(to_pcm16(0.0) == 0);
  CHECK(to_pcm16(-1.0) == -32768);
  CHECK(to_pcm16(2.0) == 32767);
}

TEST_CASE("pcm16 round trip is bit exact") {
  testing::TempDir dir("wav");
  Rng rng(3);
  std::vector<std::vector<double>> ch(2, std::vector<double>(5000));
  for (auto& c : ch)
    for (double& v : c) v = static_cast<double>(rng.uniform_int(-32768, 32767)) / 32768.0;
  const AudioBuffer b(44100, ch);
  write_wav(b, dir / "r.wav");
  const auto back = read_wav(dir / "r.wav");
  CHECK(back == b);
  write_wav(back, dir / "r2.wav");
  CHECK(testing::slurp(dir / "r.wav") == testing::slurp(dir / "r2.wav"));
}

TEST_CASE("float32 round trip keeps float precision") {
  testing::TempDir dir("wav");
  const auto x = testing::noise(1000, 9, 0.2);
  write_wav(AudioBuffer::mono(8000, x), dir / "f.wav", WavEncoding::float32);
  const auto back = read_wav(dir / "f.wav");
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(back.channel(0)[i] == static_cast<double>(static_cast<float>(x[i])));
}

TEST_CASE("data chunk size of a 4 s stereo 44.1 kHz file") {
  testing::TempDir dir("wav");
  write_wav(AudioBuffer::silence(44100, 2, 4 * 44100), dir / "s.wav");
  CHECK(data_chunk_size(testing::slurp(dir / "s.wav")) == 4u * 44100u * 2u * 2u);
}

TEST_CASE("truncated and malformed files are errors") {
  testing::TempDir dir("wav");
  auto bytes = pcm16_file(8000, 1, {1, 2, 3, 4});
  std::ofstream(dir / "t.wav", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  CHECK_THROWS_AS(read_wav(dir / "t.wav"), Error);
  std::ofstream(dir / "m.wav", std::ios::binary) << "RIFFxxxxWAVE";
  CHECK_THROWS_AS(read_wav(dir / "m.wav"), Error);
  CHECK_THROWS_AS(read_wav(dir / "missing.wav"), Error);
}

TEST_CASE("resample identity and 44.1 kHz to 11 kHz length") {
  const auto x = AudioBuffer::mono(44100, testing::noise(4410, 2));
  CHECK(resample(x, 44100) == x);
  const auto y = resample(AudioBuffer::silence(44100, 1, 44100), 11000);
  CHECK(y.sample_rate() == 11000);
  CHECK(y.frames() == 11000);
}

TEST_CASE("resampled sine keeps its bin and amplitude") {
  const int n = 44100;
  std::vector<double> s(n);
  for (int i = 0; i < n; ++i) s[i] = 0.5 * std::sin(2.0 * std::numbers::pi * 100.0 * i / 44100.0);
  const auto y = resample(AudioBuffer::mono(44100, s), 22050);
  REQUIRE(y.frames() == 22050);
  const auto spec = fft::rfft(y.channel(0));
  std::size_t best = 0;
  for (std::size_t k = 1; k < spec.size(); ++k)
    if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
  CHECK(best == 100);  // 1 Hz per bin over one second
  const double amplitude = 2.0 * std::abs(spec[best]) / 22050.0;
  CHECK(amplitude == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("downmix") {
  CHECK(to_mono(AudioBuffer(8000, {{1.0}, {0.0}})).channel(0)[0] == 0.5);
  const auto m = AudioBuffer::mono(8000, {0.1, 0.2});
  CHECK(to_mono(m) == m);
  const auto st = AudioBuffer(8000, {{0.1, -0.3}, {0.1, -0.3}});
  CHECK(to_mono(st) == AudioBuffer::mono(8000, {0.1, -0.3}));
}

TEST_CASE("segment counts and padding") {
  const int sr = 100;
  const auto ten = AudioBuffer::mono(sr, testing::noise(10 * sr, 1));
  const auto segs = segment(ten, 4.0, 4.0);
  REQUIRE(segs.size() == 3);
  for (std::size_t i = 2 * sr; i < 4u * sr; ++i) CHECK(segs[2].channel(0)[i] == 0.0);
  CHECK(segment(AudioBuffer::mono(sr, testing::noise(4 * sr, 2)), 4.0, 4.0).size() == 1);
  const auto one = segment(AudioBuffer::mono(sr, testing::noise(sr, 3)), 4.0, 4.0);
  REQUIRE(one.size() == 1);
  CHECK(one[0].frames() == 4u * sr);
  for (std::size_t i = sr; i < 4u * sr; ++i) CHECK(one[0].channel(0)[i] == 0.0);
  CHECK(segment_count(10, 4, 4) == 3);
}

TEST_CASE("segments with hop = length concatenate back to the input") {
  const auto x = testing::noise(1037, 4);
  const auto segs = segment(AudioBuffer::mono(100, x), 1.0, 1.0);
  std::vector<double> joined;
  for (const auto& s : segs) joined.insert(joined.end(), s.channel(0).begin(), s.channel(0).end());
  joined.resize(x.size());
  CHECK(joined == x);
}

TEST_CASE("stft geometry") {
  const StftConfig c(1024, 256);
  CHECK(c.bins() == 513);
  CHECK_THROWS_AS(StftConfig(1024, 0), InvalidArgument);
  CHECK_THROWS_AS(StftConfig(1024, 2048), InvalidArgument);
}

TEST_CASE("stft round trip on white noise") {
  for (auto [win, hop, kind] : {std::tuple{1024, 256, WindowKind::hann}, std::tuple{256, 64, WindowKind::hann},
                                std::tuple{512, 256, WindowKind::sqrt_hann}, std::tuple{4096, 1024, WindowKind::hann}}) {
    const StftConfig c(win, hop, kind);
    const auto x = testing::noise(20000, 5);
    const auto grid = stft(x, 8000, c);
    const auto y = istft_samples(grid);
    REQUIRE(y.size() == x.size());
    double err = 0.0, ref = 0.0;
    for (std::size_t i = win; i + win < x.size(); ++i) {
      err += (x[i] - y[i]) * (x[i] - y[i]);
      ref += x[i] * x[i];
    }
    CHECK(std::sqrt(err / ref) < 1e-6);
  }
}

TEST_CASE("stft of silence is zero") {
  const auto g = stft(std::vector<double>(3000, 0.0), 8000, StftConfig(256, 64));
  for (const auto& v : g.values) CHECK(v == std::complex<double>(0.0, 0.0));
}

TEST_CASE("sine at a bin centre concentrates its energy") {
  const StftConfig c(1024, 256);
  const int k = 40;
  std::vector<double> x(16384);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * std::numbers::pi * k * i / 1024.0);
  const auto g = stft(x, 8000, c);
  double near = 0.0, total = 0.0;
  for (std::size_t t = 4; t + 4 < g.frames; ++t) {
    for (std::size_t f = 0; f < g.bins(); ++f) {
      const double e = std::norm(g.at(f, t));
      total += e;
      if (f + 1 >= k && f <= k + 1) near += e;
    }
  }
  CHECK(near / total > 0.99);
}

TEST_CASE("istft adjoint identity") {
  const StftConfig c(64, 16);
  const auto x = testing::noise(300, 6);
  const auto shape = stft(x, 8000, c);
  ComplexGrid y = shape;
  Rng rng(7);
  for (auto& v : y.values) v = {rng.normal(), rng.normal()};
  const auto g = testing::noise(300, 8);
  const auto lhs = testing::dot(istft_samples(y), g);
  const auto a = istft_adjoint(g, shape);
  double rhs = 0.0;
  for (std::size_t i = 0; i < y.values.size(); ++i) rhs += (y.values[i] * std::conj(a.values[i])).real();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("fft helpers against direct sums") {
  const auto a = testing::noise(37, 10);
  const auto b = testing::noise(11, 11);
  const auto conv = fft::convolve(a, b);
  REQUIRE(conv.size() == a.size() + b.size() - 1);
  for (std::size_t n = 0; n < conv.size(); ++n) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (n >= i && n - i < b.size()) s += a[i] * b[n - i];
    CHECK(conv[n] == doctest::Approx(s).epsilon(1e-9));
  }
  const auto xc = fft::xcorr(a, b);
  REQUIRE(xc.size() == a.size() + b.size() - 1);
  for (long lag = -static_cast<long>(b.size()) + 1; lag < static_cast<long>(a.size()); ++lag) {
    double s = 0.0;
    for (long n = 0; n < static_cast<long>(b.size()); ++n)
      if (n + lag >= 0 && n + lag < static_cast<long>(a.size())) s += a[n + lag] * b[n];
    CHECK(xc[lag + b.size() - 1] == doctest::Approx(s).epsilon(1e-9));
  }
  CHECK(fft::next_pow2(1000) == 1024);
}
