#include "duetsep/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <numbers>
#include <numeric>

#include "duetsep/error.hpp"

namespace duetsep {

AudioBuffer::AudioBuffer(int sample_rate, std::vector<std::vector<double>> channels)
    : sample_rate_(sample_rate), data_(std::move(channels)) {
  require(sample_rate_ > 0, "sample rate must be positive");
  require(!data_.empty(), "audio buffer needs at least one channel");
  for (const auto& ch : data_) {
    require(ch.size() == data_.front().size(), "audio channels differ in length");
  }
}

AudioBuffer AudioBuffer::mono(int sample_rate, std::vector<double> samples) {
  std::vector<std::vector<double>> channels;
  channels.push_back(std::move(samples));
  return AudioBuffer(sample_rate, std::move(channels));
}

AudioBuffer AudioBuffer::silence(int sample_rate, std::size_t channels, std::size_t frames) {
  return AudioBuffer(sample_rate,
                     std::vector<std::vector<double>>(channels, std::vector<double>(frames, 0.0)));
}

double AudioBuffer::duration_seconds() const {
  return sample_rate_ > 0 ? static_cast<double>(frames()) / sample_rate_ : 0.0;
}

// ---------------------------------------------------------------------------
// WAV

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open WAV file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = " (" + path.string() + ")";

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail("malformed WAV header: not a RIFF/WAVE container" + where);
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = get_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) fail("malformed WAV header: short fmt chunk" + where);
      format = get_u16(bytes.data() + body);
      channels = get_u16(bytes.data() + body + 2);
      rate = get_u32(bytes.data() + body + 4);
      block_align = get_u16(bytes.data() + body + 12);
      bits = get_u16(bytes.data() + body + 14);
      if (format == kFormatExtensible) {
        if (size < 40) fail("malformed WAV header: short extensible fmt chunk" + where);
        format = get_u16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) fail("malformed WAV header: data chunk before fmt chunk" + where);
      if (body + size > bytes.size()) fail("truncated WAV data chunk" + where);
      data = bytes.data() + body;
      data_size = size;
      break;
    }
    pos = body + size + (size & 1U);
  }
  if (!have_fmt) fail("malformed WAV header: missing fmt chunk" + where);
  if (data == nullptr) fail("malformed WAV header: missing data chunk" + where);
  if (channels == 0 || rate == 0) fail("malformed WAV header: zero channels or rate" + where);

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    fail("unsupported WAV encoding (format " + std::to_string(format) + ", " +
         std::to_string(bits) + " bits)" + where);
  }
  const std::size_t bytes_per_sample = bits / 8;
  if (block_align != channels * bytes_per_sample) fail("malformed WAV header: bad block align" + where);
  if (data_size % block_align != 0) fail("truncated WAV data chunk" + where);

  const std::size_t frames = data_size / block_align;
  std::vector<std::vector<double>> out(channels, std::vector<double>(frames));
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (i * channels + c) * bytes_per_sample;
      if (pcm16) {
        out[c][i] = static_cast<std::int16_t>(get_u16(p)) / 32768.0;
      } else {
        const std::uint32_t raw = get_u32(p);
        float v;
        std::memcpy(&v, &raw, sizeof v);
        out[c][i] = v;
      }
    }
  }
  return AudioBuffer(static_cast<int>(rate), std::move(out));
}

std::int16_t to_pcm16(double value) {
  const double scaled = std::round(std::clamp(value, -1.0, 1.0) * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

void write_wav(const AudioBuffer& buffer, const std::filesystem::path& path, WavEncoding encoding) {
  require(!buffer.empty(), "cannot write an empty audio buffer");
  const std::uint16_t channels = static_cast<std::uint16_t>(buffer.channels());
  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
  const std::uint16_t block_align = static_cast<std::uint16_t>(channels * bits / 8);
  const std::uint32_t data_size = static_cast<std::uint32_t>(buffer.frames() * block_align);

  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, encoding == WavEncoding::pcm16 ? kFormatPcm : kFormatFloat);
  put_u16(out, channels);
  put_u32(out, static_cast<std::uint32_t>(buffer.sample_rate()));
  put_u32(out, static_cast<std::uint32_t>(buffer.sample_rate()) * block_align);
  put_u16(out, block_align);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_size);

  for (std::size_t i = 0; i < buffer.frames(); ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double v = buffer.channel(c)[i];
      if (encoding == WavEncoding::pcm16) {
        put_u16(out, static_cast<std::uint16_t>(to_pcm16(v)));
      } else {
        const float f = static_cast<float>(v);
        std::uint32_t raw;
        std::memcpy(&raw, &f, sizeof raw);
        put_u32(out, raw);
      }
    }
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) fail("cannot write WAV file: " + path.string());
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) fail("failed writing WAV file: " + path.string());
}

// ---------------------------------------------------------------------------
// Resampling

namespace {

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

class SincKernel {
 public:
  SincKernel(const ResamplerConfig& config, double cutoff)
      : config_(config), cutoff_(cutoff), norm_(std::cyl_bessel_i(0.0, config.kaiser_beta)) {}

  /// Normalized weights for taps starting at `first`, evaluated at input time t.
  void weights(double t, long first, std::span<double> out) const {
    const double half = config_.taps / 2.0;
    double sum = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
      const double d = t - static_cast<double>(first + static_cast<long>(k));
      const double r = d / half;
      double w = 0.0;
      if (std::abs(r) < 1.0) {
        w = std::cyl_bessel_i(0.0, config_.kaiser_beta * std::sqrt(1.0 - r * r)) / norm_;
      }
      out[k] = 2.0 * cutoff_ * sinc(2.0 * cutoff_ * d) * w;
      sum += out[k];
    }
    if (sum != 0.0) {
      for (double& v : out) v /= sum;
    }
  }

 private:
  ResamplerConfig config_;
  double cutoff_;
  double norm_;
};

}  // namespace

AudioBuffer resample(const AudioBuffer& buffer, int target_rate, const ResamplerConfig& config) {
  require(target_rate > 0, "target sample rate must be positive");
  require(config.taps > 0, "resampler needs at least one tap");
  if (target_rate == buffer.sample_rate()) return buffer;

  const long src_rate = buffer.sample_rate();
  const long g = std::gcd(src_rate, static_cast<long>(target_rate));
  const long up = target_rate / g;    // output steps per cycle
  const long down = src_rate / g;     // input samples per cycle
  const std::size_t n_in = buffer.frames();
  const std::size_t n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(n_in) * target_rate / static_cast<double>(src_rate)));

  const double cutoff = 0.5 * config.rolloff * std::min(1.0, static_cast<double>(target_rate) / src_rate);
  const SincKernel kernel(config, cutoff);
  const std::size_t taps = static_cast<std::size_t>(config.taps);
  const long left = config.taps / 2 - 1;

  // Output n sits at input time n*down/up; its fractional phase repeats every
  // `up` outputs, so the weights are cached per phase when that is cheap.
  const bool cache = up <= 4096;
  std::map<long, std::vector<double>> phase_weights;
  std::vector<double> scratch(taps);

  std::vector<std::vector<double>> out(buffer.channels(), std::vector<double>(n_out, 0.0));
  for (std::size_t n = 0; n < n_out; ++n) {
    const long num = static_cast<long>(n) * down;
    const long base = num / up;
    const long phase = num % up;
    const double t = static_cast<double>(base) + static_cast<double>(phase) / static_cast<double>(up);
    const long first = base - left;
    std::span<const double> w;
    if (cache) {
      auto it = phase_weights.find(phase);
      if (it == phase_weights.end()) {
        std::vector<double> v(taps);
        kernel.weights(static_cast<double>(phase) / static_cast<double>(up), -left, v);
        it = phase_weights.emplace(phase, std::move(v)).first;
      }
      w = it->second;
    } else {
      kernel.weights(t, first, scratch);
      w = scratch;
    }
    for (std::size_t c = 0; c < buffer.channels(); ++c) {
      const auto x = buffer.channel(c);
      double acc = 0.0;
      for (std::size_t k = 0; k < taps; ++k) {
        const long idx = first + static_cast<long>(k);
        if (idx >= 0 && idx < static_cast<long>(n_in)) acc += w[k] * x[static_cast<std::size_t>(idx)];
      }
      out[c][n] = acc;
    }
  }
  return AudioBuffer(target_rate, std::move(out));
}

// ---------------------------------------------------------------------------

AudioBuffer to_mono(const AudioBuffer& buffer) {
  if (buffer.channels() == 1) return buffer;
  std::vector<double> mono(buffer.frames(), 0.0);
  for (std::size_t c = 0; c < buffer.channels(); ++c) {
    const auto ch = buffer.channel(c);
    for (std::size_t i = 0; i < mono.size(); ++i) mono[i] += ch[i];
  }
  const double inv = 1.0 / static_cast<double>(buffer.channels());
  for (double& v : mono) v *= inv;
  return AudioBuffer::mono(buffer.sample_rate(), std::move(mono));
}

std::size_t segment_count(std::size_t n, std::size_t len, std::size_t hop) {
  if (n <= len) return 1;
  return (n - len + hop - 1) / hop + 1;
}

AudioBuffer crop(const AudioBuffer& buffer, std::size_t start, std::size_t length) {
  std::vector<std::vector<double>> out(buffer.channels(), std::vector<double>(length, 0.0));
  for (std::size_t c = 0; c < buffer.channels(); ++c) {
    const auto ch = buffer.channel(c);
    for (std::size_t i = 0; i < length && start + i < ch.size(); ++i) out[c][i] = ch[start + i];
  }
  return AudioBuffer(buffer.sample_rate(), std::move(out));
}

std::vector<AudioBuffer> segment(const AudioBuffer& buffer, double length_seconds, double hop_seconds) {
  require(length_seconds > 0 && hop_seconds > 0, "segment length and hop must be positive");
  if (buffer.empty()) fail("cannot segment an empty buffer");
  const auto len = static_cast<std::size_t>(std::llround(length_seconds * buffer.sample_rate()));
  const auto hop = static_cast<std::size_t>(std::llround(hop_seconds * buffer.sample_rate()));
  require(len > 0 && hop > 0, "segment length and hop round to zero samples");
  const std::size_t count = segment_count(buffer.frames(), len, hop);
  std::vector<AudioBuffer> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) out.push_back(crop(buffer, s * hop, len));
  return out;
}

AudioBuffer scaled(const AudioBuffer& buffer, double gain) {
  auto data = buffer.data();
  for (auto& ch : data)
    for (double& v : ch) v *= gain;
  return AudioBuffer(buffer.sample_rate(), std::move(data));
}

AudioBuffer add(const AudioBuffer& a, const AudioBuffer& b) {
  require(a.channels() == b.channels() && a.frames() == b.frames(), "buffer shapes differ");
  require(a.sample_rate() == b.sample_rate(), "buffer sample rates differ");
  auto data = a.data();
  for (std::size_t c = 0; c < data.size(); ++c) {
    const auto other = b.channel(c);
    for (std::size_t i = 0; i < data[c].size(); ++i) data[c][i] += other[i];
  }
  return AudioBuffer(a.sample_rate(), std::move(data));
}

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

}  // namespace duetsep
