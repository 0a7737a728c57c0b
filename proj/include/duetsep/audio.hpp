#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace duetsep {

/// Multichannel sampled waveform. All channels share one length; the buffer
/// is immutable once constructed.
class AudioBuffer {
 public:
  AudioBuffer() = default;
  AudioBuffer(int sample_rate, std::vector<std::vector<double>> channels);

  static AudioBuffer mono(int sample_rate, std::vector<double> samples);
  static AudioBuffer silence(int sample_rate, std::size_t channels, std::size_t frames);

  int sample_rate() const { return sample_rate_; }
  std::size_t channels() const { return data_.size(); }
  std::size_t frames() const { return data_.empty() ? 0 : data_.front().size(); }
  bool empty() const { return frames() == 0; }
  double duration_seconds() const;

  std::span<const double> channel(std::size_t c) const { return data_.at(c); }
  const std::vector<std::vector<double>>& data() const { return data_; }

  friend bool operator==(const AudioBuffer&, const AudioBuffer&) = default;

 private:
  int sample_rate_ = 0;
  std::vector<std::vector<double>> data_;
};

enum class WavEncoding { pcm16, float32 };

AudioBuffer read_wav(const std::filesystem::path& path);
void write_wav(const AudioBuffer& buffer, const std::filesystem::path& path,
               WavEncoding encoding = WavEncoding::pcm16);

/// Quantize one sample the way write_wav does for PCM-16.
std::int16_t to_pcm16(double value);

/// Windowed-sinc resampler with a fixed kernel width.
struct ResamplerConfig {
  int taps = 64;
  double kaiser_beta = 8.0;
  /// Cutoff as a fraction of the lower of the two Nyquist frequencies.
  double rolloff = 0.94;
};

AudioBuffer resample(const AudioBuffer& buffer, int target_rate,
                     const ResamplerConfig& config = {});

AudioBuffer to_mono(const AudioBuffer& buffer);

/// Fixed-length windows; the trailing partial window is zero-padded.
std::vector<AudioBuffer> segment(const AudioBuffer& buffer, double length_seconds,
                                 double hop_seconds);

/// Number of windows produced by segment() for n samples, window len, hop.
std::size_t segment_count(std::size_t n, std::size_t len, std::size_t hop);

/// Samples [start, start+length), zero-padded past the end.
AudioBuffer crop(const AudioBuffer& buffer, std::size_t start, std::size_t length);

AudioBuffer scaled(const AudioBuffer& buffer, double gain);

/// Element-wise a + b; lengths must match.
AudioBuffer add(const AudioBuffer& a, const AudioBuffer& b);

double rms(std::span<const double> x);

}  // namespace duetsep
