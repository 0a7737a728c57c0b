#include "duetsep/stft.hpp"

#include <cmath>
#include <numbers>

#include "duetsep/error.hpp"
#include "duetsep/fft.hpp"

namespace duetsep {

std::vector<double> make_window(WindowKind kind, std::size_t size) {
  std::vector<double> w(size, 1.0);
  if (kind == WindowKind::rectangular) return w;
  for (std::size_t n = 0; n < size; ++n) {
    // Periodic Hann.
    const double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                             static_cast<double>(size));
    w[n] = kind == WindowKind::hann ? hann : std::sqrt(hann);
  }
  return w;
}

StftConfig::StftConfig(std::size_t window_size, std::size_t hop, WindowKind window)
    : window_size_(window_size), hop_(hop), kind_(window), window_(make_window(window, window_size)) {
  require(window_size_ >= 2 && window_size_ % 2 == 0, "STFT window size must be even and >= 2");
  require(hop_ > 0 && hop_ <= window_size_, "STFT hop must satisfy 0 < hop <= window size");

  // Weighted overlap-add needs sum_k w^2(n - k*hop) constant in n.
  std::vector<double> envelope(hop_, 0.0);
  for (std::size_t n = 0; n < window_size_; ++n) envelope[n % hop_] += window_[n] * window_[n];
  const double ref = envelope.front();
  for (double e : envelope) {
    if (ref <= 0.0 || std::abs(e - ref) > 1e-9 * ref) {
      fail_argument("STFT window/hop pair violates the constant-overlap-add condition (window " +
                    std::to_string(window_size_) + ", hop " + std::to_string(hop_) + ")");
    }
  }
}

namespace {

using Complex = std::complex<double>;

// Overlap-added squared window over the padded signal, sliced to the
// unpadded region.
std::vector<double> synthesis_envelope(const StftConfig& config, std::size_t frames, std::size_t length) {
  const std::size_t win = config.window_size();
  const std::size_t pad = win / 2;
  std::vector<double> env(length, 0.0);
  const auto w = config.window();
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < win; ++k) {
      const long n = static_cast<long>(t * config.hop() + k) - static_cast<long>(pad);
      if (n >= 0 && n < static_cast<long>(length)) env[static_cast<std::size_t>(n)] += w[k] * w[k];
    }
  }
  return env;
}

constexpr double kEnvelopeFloor = 1e-10;

}  // namespace

ComplexGrid stft(std::span<const double> signal, int sample_rate, const StftConfig& config) {
  const std::size_t win = config.window_size();
  const std::size_t pad = win / 2;
  const std::size_t length = signal.size();
  ComplexGrid grid{config, config.frame_count(length), length, sample_rate, {}};
  grid.values.assign(grid.frames * config.bins(), Complex{});

  const auto w = config.window();
  std::vector<double> frame(win);
  std::vector<Complex> spec(config.bins());
  for (std::size_t t = 0; t < grid.frames; ++t) {
    for (std::size_t k = 0; k < win; ++k) {
      const long n = static_cast<long>(t * config.hop() + k) - static_cast<long>(pad);
      frame[k] = (n >= 0 && n < static_cast<long>(length)) ? signal[static_cast<std::size_t>(n)] * w[k] : 0.0;
    }
    fft::rfft(frame, spec);
    std::copy(spec.begin(), spec.end(), grid.values.begin() + static_cast<long>(t * config.bins()));
  }
  return grid;
}

ComplexGrid stft(const AudioBuffer& buffer, const StftConfig& config) {
  require(buffer.channels() == 1, "stft expects a mono buffer");
  return stft(buffer.channel(0), buffer.sample_rate(), config);
}

std::vector<double> istft_samples(const ComplexGrid& grid) {
  const StftConfig& config = grid.config;
  require(grid.values.size() == grid.frames * config.bins(), "complex grid has inconsistent size");
  const std::size_t win = config.window_size();
  const std::size_t pad = win / 2;
  const std::size_t length = grid.signal_length;

  std::vector<double> out(length, 0.0);
  const auto w = config.window();
  std::vector<double> frame(win);
  for (std::size_t t = 0; t < grid.frames; ++t) {
    fft::irfft(std::span<const Complex>(grid.values.data() + t * config.bins(), config.bins()), frame);
    for (std::size_t k = 0; k < win; ++k) {
      const long n = static_cast<long>(t * config.hop() + k) - static_cast<long>(pad);
      if (n >= 0 && n < static_cast<long>(length)) out[static_cast<std::size_t>(n)] += frame[k] * w[k];
    }
  }
  const auto env = synthesis_envelope(config, grid.frames, length);
  for (std::size_t n = 0; n < length; ++n) out[n] = env[n] > kEnvelopeFloor ? out[n] / env[n] : 0.0;
  return out;
}

AudioBuffer istft(const ComplexGrid& grid) {
  require(grid.sample_rate > 0, "complex grid carries no sample rate");
  return AudioBuffer::mono(grid.sample_rate, istft_samples(grid));
}

ComplexGrid istft_adjoint(std::span<const double> grad, const ComplexGrid& shape) {
  const StftConfig& config = shape.config;
  const std::size_t length = shape.signal_length;
  require(grad.size() == length, "istft adjoint: gradient length mismatch");
  const std::size_t win = config.window_size();
  const std::size_t bins = config.bins();
  const std::size_t pad = win / 2;
  const auto env = synthesis_envelope(config, shape.frames, length);
  const auto w = config.window();

  ComplexGrid out{config, shape.frames, length, shape.sample_rate, {}};
  out.values.assign(shape.frames * bins, Complex{});
  std::vector<double> frame(win);
  std::vector<Complex> spec(bins);
  const double inv = 1.0 / static_cast<double>(win);
  for (std::size_t t = 0; t < shape.frames; ++t) {
    for (std::size_t k = 0; k < win; ++k) {
      const long n = static_cast<long>(t * config.hop() + k) - static_cast<long>(pad);
      double v = 0.0;
      if (n >= 0 && n < static_cast<long>(length)) {
        const auto i = static_cast<std::size_t>(n);
        if (env[i] > kEnvelopeFloor) v = grad[i] * w[k] / env[i];
      }
      frame[k] = v;
    }
    fft::rfft(frame, spec);
    for (std::size_t f = 0; f < bins; ++f) {
      const double c = (f == 0 || f == bins - 1) ? 1.0 : 2.0;
      out.values[t * bins + f] = spec[f] * (c * inv);
    }
  }
  return out;
}

}  // namespace duetsep
