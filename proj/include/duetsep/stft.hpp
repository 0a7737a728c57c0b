#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "duetsep/audio.hpp"

namespace duetsep {

enum class WindowKind { hann, sqrt_hann, rectangular };

/// Short-time Fourier transform geometry. Frames are centered (the signal is
/// zero-padded by window_size/2 on both sides) and synthesis uses weighted
/// overlap-add with the analysis window.
class StftConfig {
 public:
  /// Throws InvalidArgument when hop is out of range or the squared window
  /// does not overlap-add to a constant at this hop.
  StftConfig(std::size_t window_size, std::size_t hop, WindowKind window = WindowKind::hann);

  /// 4096 / 1024 periodic Hann.
  static StftConfig defaults() { return StftConfig(4096, 1024); }

  std::size_t window_size() const { return window_size_; }
  std::size_t hop() const { return hop_; }
  std::size_t bins() const { return window_size_ / 2 + 1; }
  WindowKind window_kind() const { return kind_; }
  std::span<const double> window() const { return window_; }

  /// Frame count for a signal of n samples.
  std::size_t frame_count(std::size_t n) const { return n / hop_ + 1; }

  friend bool operator==(const StftConfig& a, const StftConfig& b) {
    return a.window_size_ == b.window_size_ && a.hop_ == b.hop_ && a.kind_ == b.kind_;
  }

 private:
  std::size_t window_size_;
  std::size_t hop_;
  WindowKind kind_;
  std::vector<double> window_;
};

std::vector<double> make_window(WindowKind kind, std::size_t size);

/// bins x frames complex spectrogram; values are stored frame-major.
struct ComplexGrid {
  using Complex = std::complex<double>;

  StftConfig config;
  std::size_t frames = 0;
  std::size_t signal_length = 0;
  int sample_rate = 0;
  std::vector<Complex> values;

  std::size_t bins() const { return config.bins(); }
  Complex& at(std::size_t bin, std::size_t frame) { return values[frame * bins() + bin]; }
  const Complex& at(std::size_t bin, std::size_t frame) const { return values[frame * bins() + bin]; }
};

/// Requires a mono buffer.
ComplexGrid stft(const AudioBuffer& buffer, const StftConfig& config);
ComplexGrid stft(std::span<const double> signal, int sample_rate, const StftConfig& config);

AudioBuffer istft(const ComplexGrid& grid);
std::vector<double> istft_samples(const ComplexGrid& grid);

/// Adjoint of istft with respect to the real inner product: the returned grid
/// A satisfies <istft(Y), g> = sum Re(Y * conj(A)) for every grid Y shaped
/// like `shape`.
ComplexGrid istft_adjoint(std::span<const double> grad, const ComplexGrid& shape);

}  // namespace duetsep
